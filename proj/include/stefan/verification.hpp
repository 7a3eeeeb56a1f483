#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "stefan/cbf.hpp"
#include "stefan/control.hpp"
#include "stefan/core.hpp"
#include "stefan/two_phase.hpp"

namespace stefan {

struct SafetyTolerances {
    double tol_T = 0.0;   ///< [C]
    double tol_s = 0.0;   ///< [m]
    double tol_q = 0.0;   ///< [W/m^2]
    double tol_cbf = 0.0; ///< same units as the CBF being checked

    void validate() const;
};

enum class ViolationKind {
    kEnergyDeficit,        ///< h1 < 0
    kNegativeFlux,         ///< h2 < 0
    kLiquidBelowMelting,   ///< h(x,t) < 0
    kInterfaceOvershoot,   ///< s > s_r
    kInterfaceOutOfDomain, ///< s outside (0, L)
    kFluxCeiling,          ///< qc > q_bar
    kTemperatureCeiling,   ///< T > T*
    kSolidAboveMelting,    ///< T_s > Tm
};

inline constexpr std::size_t kViolationKindCount = 8;

const char* to_string(ViolationKind kind);

struct Violation {
    double t;
    ViolationKind kind;
    double magnitude; ///< how far past the tolerance, always > 0
};

struct MonitorLimits {
    double s_r;
    double L;
    std::optional<double> q_bar{};         ///< flux ceiling
    std::optional<double> theta_ceiling{}; ///< T* - Tm
    bool check_setpoint = true;
};

std::vector<Violation> monitor_step(const OnePhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle,
                                    const MonitorLimits& limits, const SafetyTolerances& tol);

std::vector<Violation> monitor_step(const TwoPhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle,
                                    const MonitorLimits& limits, const SafetyTolerances& tol);

/// One safety inequality claimed by a theorem and the violation kind that reports it.
struct TheoremClaim {
    const char* theorem;
    const char* inequality;
    ViolationKind kind;
};

std::span<const TheoremClaim> theorem_claims();

/// Accumulates violations over a run; stores the first `max_stored` and counts all.
class SafetyMonitor {
public:
    explicit SafetyMonitor(MonitorLimits limits, SafetyTolerances tol, std::size_t max_stored = 1000);

    void observe(const OnePhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle);
    void observe(const TwoPhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle);

    std::size_t count() const noexcept { return count_; }
    std::size_t count(ViolationKind kind) const noexcept { return per_kind_[static_cast<std::size_t>(kind)]; }
    const std::vector<Violation>& stored() const noexcept { return stored_; }
    const MonitorLimits& limits() const noexcept { return limits_; }
    const SafetyTolerances& tolerances() const noexcept { return tol_; }

private:
    void record(const std::vector<Violation>& v);

    MonitorLimits limits_;
    SafetyTolerances tol_;
    std::size_t max_stored_;
    std::size_t count_ = 0;
    std::array<std::size_t, kViolationKindCount> per_kind_{};
    std::vector<Violation> stored_;
};

// ---------------------------------------------------------------------------
// Lyapunov norm and decay

/// ||theta||^2 + (s - s_r)^2 + qc^2 (+ p^2 for the second-order actuator).
double phi_norm(const OnePhaseState& state, const ActuatorState& actuator, const SetpointSpec& spec);

/// ||theta_l||^2 + ||theta_s||^2 + (s - s_r)^2 + qc^2.
double phi_norm(const TwoPhaseState& state, const ActuatorState& actuator, const SetpointSpec& spec);

struct DecayFit {
    double M;              ///< exp(intercept) / Phi(0)
    double b;              ///< -slope
    double envelope_ratio; ///< max_t Phi(t) / (M Phi(0) exp(-b t))
    double M_envelope() const { return M * envelope_ratio; }
};

/// Least-squares line through (t, log Phi). Needs at least 10 strictly positive samples.
DecayFit fit_decay(std::span<const double> t, std::span<const double> phi);

// ---------------------------------------------------------------------------
// Reduced CBF dynamics

struct HTriple {
    double h1;
    double h2;
    double h3;
};

/// Closed form of h1' = -c1 h1 + h3, h2' = -c1 h2 + c2 h3, h3' = -c2 h3 with h3(0) = c1 h1(0) - h2(0).
HTriple analytic_h_oracle(double h1_0, double h2_0, double c1, double c2, double t);

template <std::size_t N>
using Matrix = std::array<std::array<double, N>, N>;
template <std::size_t N>
using Vector = std::array<double, N>;

/// Order-1 chain on (h1, h2, h3).
Matrix<3> chain_matrix(double c1, double c2);
/// Order-2 chain on (h1, h2, h3, h4, h5).
Matrix<5> chain_matrix(double c1, double c2, double c3);

/// Classical RK4 for x' = A x with a fixed step count.
template <std::size_t N>
Vector<N> rk4_linear(const Matrix<N>& A, Vector<N> x, double t_end, std::size_t steps,
                     std::vector<Vector<N>>* path = nullptr) {
    auto apply = [&](const Vector<N>& v) {
        Vector<N> r{};
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) r[i] += A[i][j] * v[j];
        return r;
    };
    auto axpy = [](const Vector<N>& a, double s, const Vector<N>& b) {
        Vector<N> r;
        for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + s * b[i];
        return r;
    };
    const double h = steps ? t_end / static_cast<double>(steps) : 0.0;
    if (path) path->push_back(x);
    for (std::size_t n = 0; n < steps; ++n) {
        const auto k1 = apply(x);
        const auto k2 = apply(axpy(x, h / 2, k1));
        const auto k3 = apply(axpy(x, h / 2, k2));
        const auto k4 = apply(axpy(x, h, k3));
        for (std::size_t i = 0; i < N; ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        if (path) path->push_back(x);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Run report

struct ClampStats {
    std::size_t steps = 0;
    std::size_t lower = 0;
    std::size_t upper = 0;
    std::size_t infeasible = 0;

    void add(Clamp c);
    double fraction(std::size_t n) const { return steps ? static_cast<double>(n) / static_cast<double>(steps) : 0.0; }
};

struct RunReport {
    std::string scenario;
    std::string variant;
    std::string status = "ok"; ///< ok | violation | numerical-failure
    std::string error;
    double t_end = 0.0;
    double s_end = 0.0;
    double s_max = 0.0;
    double s_r = 0.0;
    double c1_logged = 0.0;
    std::size_t violation_count = 0;
    std::vector<Violation> violations;
    std::vector<std::pair<double, double>> phi_series;
    std::optional<DecayFit> decay;
    std::optional<double> phi_floor{}; ///< smallest Phi when the fit is degenerate
    ClampStats clamp_stats;
    ValidationReport assumption_report;
    SafetyTolerances tolerances;

    /// Fits the decay from phi_series when possible, otherwise records the floor.
    void finalize_decay();
    nlohmann::json to_json() const;
};

} // namespace stefan
