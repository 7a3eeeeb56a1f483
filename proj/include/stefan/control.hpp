#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stefan/cbf.hpp"
#include "stefan/core.hpp"
#include "stefan/two_phase.hpp"

namespace stefan {

/// Gains of the non-overshooting laws; c3 only for the second-order actuator.
struct NonovGains {
    double c1;
    double c2;
    std::optional<double> c3{};

    int actuator_order() const noexcept { return c3 ? 2 : 1; }
    void validate() const;
};

/// Gains of the QP safety filter bounds.
struct QpGains {
    double k1;
    double k2;
    double delta1 = 0.0;
    double delta2 = 0.0;

    void validate() const;
};

enum class Clamp { kNone, kLower, kUpper, kInfeasibleResolved };

const char* to_string(Clamp clamp);

struct FilterDecision {
    double u_applied;
    double u_lower;
    double u_upper;
    double u_operator;
    Clamp clamp;
};

/// U = -(c1 + c2) qc + c1 c2 sigma.
double nonovershooting(double sigma, double qc, const NonovGains& gains);

/// Clamp of the operator input into [U_*, U^*]; the closed-form solution of
/// min |u - u_o|^2 subject to both CBF input constraints.
FilterDecision qp_filter(double u_o, double sigma, double qc, const QpGains& gains);

/// Same filter with the upper bound tightened so the flux stays below q_bar.
FilterDecision qp_filter_upper(double u_o, double sigma, double qc, const QpGains& gains, double q_bar);

/// Saturation shared by the filters. If lower > upper the upper bound wins.
FilterDecision saturate(double u_o, double lower, double upper);

/// Second-order actuator law
/// U = c1c2c3 sigma - (c1c2 + c1c3 + c2c3) qc - (c1 + c2 + c3) p.
double nonovershooting_high(double sigma, double qc, double p, const NonovGains& gains);

/// Two-phase regulator; same form as the one-phase law with the two-phase deficit.
/// It never sees the disturbance flux.
double nonovershooting_two_phase(double sigma2, double qc, const NonovGains& gains);

// ---------------------------------------------------------------------------
// Gain and assumption checks

struct Check {
    std::string name;
    bool pass;
    double margin; ///< signed slack, >= 0 when the condition holds
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;
    std::vector<Check> warnings; ///< advisory only; ok() ignores them

    bool ok() const;
    const Check* find(const std::string& name) const;
    void add(std::string name, double margin, std::string detail, bool strict = false);
    void warn(std::string name, double margin, std::string detail);
    void merge(const ValidationReport& other);
};

enum class ControlVariant { kNonov1, kNonov2, kQp, kUpper, kTwoPhase };

const char* to_string(ControlVariant v);

struct InitialCbfData {
    double sigma0;
    double qc0;
    std::optional<double> p0{};
};

using ControllerGains = std::variant<NonovGains, QpGains>;

ValidationReport validate_gains(const InitialCbfData& init, const ControllerGains& gains, ControlVariant variant,
                                std::optional<double> q_bar = std::nullopt);

ValidationReport validate_scenario_assumptions(const OnePhaseState& initial, const ActuatorState& actuator,
                                               const MaterialProperties& mat, double L, const SetpointSpec& spec,
                                               ControlVariant variant);

/// Envelope constants declared for the two-phase initial data and disturbance.
struct TwoPhaseBounds {
    double T_l_bar;
    double T_s_bar;
    double eta_l;
    double eta_s;
    double q_f_bar;
};

ValidationReport validate_scenario_assumptions(const TwoPhaseState& initial, double qc0,
                                               const TwoPhaseMaterial& mat, const SetpointSpec& spec,
                                               const NonovGains& gains, const TwoPhaseBounds& bounds);

} // namespace stefan
