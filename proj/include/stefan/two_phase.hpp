#pragma once

#include <span>
#include <vector>

#include "stefan/core.hpp"
#include "stefan/one_phase.hpp"

namespace stefan {

struct TwoPhaseMaterial {
    MaterialProperties liquid;
    MaterialProperties solid; ///< solid.dH is unused; latent heat is rho_l * dH_l
    double L;                 ///< domain length [m]

    void validate() const;
    double gamma() const { return liquid.rho * liquid.dH; }
};

/// Liquid on xi = x/s and solid on eta = (x - s)/(L - s), both pinned at the
/// melting temperature on the interface (theta_l.back() == theta_s.front() == 0).
class TwoPhaseState {
public:
    TwoPhaseState(double t, double s, double L, std::vector<double> theta_l, std::vector<double> theta_s);

    double t() const noexcept { return t_; }
    double s() const noexcept { return s_; }
    double L() const noexcept { return L_; }
    std::span<const double> theta_l() const noexcept { return theta_l_; }
    std::span<const double> theta_s() const noexcept { return theta_s_; }
    std::size_t n_cells() const noexcept { return theta_l_.size() - 1; }
    double dxi() const noexcept { return 1.0 / static_cast<double>(n_cells()); }

    /// Liquid part as a one-phase state (same time, interface and profile).
    OnePhaseState liquid() const { return OnePhaseState(t_, s_, theta_l_); }

private:
    double t_;
    double s_;
    double L_;
    std::vector<double> theta_l_;
    std::vector<double> theta_s_;
};

/// Interface velocity from the energy balance gamma sdot = -k_l T_l,x(s) + k_s T_s,x(s).
double interface_velocity(const TwoPhaseState& state, const TwoPhaseMaterial& mat);

double stable_dt_two_phase(const TwoPhaseState& state, const TwoPhaseMaterial& mat, double safety_factor);

TwoPhaseState step_two_phase(const TwoPhaseState& state, double qc, double qf, const TwoPhaseMaterial& mat,
                             const SolverConfig& cfg);

/// Interface position reached under zero input and zero disturbance.
double s_infinity(const TwoPhaseState& initial, const TwoPhaseMaterial& mat);

/// Stored energy (k_l/alpha_l) int theta_l + (k_s/alpha_s) int theta_s + gamma s, per unit area.
double two_phase_energy(const TwoPhaseState& state, const TwoPhaseMaterial& mat);

} // namespace stefan
