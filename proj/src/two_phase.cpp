#include "stefan/two_phase.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stefan/kernels.hpp"

namespace stefan {

void TwoPhaseMaterial::validate() const {
    liquid.validate();
    solid.validate();
    if (liquid.Tm != solid.Tm) {
        throw StefanError(ErrorCode::kInvalidParameter, "liquid and solid must share the melting temperature");
    }
    if (!(L > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "domain length must be positive");
}

TwoPhaseState::TwoPhaseState(double t, double s, double L, std::vector<double> theta_l, std::vector<double> theta_s)
    : t_(t), s_(s), L_(L), theta_l_(std::move(theta_l)), theta_s_(std::move(theta_s)) {
    if (!(s_ > 0.0 && s_ < L_)) {
        throw StefanError(ErrorCode::kInvalidParameter, "interface must lie strictly inside (0, L)");
    }
    if (theta_l_.size() != theta_s_.size() || theta_l_.size() < Grid::kMinCells + 1) {
        throw StefanError(ErrorCode::kInvalidParameter, "liquid and solid grids need the same node count (>= 9)");
    }
    if (!kernels::all_finite(theta_l_) || !kernels::all_finite(theta_s_)) {
        throw StefanError(ErrorCode::kNumericalBlowup, "temperature profile contains non-finite values");
    }
    theta_l_.back() = 0.0;
    theta_s_.front() = 0.0;
}

double interface_velocity(const TwoPhaseState& state, const TwoPhaseMaterial& mat) {
    const double h = state.dxi();
    const double grad_l = detail::three_point_backward(state.theta_l(), h) / state.s();
    const double grad_s = detail::three_point_forward(state.theta_s(), h) / (state.L() - state.s());
    return (-mat.liquid.k * grad_l + mat.solid.k * grad_s) / mat.gamma();
}

double stable_dt_two_phase(const TwoPhaseState& state, const TwoPhaseMaterial& mat, double safety_factor) {
    const double h = state.dxi();
    const double sdot = std::abs(interface_velocity(state, mat));
    const double a_l = derive_constants(mat.liquid).alpha;
    const double a_s = derive_constants(mat.solid).alpha;
    const double ls = state.L() - state.s();
    const double rate_l = 2.0 * a_l / (h * h * state.s() * state.s()) + sdot / (state.s() * h);
    const double rate_s = 2.0 * a_s / (h * h * ls * ls) + sdot / (ls * h);
    return safety_factor / std::max(rate_l, rate_s);
}

TwoPhaseState step_two_phase(const TwoPhaseState& state, double qc, double qf, const TwoPhaseMaterial& mat,
                             const SolverConfig& cfg) {
    if (!(qf >= 0.0)) throw StefanError(ErrorCode::kInvalidInput, "disturbance flux must be non-negative");
    const double dt = cfg.dt;
    if (cfg.integrator == Integrator::kExplicitEuler) {
        const double limit = stable_dt_two_phase(state, mat, cfg.safety_factor);
        if (dt > limit * (1.0 + 1e-12)) {
            throw StefanError(ErrorCode::kCflViolation, "explicit step exceeds the stability bound " +
                                                            std::to_string(limit) + " s");
        }
    }
    const double L = state.L();
    const double sdot = interface_velocity(state, mat);
    const double s_new = state.s() + dt * sdot;
    if (!std::isfinite(s_new)) throw StefanError(ErrorCode::kNumericalBlowup, "interface position became non-finite");
    if (s_new <= cfg.min_interface || s_new >= L - cfg.min_interface) {
        throw StefanError(ErrorCode::kPhaseDisappearance,
                          "interface left (min_interface, L - min_interface): s = " + std::to_string(s_new) + " m");
    }
    const bool expl = cfg.integrator == Integrator::kExplicitEuler;
    const double s_eval = expl ? state.s() : s_new;
    const double a_l = derive_constants(mat.liquid).alpha;
    const double a_s = derive_constants(mat.solid).alpha;

    std::vector<double> theta_l =
        detail::advance_liquid(state.theta_l(), s_eval, sdot, qc, mat.liquid.k, a_l, dt, cfg.integrator);

    const double h = state.dxi();
    const double ls = L - s_eval;
    const kernels::LineOperator solid{
        .diffusion = a_s / (ls * ls),
        .adv0 = sdot / ls,
        .adv1 = -sdot / ls,
        .lo = kernels::Boundary::dirichlet(0.0),
        .hi = kernels::Boundary::neumann_ghost_offset(-2.0 * h * ls * qf / mat.solid.k),
    };
    std::vector<double> theta_s(state.theta_s().size());
    if (expl) {
        kernels::explicit_step(solid, state.theta_s(), theta_s, dt);
    } else {
        kernels::TridiagonalSystem sys;
        kernels::assemble_implicit(solid, state.theta_s(), dt, sys);
        kernels::solve_tridiagonal(sys);
        std::copy(sys.rhs.begin(), sys.rhs.end(), theta_s.begin() + static_cast<std::ptrdiff_t>(sys.first));
        theta_s.front() = 0.0;
    }
    if (!kernels::all_finite(theta_l) || !kernels::all_finite(theta_s)) {
        throw StefanError(ErrorCode::kNumericalBlowup, "temperature profile became non-finite");
    }
    return TwoPhaseState(state.t() + dt, s_new, L, std::move(theta_l), std::move(theta_s));
}

double two_phase_energy(const TwoPhaseState& state, const TwoPhaseMaterial& mat) {
    const double h = state.dxi();
    const double cl = mat.liquid.rho * mat.liquid.cp; // k_l / alpha_l
    const double cs = mat.solid.rho * mat.solid.cp;
    return cl * state.s() * integrate_profile(state.theta_l(), h) +
           cs * (state.L() - state.s()) * integrate_profile(state.theta_s(), h) + mat.gamma() * state.s();
}

double s_infinity(const TwoPhaseState& initial, const TwoPhaseMaterial& mat) {
    const double h = initial.dxi();
    const double g = mat.gamma();
    const double liquid = mat.liquid.rho * mat.liquid.cp / g * initial.s() * integrate_profile(initial.theta_l(), h);
    const double solid =
        mat.solid.rho * mat.solid.cp / g * (initial.L() - initial.s()) * integrate_profile(initial.theta_s(), h);
    return initial.s() + liquid + solid;
}

} // namespace stefan
