#include "stefan/one_phase.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stefan/kernels.hpp"

namespace stefan {

void SolverConfig::validate() const {
    if (!(dt > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "solver time step must be positive");
    if (!(safety_factor > 0.0 && safety_factor <= 1.0)) {
        throw StefanError(ErrorCode::kInvalidParameter, "safety factor must lie in (0, 1]");
    }
    if (!(min_interface > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "min_interface must be positive");
}

namespace detail {

double three_point_backward(std::span<const double> v, double h) {
    const std::size_t n = v.size() - 1;
    return (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
}

double three_point_forward(std::span<const double> v, double h) {
    return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
}

std::vector<double> advance_liquid(std::span<const double> theta, double s_eval, double sdot, double qc, double k,
                                   double alpha, double dt, Integrator integrator) {
    const double h = 1.0 / static_cast<double>(theta.size() - 1);
    const kernels::LineOperator op{
        .diffusion = alpha / (s_eval * s_eval),
        .adv0 = 0.0,
        .adv1 = sdot / s_eval,
        .lo = kernels::Boundary::neumann_ghost_offset(2.0 * h * s_eval * qc / k),
        .hi = kernels::Boundary::dirichlet(0.0),
    };
    std::vector<double> out(theta.size());
    if (integrator == Integrator::kExplicitEuler) {
        kernels::explicit_step(op, theta, out, dt);
    } else {
        kernels::TridiagonalSystem sys;
        kernels::assemble_implicit(op, theta, dt, sys);
        kernels::solve_tridiagonal(sys);
        std::copy(sys.rhs.begin(), sys.rhs.end(), out.begin() + static_cast<std::ptrdiff_t>(sys.first));
        out.back() = 0.0;
    }
    return out;
}

} // namespace detail

double interface_gradient(const OnePhaseState& state) {
    return detail::three_point_backward(state.theta(), state.dxi()) / state.s();
}

double stable_dt(const OnePhaseState& state, const DerivedConstants& c, double safety_factor) {
    const double h = state.dxi();
    const double s = state.s();
    const double sdot = -c.beta * interface_gradient(state);
    // Diagonal weight of the explicit update; keeping it <= 1 keeps the update a convex combination.
    const double rate = 2.0 * c.alpha / (h * h * s * s) + std::abs(sdot) / (s * h);
    return safety_factor / rate;
}

OnePhaseState step(const OnePhaseState& state, double qc, const MaterialProperties& mat, const SolverConfig& cfg) {
    const DerivedConstants c = derive_constants(mat);
    const double dt = cfg.dt;
    if (cfg.integrator == Integrator::kExplicitEuler) {
        const double limit = stable_dt(state, c, cfg.safety_factor);
        if (dt > limit * (1.0 + 1e-12)) {
            throw StefanError(ErrorCode::kCflViolation,
                              "explicit step " + std::to_string(dt) + " s exceeds the stability bound " +
                                  std::to_string(limit) + " s");
        }
    }
    const double sdot = -c.beta * interface_gradient(state);
    const double s_new = state.s() + dt * sdot;
    if (!std::isfinite(s_new)) {
        throw StefanError(ErrorCode::kNumericalBlowup, "interface position became non-finite");
    }
    if (s_new < cfg.min_interface) {
        throw StefanError(ErrorCode::kDegenerateInterface,
                          "interface fell below min_interface (s = " + std::to_string(s_new) + " m)");
    }
    const double s_eval = cfg.integrator == Integrator::kExplicitEuler ? state.s() : s_new;
    std::vector<double> theta =
        detail::advance_liquid(state.theta(), s_eval, sdot, qc, mat.k, c.alpha, dt, cfg.integrator);
    if (!kernels::all_finite(theta)) {
        throw StefanError(ErrorCode::kNumericalBlowup, "temperature profile became non-finite");
    }
    return OnePhaseState(state.t() + dt, s_new, std::move(theta));
}

Trajectory simulate(const OnePhaseState& initial, const FluxSource& flux, double horizon,
                    const MaterialProperties& mat, const SolverConfig& cfg, std::size_t decimate) {
    if (!(horizon >= 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "horizon must be non-negative");
    cfg.validate();
    decimate = std::max<std::size_t>(decimate, 1);
    const DerivedConstants c = derive_constants(mat);
    const double t_end = initial.t() + horizon;

    Trajectory out{initial};
    OnePhaseState state = initial;
    SolverConfig local = cfg;
    std::size_t count = 0;
    while (state.t() < t_end) {
        double dt = std::min(cfg.dt, t_end - state.t());
        if (cfg.integrator == Integrator::kExplicitEuler) {
            dt = std::min(dt, stable_dt(state, c, cfg.safety_factor));
        }
        // Last sliver: snap to the horizon instead of taking a denormal step.
        if (t_end - (state.t() + dt) < 1e-12 * std::max(1.0, t_end)) dt = t_end - state.t();
        local.dt = dt;
        try {
            state = step(state, flux(state.t() + 0.5 * dt), mat, local);
        } catch (const StefanError& e) {
            throw SimulationError(e.code(), std::string(e.what()) + " at t = " + std::to_string(state.t()),
                                  state.t());
        }
        if (++count % decimate == 0 || state.t() >= t_end) out.push_back(state);
    }
    return out;
}

double TravelingWaveSample::theta(double x) const {
    return (alpha / beta) * std::expm1(-v * (x - s_exact) / alpha);
}

std::vector<double> TravelingWaveSample::profile(const Grid& grid) const {
    std::vector<double> out(grid.n_nodes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta(grid.node(i) * s_exact);
    out.back() = 0.0;
    return out;
}

TravelingWaveSample traveling_wave_oracle(const TravelingWave& tw, const MaterialProperties& mat, double t) {
    if (!(tw.v > 0.0) || !(tw.s0 > 0.0)) {
        throw StefanError(ErrorCode::kInvalidParameter, "traveling wave needs v > 0 and s0 > 0");
    }
    const DerivedConstants c = derive_constants(mat);
    const double s = tw.s0 + tw.v * t;
    const double exponent = tw.v * s / c.alpha;
    if (exponent > 20.0) {
        throw StefanError(ErrorCode::kInvalidParameter,
                          "traveling wave exponent v s / alpha = " + std::to_string(exponent) + " exceeds 20");
    }
    return {.flux = mat.k * tw.v / c.beta * std::exp(exponent), .s_exact = s, .alpha = c.alpha, .beta = c.beta,
            .v = tw.v};
}

} // namespace stefan
