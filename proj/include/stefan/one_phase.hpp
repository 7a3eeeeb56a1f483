#pragma once

#include <functional>
#include <vector>

#include "stefan/core.hpp"

namespace stefan {

enum class Integrator { kExplicitEuler, kImplicitEuler };

struct SolverConfig {
    Grid grid{200};
    /// Time step [s]. The explicit integrator must also satisfy the CFL bound;
    /// `simulate` shrinks steps to it automatically.
    double dt = 1e-5;
    double safety_factor = 0.4;
    double min_interface = 1e-12;
    Integrator integrator = Integrator::kExplicitEuler;

    void validate() const;
};

/// T_x at the interface from the three-point backward difference in xi.
double interface_gradient(const OnePhaseState& state);

/// Largest explicit step at this state: safety * (dxi s)^2 / (2 alpha), further
/// reduced by the upwind advection term when the front moves.
double stable_dt(const OnePhaseState& state, const DerivedConstants& c, double safety_factor);

/// One step of the front-fixed one-phase problem under boundary flux qc.
OnePhaseState step(const OnePhaseState& state, double qc, const MaterialProperties& mat, const SolverConfig& cfg);

using FluxSource = std::function<double(double /*t*/)>;
using Trajectory = std::vector<OnePhaseState>;

/// Open-loop run. Records the initial state, every `decimate`-th step and the final state.
Trajectory simulate(const OnePhaseState& initial, const FluxSource& flux, double horizon,
                    const MaterialProperties& mat, const SolverConfig& cfg, std::size_t decimate = 1);

/// Exact translating solution of the one-phase problem:
///   theta(x, t) = (alpha/beta) (exp(-v (x - s(t)) / alpha) - 1),  s(t) = s0 + v t,
///   q_c(t) = (k v / beta) exp(v s(t) / alpha).
struct TravelingWave {
    double v;
    double s0;
};

struct TravelingWaveSample {
    double flux;
    double s_exact;
    double alpha;
    double beta;
    double v;

    double theta(double x) const;
    std::vector<double> profile(const Grid& grid) const;
};

TravelingWaveSample traveling_wave_oracle(const TravelingWave& tw, const MaterialProperties& mat, double t);

namespace detail {

/// Liquid-phase update shared with the two-phase solver. `s_eval` is the
/// interface used for the spatial operator (old for explicit, new for implicit).
std::vector<double> advance_liquid(std::span<const double> theta, double s_eval, double sdot, double qc, double k,
                                   double alpha, double dt, Integrator integrator);

double three_point_backward(std::span<const double> v, double h);
double three_point_forward(std::span<const double> v, double h);

} // namespace detail

} // namespace stefan
