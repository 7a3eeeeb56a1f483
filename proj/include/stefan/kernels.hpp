#pragma once

// Grid kernels used by the solvers and the CBF/metric evaluators.
//
// Each kernel exists twice: a serial reference in `serial::` and an OpenMP
// version in `parallel::`. The top-level functions dispatch on size; the
// serial versions are kept as the oracle for the parallel ones.

#include <cstddef>
#include <span>
#include <vector>

namespace stefan::kernels {

enum class Exec { kSerial, kParallel, kAuto };

/// Below this many samples the OpenMP fork/join overhead dominates.
inline constexpr std::size_t kParallelThreshold = 1u << 14;

struct Boundary {
    enum class Kind { kDirichlet, kNeumann };
    Kind kind;
    /// Dirichlet: pinned node value. Neumann: ghost = mirror node + value.
    double value;

    static Boundary dirichlet(double v) { return {Kind::kDirichlet, v}; }
    static Boundary neumann_ghost_offset(double g) { return {Kind::kNeumann, g}; }
};

/// theta_t = diffusion * theta_xixi + (adv0 + adv1 * xi) * theta_xi on xi in [0, 1],
/// advection upwinded by the sign of its local coefficient.
struct LineOperator {
    double diffusion;
    double adv0;
    double adv1;
    Boundary lo;
    Boundary hi;
};

/// Tridiagonal system over the unknown nodes [first, first + size).
struct TridiagonalSystem {
    std::size_t first = 0;
    std::vector<double> lower, diag, upper, rhs;

    void resize(std::size_t n) {
        lower.assign(n, 0.0);
        diag.assign(n, 0.0);
        upper.assign(n, 0.0);
        rhs.assign(n, 0.0);
    }
    std::size_t size() const noexcept { return diag.size(); }
};

/// Thomas algorithm; overwrites diag/rhs, solution returned in rhs.
void solve_tridiagonal(TridiagonalSystem& sys);

namespace serial {
double trapezoid(std::span<const double> v, double h);
double trapezoid_squared(std::span<const double> v, double h);
double min_value(std::span<const double> v);
double max_value(std::span<const double> v);
bool all_finite(std::span<const double> v);
void explicit_step(const LineOperator& op, std::span<const double> in, std::span<double> out, double dt);
void assemble_implicit(const LineOperator& op, std::span<const double> in, double dt, TridiagonalSystem& sys);
} // namespace serial

namespace parallel {
double trapezoid(std::span<const double> v, double h);
double trapezoid_squared(std::span<const double> v, double h);
double min_value(std::span<const double> v);
double max_value(std::span<const double> v);
bool all_finite(std::span<const double> v);
void explicit_step(const LineOperator& op, std::span<const double> in, std::span<double> out, double dt);
void assemble_implicit(const LineOperator& op, std::span<const double> in, double dt, TridiagonalSystem& sys);
} // namespace parallel

double trapezoid(std::span<const double> v, double h, Exec exec = Exec::kAuto);
double trapezoid_squared(std::span<const double> v, double h, Exec exec = Exec::kAuto);
double min_value(std::span<const double> v, Exec exec = Exec::kAuto);
double max_value(std::span<const double> v, Exec exec = Exec::kAuto);
bool all_finite(std::span<const double> v, Exec exec = Exec::kAuto);
void explicit_step(const LineOperator& op, std::span<const double> in, std::span<double> out, double dt,
                   Exec exec = Exec::kAuto);
void assemble_implicit(const LineOperator& op, std::span<const double> in, double dt, TridiagonalSystem& sys,
                       Exec exec = Exec::kAuto);

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

} // namespace stefan::kernels
