#include "stefan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stefan::kernels {

namespace {

// Index range of the nodes that carry an unknown (Dirichlet ends are pinned).
struct Rows {
    std::size_t first;
    std::size_t last; // inclusive
};

Rows unknown_rows(const LineOperator& op, std::size_t n_nodes) {
    const std::size_t n = n_nodes - 1;
    return {op.lo.kind == Boundary::Kind::kDirichlet ? std::size_t{1} : std::size_t{0},
            op.hi.kind == Boundary::Kind::kDirichlet ? n - 1 : n};
}

// Neighbour values of node i, resolving ghosts and pinned ends.
inline double left_of(const LineOperator& op, std::span<const double> in, std::size_t i) {
    if (i == 0) return in[1] + op.lo.value;
    if (i == 1 && op.lo.kind == Boundary::Kind::kDirichlet) return op.lo.value;
    return in[i - 1];
}

inline double right_of(const LineOperator& op, std::span<const double> in, std::size_t i) {
    const std::size_t n = in.size() - 1;
    if (i == n) return in[n - 1] + op.hi.value;
    if (i == n - 1 && op.hi.kind == Boundary::Kind::kDirichlet) return op.hi.value;
    return in[i + 1];
}

inline double explicit_node(const LineOperator& op, std::span<const double> in, std::size_t i, double h,
                            double dt) {
    const double xi = static_cast<double>(i) * h;
    const double b = op.adv0 + op.adv1 * xi;
    const double l = left_of(op, in, i);
    const double r = right_of(op, in, i);
    const double c = in[i];
    const double diff = op.diffusion * (r - 2.0 * c + l) / (h * h);
    const double adv = b >= 0.0 ? b * (r - c) / h : b * (c - l) / h;
    return c + dt * (diff + adv);
}

inline void implicit_row(const LineOperator& op, std::span<const double> in, std::size_t i, double h, double dt,
                         TridiagonalSystem& sys) {
    const std::size_t n = in.size() - 1;
    const std::size_t r = i - sys.first;
    const double xi = static_cast<double>(i) * h;
    const double b = op.adv0 + op.adv1 * xi;
    const double d = dt * op.diffusion / (h * h);
    double lo = -(d + dt * std::max(-b, 0.0) / h);
    double up = -(d + dt * std::max(b, 0.0) / h);
    double rhs = in[i];
    const double diag = 1.0 - lo - up;

    if (i == 0) {
        // Ghost node mirrors node 1 plus the flux offset.
        up += lo;
        rhs -= lo * op.lo.value;
        lo = 0.0;
    } else if (i == 1 && op.lo.kind == Boundary::Kind::kDirichlet) {
        rhs -= lo * op.lo.value;
        lo = 0.0;
    }
    if (i == n) {
        lo += up;
        rhs -= up * op.hi.value;
        up = 0.0;
    } else if (i == n - 1 && op.hi.kind == Boundary::Kind::kDirichlet) {
        rhs -= up * op.hi.value;
        up = 0.0;
    }
    sys.lower[r] = lo;
    sys.diag[r] = diag;
    sys.upper[r] = up;
    sys.rhs[r] = rhs;
}

bool use_parallel(std::size_t n, Exec exec) {
    switch (exec) {
    case Exec::kSerial: return false;
    case Exec::kParallel: return true;
    case Exec::kAuto: break;
    }
    return n >= kParallelThreshold;
}

} // namespace

void solve_tridiagonal(TridiagonalSystem& sys) {
    const std::size_t n = sys.size();
    if (n == 0) return;
    for (std::size_t i = 1; i < n; ++i) {
        const double m = sys.lower[i] / sys.diag[i - 1];
        sys.diag[i] -= m * sys.upper[i - 1];
        sys.rhs[i] -= m * sys.rhs[i - 1];
    }
    sys.rhs[n - 1] /= sys.diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        sys.rhs[i] = (sys.rhs[i] - sys.upper[i] * sys.rhs[i + 1]) / sys.diag[i];
    }
}

namespace serial {

double trapezoid(std::span<const double> v, double h) {
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) sum += v[i];
    return h * (sum + 0.5 * (v.front() + v.back()));
}

double trapezoid_squared(std::span<const double> v, double h) {
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) sum += v[i] * v[i];
    return h * (sum + 0.5 * (v.front() * v.front() + v.back() * v.back()));
}

double min_value(std::span<const double> v) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : v) m = std::min(m, x);
    return m;
}

double max_value(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    return m;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void explicit_step(const LineOperator& op, std::span<const double> in, std::span<double> out, double dt) {
    const double h = 1.0 / static_cast<double>(in.size() - 1);
    const Rows rows = unknown_rows(op, in.size());
    for (std::size_t i = rows.first; i <= rows.last; ++i) out[i] = explicit_node(op, in, i, h, dt);
    if (op.lo.kind == Boundary::Kind::kDirichlet) out.front() = op.lo.value;
    if (op.hi.kind == Boundary::Kind::kDirichlet) out.back() = op.hi.value;
}

void assemble_implicit(const LineOperator& op, std::span<const double> in, double dt, TridiagonalSystem& sys) {
    const double h = 1.0 / static_cast<double>(in.size() - 1);
    const Rows rows = unknown_rows(op, in.size());
    sys.first = rows.first;
    sys.resize(rows.last - rows.first + 1);
    for (std::size_t i = rows.first; i <= rows.last; ++i) implicit_row(op, in, i, h, dt, sys);
}

} // namespace serial

namespace parallel {

double trapezoid(std::span<const double> v, double h) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
    double sum = 0.0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
    for (std::ptrdiff_t i = 1; i < n - 1; ++i) sum += v[i];
    return h * (sum + 0.5 * (v.front() + v.back()));
}

double trapezoid_squared(std::span<const double> v, double h) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
    double sum = 0.0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
    for (std::ptrdiff_t i = 1; i < n - 1; ++i) sum += v[i] * v[i];
    return h * (sum + 0.5 * (v.front() * v.front() + v.back() * v.back()));
}

double min_value(std::span<const double> v) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
    double m = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : m) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) m = std::min(m, v[i]);
    return m;
}

double max_value(std::span<const double> v) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
    double m = -std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(max : m) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) m = std::max(m, v[i]);
    return m;
}

bool all_finite(std::span<const double> v) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
    int bad = 0;
#pragma omp parallel for reduction(+ : bad) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) bad += std::isfinite(v[i]) ? 0 : 1;
    return bad == 0;
}

void explicit_step(const LineOperator& op, std::span<const double> in, std::span<double> out, double dt) {
    const double h = 1.0 / static_cast<double>(in.size() - 1);
    const Rows rows = unknown_rows(op, in.size());
    const auto first = static_cast<std::ptrdiff_t>(rows.first);
    const auto last = static_cast<std::ptrdiff_t>(rows.last);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = first; i <= last; ++i) {
        out[i] = explicit_node(op, in, static_cast<std::size_t>(i), h, dt);
    }
    if (op.lo.kind == Boundary::Kind::kDirichlet) out.front() = op.lo.value;
    if (op.hi.kind == Boundary::Kind::kDirichlet) out.back() = op.hi.value;
}

void assemble_implicit(const LineOperator& op, std::span<const double> in, double dt, TridiagonalSystem& sys) {
    const double h = 1.0 / static_cast<double>(in.size() - 1);
    const Rows rows = unknown_rows(op, in.size());
    sys.first = rows.first;
    sys.resize(rows.last - rows.first + 1);
    const auto first = static_cast<std::ptrdiff_t>(rows.first);
    const auto last = static_cast<std::ptrdiff_t>(rows.last);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = first; i <= last; ++i) implicit_row(op, in, static_cast<std::size_t>(i), h, dt, sys);
}

} // namespace parallel

double trapezoid(std::span<const double> v, double h, Exec exec) {
    return use_parallel(v.size(), exec) ? parallel::trapezoid(v, h) : serial::trapezoid(v, h);
}

double trapezoid_squared(std::span<const double> v, double h, Exec exec) {
    return use_parallel(v.size(), exec) ? parallel::trapezoid_squared(v, h) : serial::trapezoid_squared(v, h);
}

double min_value(std::span<const double> v, Exec exec) {
    return use_parallel(v.size(), exec) ? parallel::min_value(v) : serial::min_value(v);
}

double max_value(std::span<const double> v, Exec exec) {
    return use_parallel(v.size(), exec) ? parallel::max_value(v) : serial::max_value(v);
}

bool all_finite(std::span<const double> v, Exec exec) {
    return use_parallel(v.size(), exec) ? parallel::all_finite(v) : serial::all_finite(v);
}

void explicit_step(const LineOperator& op, std::span<const double> in, std::span<double> out, double dt, Exec exec) {
    if (use_parallel(in.size(), exec)) {
        parallel::explicit_step(op, in, out, dt);
    } else {
        serial::explicit_step(op, in, out, dt);
    }
}

void assemble_implicit(const LineOperator& op, std::span<const double> in, double dt, TridiagonalSystem& sys,
                       Exec exec) {
    if (use_parallel(in.size(), exec)) {
        parallel::assemble_implicit(op, in, dt, sys);
    } else {
        serial::assemble_implicit(op, in, dt, sys);
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace stefan::kernels
