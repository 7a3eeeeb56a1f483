#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "stefan/core.hpp"
#include "stefan/kernels.hpp"
#include "stefan/one_phase.hpp"

namespace k = stefan::kernels;

namespace {

std::vector<double> profile(std::size_t n) {
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n);
        v[i] = (1.0 - x) * (1.0 + 0.1 * std::sin(20.0 * x));
    }
    return v;
}

k::Exec exec_of(const benchmark::State& st) { return st.range(1) ? k::Exec::kParallel : k::Exec::kSerial; }

void label(benchmark::State& st) { st.SetLabel(st.range(1) ? "parallel" : "serial"); }

void BM_Trapezoid(benchmark::State& st) {
    const auto v = profile(static_cast<std::size_t>(st.range(0)));
    const double h = 1.0 / static_cast<double>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(k::trapezoid(v, h, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(0));
    label(st);
}

void BM_TrapezoidSquared(benchmark::State& st) {
    const auto v = profile(static_cast<std::size_t>(st.range(0)));
    const double h = 1.0 / static_cast<double>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(k::trapezoid_squared(v, h, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(0));
    label(st);
}

void BM_MinValue(benchmark::State& st) {
    const auto v = profile(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(k::min_value(v, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(0));
    label(st);
}

void BM_ExplicitStep(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto in = profile(n);
    std::vector<double> out(in.size());
    const k::LineOperator op{.diffusion = 1.0, .adv0 = 0.0, .adv1 = 0.3, .lo = k::Boundary::neumann_ghost_offset(0.01),
                             .hi = k::Boundary::dirichlet(0.0)};
    const double h = 1.0 / static_cast<double>(n);
    for (auto _ : st) {
        k::explicit_step(op, in, out, 0.2 * h * h, exec_of(st));
        benchmark::ClobberMemory();
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
    label(st);
}

void BM_AssembleImplicit(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto in = profile(n);
    k::TridiagonalSystem sys;
    const k::LineOperator op{.diffusion = 1.0, .adv0 = 0.0, .adv1 = 0.3, .lo = k::Boundary::neumann_ghost_offset(0.01),
                             .hi = k::Boundary::dirichlet(0.0)};
    for (auto _ : st) {
        k::assemble_implicit(op, in, 1e-3, sys, exec_of(st));
        benchmark::ClobberMemory();
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
    label(st);
}

// Whole solver step at the sizes the scenarios actually use.
void BM_OnePhaseStep(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    stefan::SolverConfig cfg{.grid = stefan::Grid(n), .dt = 1e-5,
                             .integrator = st.range(1) ? stefan::Integrator::kImplicitEuler
                                                       : stefan::Integrator::kExplicitEuler};
    if (!st.range(1)) cfg.dt = 0.04 / static_cast<double>(n * n);
    const auto mat = stefan::MaterialProperties::unit();
    stefan::OnePhaseState s(0.0, 0.5, profile(n));
    for (auto _ : st) {
        auto next = stefan::step(s, 0.5, mat, cfg);
        benchmark::DoNotOptimize(next);
    }
    st.SetLabel(st.range(1) ? "implicit" : "explicit");
}

void sizes(benchmark::internal::Benchmark* b) {
    for (long n : {200L, 4096L, 1L << 16, 1L << 20})
        for (long par : {0L, 1L}) b->Args({n, par});
}

} // namespace

BENCHMARK(BM_Trapezoid)->Apply(sizes);
BENCHMARK(BM_TrapezoidSquared)->Apply(sizes);
BENCHMARK(BM_MinValue)->Apply(sizes);
BENCHMARK(BM_ExplicitStep)->Apply(sizes);
BENCHMARK(BM_AssembleImplicit)->Apply(sizes);
BENCHMARK(BM_OnePhaseStep)->ArgsProduct({{200, 2000}, {0, 1}});

BENCHMARK_MAIN();
