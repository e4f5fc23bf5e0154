#include <cstdint>
#include <random>

#include <benchmark/benchmark.h>

#include "toeplab/dg_assembly.hpp"
#include "toeplab/krylov.hpp"
#include "toeplab/structured.hpp"
#include "toeplab/symbol.hpp"

using namespace toeplab;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

void set_size(benchmark::State& state, std::size_t N) {
    state.counters["N"] = static_cast<double>(N);
    state.SetComplexityN(static_cast<int64_t>(N));
}

void BM_CirculantMatvec(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const BlockCirculant circ(builtin_dg_symbol(2), n, n);
    const Eigen::VectorXd x = random_vector(static_cast<Eigen::Index>(circ.lattice().N()));
    circulant_spectral_blocks(circ);  // computed lazily; keep it out of the timed loop
    for (auto _ : state) benchmark::DoNotOptimize(circulant_matvec(circ, x));
    set_size(state, circ.lattice().N());
}

void BM_ToeplitzMatvec(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const BlockToeplitz toep(builtin_dg_symbol(2), n, n);
    const Eigen::VectorXd x = random_vector(static_cast<Eigen::Index>(toep.lattice().N()));
    for (auto _ : state) benchmark::DoNotOptimize(toeplitz_matvec(toep, x));
    set_size(state, toep.lattice().N());
}

void BM_PressureMatvec(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PressureOperator op = assemble_pressure_operator(build_basis(2), n, n, BoundaryCondition::Dirichlet);
    const Eigen::VectorXd x = random_vector(static_cast<Eigen::Index>(op.lattice().N()));
    for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
    set_size(state, op.lattice().N());
}

void BM_StrangApply(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const BlockLattice lat(n, n, 9);
    const StrangPreconditioner p = build_strang(builtin_dg_symbol(2), lat);
    const Eigen::VectorXd r = random_vector(static_cast<Eigen::Index>(lat.N()));
    for (auto _ : state) benchmark::DoNotOptimize(p.apply(r));
    set_size(state, lat.N());
}

void BM_Solve(benchmark::State& state, bool strang) {
    const int n = static_cast<int>(state.range(0));
    const PressureOperator op = assemble_pressure_operator(build_basis(2), n, n, BoundaryCondition::Dirichlet);
    const LinearOperator a = as_operator(op);
    const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 42);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(b.size());
    const StrangPreconditioner p = build_strang(op.symbol(), op.lattice());
    std::size_t iterations = 0;
    for (auto _ : state) {
        const SolveResult r = strang ? pcg(a, p, b, x0) : cg(a, b, x0);
        iterations = r.report.iterations;
        benchmark::DoNotOptimize(r.x.data());
    }
    state.counters["iterations"] = static_cast<double>(iterations);
    set_size(state, op.lattice().N());
}

} // namespace

BENCHMARK(BM_CirculantMatvec)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_ToeplitzMatvec)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_PressureMatvec)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oN);
BENCHMARK(BM_StrangApply)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNLogN);
BENCHMARK_CAPTURE(BM_Solve, cg, false)->Arg(16)->Arg(32)->Arg(48)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Solve, pcg, true)->Arg(16)->Arg(32)->Arg(48)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
