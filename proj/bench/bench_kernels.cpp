// Serial against OpenMP timings of the parallel kernels.

#include "feller/geometry.hpp"
#include "feller/measure.hpp"
#include "feller/montecarlo.hpp"
#include "feller/operator.hpp"
#include "feller/resolvent.hpp"
#include "feller/semigroup.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

using namespace feller;

namespace {

Problem ou_2d(double h) {
    return {DomainSpec::ball_exterior(2, 1.0), builtin_operator(BuiltinOperator::ou, 2),
            BoundaryMeasureSpec(ShellDensity{1.5, 2.5}, 2), h};
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void truncate(benchmark::State& state) {
    const Problem p = ou_2d(0.1);
    const auto grid = std::make_shared<const Grid>(build_exhaustion(p.domain, 3, p.h));
    for (auto _ : state) benchmark::DoNotOptimize(truncate_measure(p.measure, grid, exec_of(state)));
}

void assemble_operator(benchmark::State& state) {
    const Problem p = ou_2d(0.05);
    const Truncation t = build_truncation(p, 3);
    for (auto _ : state) benchmark::DoNotOptimize(assemble(t.grid, p.coefficients, t.measure, exec_of(state)));
}

void evolve_batch(benchmark::State& state) {
    const Problem p = ou_2d(0.1);
    const Truncation t = build_truncation(p, 3);
    const SemigroupEvolver ev(t.op, 0.01);
    std::vector<Vector> fs;
    for (int k = 0; k < 8; ++k)
        fs.push_back(GridFunction::sample(t.grid, [k](const Point& x) { return std::cos(k * x.norm()); }).values);
    for (auto _ : state) benchmark::DoNotOptimize(ev.evolve_batch(fs, 0.2, exec_of(state)));
}

void snapshots(benchmark::State& state) {
    const Problem p = ou_2d(0.1);
    PathOptions opt;
    opt.dt = 1e-3;
    opt.particles = 2000;
    opt.exec = exec_of(state);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            simulate_snapshots(p.coefficients, p.domain, p.measure, Point(2.0, 0.0), {0.25, 0.5}, opt));
}

}  // namespace

BENCHMARK(truncate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(assemble_operator)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(evolve_batch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(snapshots)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
