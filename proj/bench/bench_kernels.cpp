#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "sgdyn/reference.hpp"
#include "sgdyn/rng.hpp"
#include "sgdyn/sparse_grid.hpp"
#include "sgdyn/time_iteration.hpp"

using namespace sgdyn;

namespace {

HierarchicalGrid filled_grid(std::size_t d, int depth) {
    auto g = HierarchicalGrid::make_regular(d, depth, 3, Domain::unit(d));
    std::vector<double> v(g.size() * 3);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinates(p);
        double s = 0.0;
        for (double xi : x) s += xi * xi;
        v[3 * p] = std::exp(-s);
        v[3 * p + 1] = std::sin(s);
        v[3 * p + 2] = 1.0 + s;
    }
    g.set_all_values(v);
    g.hierarchize();
    return g;
}

std::vector<double> sample_points(std::size_t d, std::size_t n) {
    std::vector<double> xs(n * d);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = rng::uniform(3, i / d, i % d);
    return xs;
}

// Args: dimension, depth.
void BM_HierarchizeReference(benchmark::State& state) {
    const auto g = filled_grid(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(reference::hierarchize(g));
    state.counters["points"] = static_cast<double>(g.size());
}

void BM_HierarchizeFast(benchmark::State& state) {
    auto g = filled_grid(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        g.hierarchize();
        benchmark::DoNotOptimize(g.all_surpluses().data());
    }
    state.counters["points"] = static_cast<double>(g.size());
}

void BM_InterpolateReference(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const auto g = filled_grid(d, static_cast<int>(state.range(1)));
    const auto xs = sample_points(d, 1000);
    std::vector<double> out(1000 * 3);
    for (auto _ : state) {
        reference::interpolate_batch(g, xs, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}

void BM_InterpolateFast(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const auto g = filled_grid(d, static_cast<int>(state.range(1)));
    const auto xs = sample_points(d, 1000);
    std::vector<double> out(1000 * 3);
    for (auto _ : state) {
        g.interpolate_batch(xs, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}

// One time-iteration step for the two-country model. Arg: 0 = SG, 1 = DDSG.
void BM_TimeIterationStep(benchmark::State& state) {
    const auto p = IrbcParams::make(2);
    TiConfig c;
    c.max_iters = 1;
    c.approximator = state.range(0) == 0 ? ApproximatorKind::sg : ApproximatorKind::ddsg;
    for (auto _ : state) benchmark::DoNotOptimize(run(c, p, GuessKind::constant).report.iterations);
}

}  // namespace

BENCHMARK(BM_HierarchizeReference)->Args({4, 3})->Args({4, 5})->Args({8, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HierarchizeFast)->Args({4, 3})->Args({4, 5})->Args({8, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InterpolateReference)->Args({4, 5})->Args({8, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InterpolateFast)->Args({4, 5})->Args({8, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TimeIterationStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
