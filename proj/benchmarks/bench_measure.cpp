#include <benchmark/benchmark.h>

#include "drflow/dr_discrete.hpp"
#include "drflow/grid_measure.hpp"
#include "drflow/rng.hpp"

using namespace drflow;

namespace {

GridMeasure dense_measure(std::size_t sites, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    std::vector<double> w(sites);
    double total = 0.0;
    for (double& x : w) {
        x = rng.uniform();
        total += x;
    }
    for (double& x : w) x /= total;
    return GridMeasure(1.0 / 256, std::move(w));
}

} // namespace

static void BM_Convolve(benchmark::State& state) {
    const auto sites = static_cast<std::size_t>(state.range(0));
    const GridMeasure a = dense_measure(sites, 1);
    const GridMeasure b = dense_measure(sites, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(convolve(a, b));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Convolve)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

static void BM_ConvolveSparse(benchmark::State& state) {
    std::vector<double> w(16384, 0.0);
    w[512] = 1.0;
    const GridMeasure atom(1.0 / 256, std::move(w));
    for (auto _ : state) {
        benchmark::DoNotOptimize(convolve(atom, atom));
    }
}
BENCHMARK(BM_ConvolveSparse);

static void BM_DrStep(benchmark::State& state) {
    DiscreteModel model;
    model.alpha = 0.5;
    model.q = OffspringDistribution::from_weights({0.5, 0.5});
    model.h = 1.0 / 256;
    const GridMeasure mu = dense_measure(static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dr_step(mu, model));
    }
}
BENCHMARK(BM_DrStep)->Arg(2048)->Arg(8192);

static void BM_Quantile(benchmark::State& state) {
    const GridMeasure mu = dense_measure(8192, 4);
    CounterRng rng(9, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(quantile(mu, rng.uniform_open()));
    }
}
BENCHMARK(BM_Quantile);
