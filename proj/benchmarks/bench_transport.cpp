#include <benchmark/benchmark.h>

#include "drflow/grid_measure.hpp"
#include "drflow/rng.hpp"
#include "drflow/wasserstein.hpp"

using namespace drflow;

namespace {

GridMeasure atoms_measure(std::size_t sites, std::size_t atoms, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    std::vector<double> w(sites, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < atoms; ++i) {
        const std::size_t j = rng.next_u32() % sites;
        const double m = 0.05 + rng.uniform();
        w[j] += m;
        total += m;
    }
    for (double& x : w) x /= total;
    return GridMeasure(1.0 / 64, std::move(w));
}

} // namespace

static void BM_ExactW(benchmark::State& state) {
    const auto atoms = static_cast<std::size_t>(state.range(0));
    const GridMeasure a = atoms_measure(4096, atoms, 11);
    const GridMeasure b = atoms_measure(4096, atoms, 12);
    TransportOptions opt;
    opt.want_plan = false;
    opt.want_dual = false;
    opt.support_cap = 1 << 16;
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_w(a, b, opt).value);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ExactW)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

static void BM_UpperW(benchmark::State& state) {
    const GridMeasure a = atoms_measure(8192, 1024, 13);
    const GridMeasure b = atoms_measure(8192, 1024, 14);
    for (auto _ : state) {
        benchmark::DoNotOptimize(upper_w(a, b));
    }
}
BENCHMARK(BM_UpperW);

static void BM_DualLb(benchmark::State& state) {
    const GridMeasure a = atoms_measure(2048, 256, 15);
    const GridMeasure b = atoms_measure(2048, 256, 16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dual_lb(a, b, 16));
    }
}
BENCHMARK(BM_DualLb);
