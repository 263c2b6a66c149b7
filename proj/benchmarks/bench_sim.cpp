#include <benchmark/benchmark.h>

#include "drflow/mc_sim.hpp"

using namespace drflow;

namespace {

const MeasureFlow& shared_flow() {
    static const MeasureFlow flow = [] {
        CdrModel model;
        model.a = 1.0;
        model.q = OffspringDistribution::from_weights({1.0});
        model.initial = InitialMeasureSpec::dirac(2.0);
        model.h = 1.0 / 128;
        model.x_max = 16.0;
        model.horizon = 1.0;
        MeasureFlow f = march_solve(model);
        f.ensure_quantile_tables();
        return f;
    }();
    return flow;
}

} // namespace

static void BM_MarchSolve(benchmark::State& state) {
    CdrModel model;
    model.a = 1.0;
    model.q = OffspringDistribution::from_weights({1.0});
    model.initial = InitialMeasureSpec::dirac(2.0);
    model.h = 1.0 / static_cast<double>(state.range(0));
    model.x_max = 16.0;
    model.horizon = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(march_solve(model));
    }
}
BENCHMARK(BM_MarchSolve)->Arg(64)->Arg(128)->Arg(256);

static void BM_SimulatePaths(benchmark::State& state) {
    const MeasureFlow& flow = shared_flow();
    const auto paths = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_cdr_ensemble(flow, paths, ++seed, 1));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulatePaths)->Arg(1000)->Arg(10000);

static void BM_QuantileLookup(benchmark::State& state) {
    const MeasureFlow& flow = shared_flow();
    CounterRng rng(1, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(flow.qmix_quantile(64, rng.uniform_open()));
    }
}
BENCHMARK(BM_QuantileLookup);

BENCHMARK_MAIN();
