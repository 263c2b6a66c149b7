#pragma once

// Pathwise Monte Carlo simulators driven by the frozen deterministic
// flows (the quantiles are of the model law, not the empirical law):
//   discrete   X_{n+1} = (X_n + eta_n G_n^{-1}(U_n) - 1)_+
//   continuous X_t = X_0 + int int G_s^{-1}(u) N(ds,du) - int 1_{X_s>0} ds
// The continuous simulator is event-driven: exponential inter-jump
// clocks, exact unit-rate drift with absorption at 0, jump sizes drawn
// from the nearest stored slice's mu^q quantile. Paths own counter-based
// RNG streams, so ensembles are bitwise reproducible and parallel-safe.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drflow/cdr_flow.hpp"
#include "drflow/dr_discrete.hpp"
#include "drflow/grid_measure.hpp"
#include "drflow/rng.hpp"

namespace drflow {

struct DiscretePathEnsemble {
    std::size_t n_steps = 0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double h = 1.0;
    std::vector<double> states;  // path-major: states[p * (n_steps + 1) + i]

    double state(std::size_t path, std::size_t step) const {
        return states[path * (n_steps + 1) + step];
    }
};

/// Simulates the discrete recursion against the precomputed law
/// trajectory mu_0..mu_{n-1} (from dr_discrete::evolve, which must cover
/// at least n slices).
DiscretePathEnsemble simulate_discrete(const DiscreteModel& model,
                                       std::span<const GridMeasure> law_flow, std::size_t n,
                                       std::size_t n_paths, std::uint64_t seed,
                                       std::size_t workers = 1);

struct JumpEvent {
    double time;
    double size;
};

struct ContinuousPath {
    double x0 = 0.0;
    std::vector<JumpEvent> jumps;  // increasing times
};

struct ContinuousPathEnsemble {
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::vector<ContinuousPath> paths;
};

/// State of an event-driven path at time t: unit-rate decay between
/// jumps, absorbed at zero until the next jump.
double continuous_state(const ContinuousPath& path, double t);

/// One event-driven path; consumes the given stream.
ContinuousPath simulate_cdr_path(const MeasureFlow& flow, double x0, double horizon,
                                 CounterRng& rng);

/// Ensemble of event-driven paths. x0_fixed draws every path from that
/// point; otherwise X_0 is drawn from the flow's initial slice.
ContinuousPathEnsemble simulate_cdr_ensemble(const MeasureFlow& flow, std::size_t n_paths,
                                             std::uint64_t seed, std::size_t workers = 1,
                                             std::optional<double> x0_fixed = std::nullopt);

/// Lattice-binned histogram of the ensemble states at one checkpoint.
GridMeasure empirical_measure(const DiscretePathEnsemble& ensemble, std::size_t step,
                              double h);
GridMeasure empirical_measure(const ContinuousPathEnsemble& ensemble, double t, double h);

struct MartingaleRow {
    std::string f_name;
    double time = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;
    bool flagged = false;  // |mean| > 3 stderr
};

struct CorrelationRow {
    std::string f_name;
    double t = 0.0;
    double s = 0.0;
    double correlation = 0.0;
    double threshold = 0.0;  // 3 / sqrt(N)
    bool flagged = false;
};

struct MartingaleReport {
    std::vector<MartingaleRow> rows;
    std::vector<CorrelationRow> corr_rows;

    bool any_flagged() const {
        for (const auto& r : rows)
            if (r.flagged) return true;
        for (const auto& r : corr_rows)
            if (r.flagged) return true;
        return false;
    }
};

/// Residuals M_t(f) = f(X_t) - f(X_0) - int_0^t A_s f(X_s) ds per path.
/// The drift part of the compensator cancels against f(X_t) - f(X_0)
/// pathwise, so only the jump part needs quadrature (per-cell trapezoid
/// on the Delta-lattice). Also checks that increments M_t - M_s are
/// uncorrelated with a bounded functional of the path up to s = t/2.
MartingaleReport martingale_residual(const ContinuousPathEnsemble& ensemble,
                                     const MeasureFlow& flow,
                                     std::span<const NamedFunction> f_suite,
                                     std::span<const double> t_list, std::size_t workers = 1);

/// Discrete analogue with the exact one-step compensator
///   A_n f(x) = alpha int [f((x+y-1)_+) - f(x)] mu_n^q(dy)
///            + (1-alpha) [f((x-1)_+) - f(x)].
MartingaleReport martingale_residual_discrete(const DiscretePathEnsemble& ensemble,
                                              const DiscreteModel& model,
                                              std::span<const GridMeasure> law_flow,
                                              std::span<const NamedFunction> f_suite,
                                              std::span<const std::size_t> n_list);

} // namespace drflow
