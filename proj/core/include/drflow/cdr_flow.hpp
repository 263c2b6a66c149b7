#pragma once

// The continuous-time generalized CDR model
//   d/dt <mu_t, f> = a <mu_t * mu_t^q - mu_t, f> - <mu_t, f' 1_{(0,inf)}>
// solved two independent ways: lattice time-marching with time step
// Delta = h (which is exactly the rescaled discrete recursion with
// k = 1/Delta, so its O(Delta) accuracy is certified by the same rate
// theorem the scaling module verifies) and Picard iteration on the
// exponential-mild integral equation.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "drflow/grid_measure.hpp"

namespace drflow {

struct CdrModel {
    double a = 1.0;  // jump rate
    OffspringDistribution q = OffspringDistribution::from_weights({1.0});
    InitialMeasureSpec initial = InitialMeasureSpec::dirac(2.0);
    double h = 1.0 / 256.0;   // lattice step; the time step Delta equals h
    double x_max = 16.0;
    double horizon = 1.0;     // T
};

/// Frozen flow (mu_t : t in [0, T]) on the Delta-lattice, plus the
/// cached offspring mixtures mu_t^q and, on demand, per-slice quantile
/// tables for the path simulators.
class MeasureFlow {
public:
    const CdrModel& model() const { return model_; }
    double delta() const { return model_.h; }
    double horizon() const { return model_.horizon; }
    std::size_t slice_count() const { return slices_.size(); }

    const GridMeasure& slice(std::size_t i) const { return slices_[i]; }
    const GridMeasure& slice_at(double t) const { return slices_[index_of(t)]; }
    /// mu_{t_i}^q; shares storage with the slice when q_1 = 1.
    const GridMeasure& qmix(std::size_t i) const {
        return qmix_.empty() ? slices_[i] : qmix_[i];
    }

    /// Index of a time on the Delta-lattice; off-lattice times are rejected.
    std::size_t index_of(double t) const;
    /// Nearest slice for an arbitrary time in [0, T] (used by simulators).
    std::size_t nearest_index(double t) const;

    /// Exact right-continuous inverse of the CDF of mu_{t_i}^q,
    /// inf{ x_j : G(x_j) > u }, accelerated by the cached bracket table.
    double qmix_quantile(std::size_t i, double u) const;

    /// Builds the per-slice quantile tables (index brackets at the given
    /// resolution over u in [0,1) plus prefix CDFs). Idempotent and
    /// thread-safe; simulators call it once before fanning out.
    void ensure_quantile_tables(std::size_t resolution = std::size_t{1} << 16) const;

    /// Reassembles a flow from checkpointed slices.
    static MeasureFlow from_slices(const CdrModel& model, std::vector<GridMeasure> slices);

private:
    friend MeasureFlow march_solve(const CdrModel& model);

    CdrModel model_;
    std::vector<GridMeasure> slices_;
    std::vector<GridMeasure> qmix_;  // empty when q_1 = 1

    struct QuantileCache;
    mutable std::shared_ptr<const QuantileCache> quantiles_;
    mutable std::shared_ptr<std::once_flag> quantiles_once_ = std::make_shared<std::once_flag>();
};

/// Time-marching solution: slice_{i+1} = [(1 - a Delta) slice_i
/// + a Delta slice_i * slice_i^q] o T_Delta^{-1}. Every slice must keep
/// total mass within 1e-8 of 1, and overflow within budget, else abort.
MeasureFlow march_solve(const CdrModel& model);

/// Picard iterates mu^{(0)}, ..., mu^{(n_iter)} evaluated at time t,
/// returned raw (sub-probabilities; no renormalization). The time
/// integral uses the left-endpoint rule on the Delta-lattice.
std::vector<GridMeasure> picard_iterates(const CdrModel& model, double t, int n_iter);

/// The n_iter-th Picard iterate at t, renormalized at output.
GridMeasure picard_solve(const CdrModel& model, double t, int n_iter);

/// Tail of the Picard contraction series: 2 sum_{k>=n} a^k (m1+1)^k t^k / k!,
/// summed until terms fall below 1e-16 of the partial sum.
double picard_tail_bound(double a, double m1, double t, int n);

/// A_t f(x) = a int [f(x+z) - f(x)] mu_t^q(dz) - f'(x) 1_{x>0} with the
/// one-sided (backward) lattice difference for f'. x and t must be on
/// their lattices.
double apply_generator(const std::function<double(double)>& f, const MeasureFlow& flow,
                       double t, double x);

struct NamedFunction {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> fprime;  // used where an exact derivative helps
};

struct FormResidualRow {
    std::string f_name;
    double t;
    double differential_form;  // integral form of the differential equation
    double shift_mild_form;    // <mu_t,f> = <mu_0,T_t f> + a int <...>
    double exponential_form;   // e^{-at} variant
};

struct FormResidualReport {
    std::vector<FormResidualRow> rows;
    struct MassRow {
        double t;
        double residual;
    };
    std::vector<MassRow> mass_rows;  // generating-function mass equation
    double max_form_residual = 0.0;
    double max_mass_residual = 0.0;
};

/// Evaluates both sides of the three equivalent integral formulations on
/// a test-function suite by lattice quadrature (left-endpoint in time;
/// O(Delta) residuals expected). The mass equation uses exact
/// exponential cell weights, so its residual isolates the deviation of
/// <mu_s, 1> from 1.
FormResidualReport form_residuals(const MeasureFlow& flow,
                                  std::span<const NamedFunction> f_suite,
                                  std::span<const double> check_times);

/// Default bounded Lipschitz test suite used by the residual checks.
std::vector<NamedFunction> default_test_suite();

/// Flow checkpoint: header (a, Delta, h, J, K, T) followed by per-slice
/// binary measure dumps.
void write_flow_checkpoint(const MeasureFlow& flow, const std::filesystem::path& path);
MeasureFlow read_flow_checkpoint(const std::filesystem::path& path);

} // namespace drflow
