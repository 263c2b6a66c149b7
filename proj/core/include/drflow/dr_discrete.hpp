#pragma once

// Discrete-time generalized Derrida-Retaux dynamics
//   mu_{n+1} = [(1-alpha) mu_n + alpha mu_n * mu_n^q] o T_1^{-1}
// with renewal rate alpha and offspring distribution q, plus the
// free-energy proxy, sustainability probability and the phase scan over
// the initial delta_0 weight p.

#include <cstddef>
#include <span>
#include <vector>

#include "drflow/grid_measure.hpp"

namespace drflow {

struct DiscreteModel {
    double alpha = 1.0;
    OffspringDistribution q = OffspringDistribution::from_weights({1.0});
    InitialMeasureSpec initial = InitialMeasureSpec::dirac(2.0);
    double h = 1.0;
    double x_max = 64.0;
};

/// One step of the recursion mu -> [(1-w) mu + w mu * mu^q] o T_a^{-1}.
/// Shared by the discrete model (w = alpha, a = 1), the CDR march
/// (w = a*dt, a = dt) and the rescaled dynamics (w = a/k, a = 1/k).
GridMeasure recursion_step(const GridMeasure& mu, double weight,
                           const OffspringDistribution& q, double shift);

/// One DR step: convex combination, then the unit shift-truncation.
GridMeasure dr_step(const GridMeasure& mu, const DiscreteModel& model);

/// mu_0 .. mu_n with mu_0 = discretize(initial). Mass conservation is
/// enforced every step; an overflow breach aborts with the step index.
std::vector<GridMeasure> evolve(const DiscreteModel& model, std::size_t n);

/// (1 + alpha m_1)^{-n} * moment_1(mu_n) for each n. For the classical
/// model (alpha = q_1 = 1) this is exactly 2^{-n} int x mu_n(dx); for
/// general (alpha, q) the normalization is the supermartingale growth
/// factor of the first-moment recursion and the output is a heuristic.
std::vector<double> free_energy_proxy(std::span<const GridMeasure> trajectory,
                                      const DiscreteModel& model);

/// mu((0, infinity)): total mass minus the atom at the origin; overflow
/// counts as alive.
double sustainability(const GridMeasure& mu);

/// Replaces the delta_0 weight of a mixture spec.
InitialMeasureSpec with_origin_weight(const InitialMeasureSpec& theta, double p);

struct PhaseScanRow {
    double p;
    double proxy;           // free-energy proxy after n steps
    double sustainability;  // mu_n(0, infinity)
    double mass_at_zero;
    double moment1;
};

struct PhaseScanResult {
    std::vector<PhaseScanRow> rows;
    int n = 0;                // finite horizon used: the estimate is heuristic
    double epsilon_f = 1e-4;
    double p_c_estimate = 0.0;
    double bracket_lo = 0.0;  // proxy > epsilon_f here
    double bracket_hi = 0.0;  // proxy <= epsilon_f here
};

/// Evolves p delta_0 + (1-p) theta for n steps over the p grid, then
/// bisects the largest p whose proxy still exceeds epsilon_f. A finite-n
/// heuristic for p_c, labeled as such in the result.
PhaseScanResult phase_scan(const InitialMeasureSpec& theta, std::span<const double> p_grid,
                           int n, const DiscreteModel& model, double epsilon_f = 1e-4,
                           double bracket_tol = 1e-3, std::size_t workers = 1);

} // namespace drflow
