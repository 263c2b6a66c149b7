#pragma once

// Inhomogeneous transition semigroup P_{r,t} of the CDR process over a
// frozen flow: the linear (frozen-coefficient) marching
//   nu_{s+Delta} = [(1 - a Delta) nu_s + a Delta nu_s * mu_s^q] o T_Delta^{-1}
// plus the Chapman-Kolmogorov, contraction, entrance-law and
// forward/backward-equation checks.

#include <cstddef>
#include <span>
#include <vector>

#include "drflow/cdr_flow.hpp"
#include "drflow/grid_measure.hpp"

namespace drflow {

/// Evolves nu_r from time r to t through the frozen flow. Linear in
/// nu_r and mass conserving; the flow must cover [r, t] on its lattice.
GridMeasure transition(const MeasureFlow& flow, double r, double t, const GridMeasure& nu_r);

/// P_{r,t}(x, .) for one lattice start site.
GridMeasure transition_row(const MeasureFlow& flow, double r, double t, std::size_t start_site);

/// Kernel rows for a configured start-site set (full J x J kernels are
/// memory-prohibitive; every check in this module is per-row).
struct TransitionKernel {
    double r = 0.0;
    double t = 0.0;
    std::vector<std::size_t> start_sites;
    std::vector<GridMeasure> rows;
};
TransitionKernel compute_kernel(const MeasureFlow& flow, double r, double t,
                                std::span<const std::size_t> start_sites,
                                std::size_t workers = 1);

/// Geometric-ish default start sites: 0 plus sites spreading over (0, x_max].
std::vector<std::size_t> default_start_sites(const MeasureFlow& flow, std::size_t count = 64);

/// max over start sites of tv(P_{r,t}(x,.), P_{r,s} composed with P_{s,t}).
/// The composition evolves the intermediate measure P_{r,s}(x,.) through
/// [s, t], which mixes the full row family exactly by linearity, so the
/// residual is pure floating point.
double chapman_kolmogorov_residual(const MeasureFlow& flow, double r, double s, double t,
                                   std::span<const std::size_t> start_sites);

struct ContractionRow {
    std::size_t x_site = 0;
    std::size_t y_site = 0;
    double distance = 0.0;  // W(P_{r,t}(x,.), P_{r,t}(y,.))
    double bound = 0.0;     // e^{a(t-r)} rho(x,y) + slack
    bool pass = false;
};

/// Checks W(P_{r,t}(x,.), P_{r,t}(y,.)) <= e^{a(t-r)} rho(x,y) + slack
/// on the given start pairs; default slack 5*Delta.
std::vector<ContractionRow> contraction_check(
    const MeasureFlow& flow, double r, double t,
    std::span<const std::pair<std::size_t, std::size_t>> pairs, double slack = -1.0,
    std::size_t workers = 1);

/// Lattice function y -> P_{s,t} f (y) for every s on [r, t], computed by
/// the adjoint marching of f backwards from t. Index [k] holds s = r + k Delta.
std::vector<std::vector<double>> backward_function_flow(const MeasureFlow& flow, double r,
                                                        double t,
                                                        std::span<const double> f_lattice);

struct ForwardBackwardRow {
    std::string f_name;
    std::size_t x_site = 0;
    double forward_residual = 0.0;   // P_{r,t}f(x) = f(x) + int P_{r,s} A_s f(x) ds
    double backward_residual = 0.0;  // P_{r,t}f(x) = f(x) + int A_s P_{s,t} f(x) ds
};

struct ForwardBackwardReport {
    std::vector<ForwardBackwardRow> rows;
    double max_forward = 0.0;
    double max_backward = 0.0;
};

/// Evaluates both integral equations by lattice quadrature at the given
/// start sites; residuals are O(Delta).
ForwardBackwardReport forward_backward_residuals(const MeasureFlow& flow, double r, double t,
                                                 std::span<const NamedFunction> f_suite,
                                                 std::span<const std::size_t> x_sites);

/// Derivative commutation (P_{r,t} f)' = P_{r,t} f' for f with f'(0) = 0,
/// compared through lattice differences; returns the max deviation, O(h).
double derivative_commutation_residual(const MeasureFlow& flow, double r, double t,
                                       const NamedFunction& f,
                                       std::span<const std::size_t> x_sites);

} // namespace drflow
