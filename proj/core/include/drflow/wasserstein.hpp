#pragma once

// Truncated rho-Wasserstein distance W(mu, nu) with cost
// rho(x, y) = 1 /\ |x - y| on grid measures.
//
// exact_w solves the transportation problem exactly. The cost is concave,
// so the monotone (quantile) coupling is not guaranteed optimal; it is
// demoted to upper_w. Exactness comes from a min-cost flow after common
// mass is removed in place at zero cost: on the lattice, rho equals the
// shortest-path distance in the graph with adjacent-site edges of cost h
// plus a single "teleport" hub reachable from every site at cost 1/2, so
// the reduced problem is an uncapacitated min-cost flow on that graph,
// solved by successive shortest paths with Dijkstra potentials.

#include <cstdint>
#include <optional>
#include <vector>

#include "drflow/grid_measure.hpp"

namespace drflow {

struct PlanEntry {
    std::size_t source_site;
    std::size_t target_site;
    double mass;
};

struct TransportResult {
    double value = 0.0;
    /// Sparse optimal plan on the reduced residuals (common mass omitted).
    std::vector<PlanEntry> plan;
    /// Kantorovich potential f per lattice site with ||f||_inf <= 1 and
    /// ||f||_rho <= 1 and <mu - nu, f> = value; empty when not requested.
    std::vector<double> dual_potentials;
};

struct TransportOptions {
    /// Residual support cap (source sites + sink sites after common-mass
    /// removal). Exceeding it raises support_cap_error: use upper_w or
    /// coarsen first.
    std::size_t support_cap = 4096;
    bool want_plan = true;
    bool want_dual = true;
};

/// Exact optimum of the transportation problem. Requires equal steps,
/// near-equal total masses (mismatch above 1e-9 is rejected) and a
/// residual support within the cap. Overflow mass is treated as sitting
/// at x_max.
TransportResult exact_w(const GridMeasure& mu, const GridMeasure& nu,
                        const TransportOptions& options = {});

/// Comonotone coupling of the residuals after common-mass removal.
/// Guaranteed >= the exact value and <= 1.
double upper_w(const GridMeasure& mu, const GridMeasure& nu);

/// Best lower bound from randomly generated functions with
/// ||f||_inf <= 1, ||f||_rho <= 1, plus the dual certificate of exact_w
/// when the support cap allows one. Deterministic for a fixed seed.
double dual_lb(const GridMeasure& mu, const GridMeasure& nu, int trials,
               std::uint64_t seed = 0x5eed5eedULL);

/// exact_w with a coarsening fallback: when the residual support exceeds
/// the cap, both measures are aggregated by the smallest factor that
/// fits and the added error bound (one coarse cell per coarsening) is
/// reported.
struct ApproxTransport {
    double value = 0.0;
    double extra_error = 0.0;  // additional uncertainty from coarsening
    std::size_t coarsen_factor = 1;
};
ApproxTransport exact_w_coarsened(const GridMeasure& mu, const GridMeasure& nu,
                                  const TransportOptions& options = {});

} // namespace drflow
