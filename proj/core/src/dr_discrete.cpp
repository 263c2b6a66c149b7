#include "drflow/dr_discrete.hpp"

#include <algorithm>
#include <cmath>

#include "drflow/parallel.hpp"

namespace drflow {

GridMeasure recursion_step(const GridMeasure& mu, double weight,
                           const OffspringDistribution& q, double shift) {
    if (weight < 0.0 || weight > 1.0) throw grid_error("recursion weight must lie in [0,1]");
    GridMeasure mixed = weight == 0.0
                            ? mu
                            : mix(1.0 - weight, mu, weight, convolve(mu, q_mixture(mu, q)));
    GridMeasure out = pushforward_shift(mixed, shift);
    if (out.overflow() > kOverflowBudget) {
        throw tail_overflow_error("recursion step pushed " + std::to_string(out.overflow()) +
                                  " mass past x_max");
    }
    return out;
}

GridMeasure dr_step(const GridMeasure& mu, const DiscreteModel& model) {
    if (!mu.normalized()) throw grid_error("dr_step requires a normalized measure");
    return recursion_step(mu, model.alpha, model.q, 1.0);
}

std::vector<GridMeasure> evolve(const DiscreteModel& model, std::size_t n) {
    std::vector<GridMeasure> out;
    out.reserve(n + 1);
    out.push_back(discretize(model.initial, model.h, model.x_max));
    for (std::size_t i = 0; i < n; ++i) {
        const double before = out.back().total_mass();
        try {
            out.push_back(dr_step(out.back(), model));
        } catch (const tail_overflow_error& e) {
            throw tail_overflow_error(std::string(e.what()) + " at step " + std::to_string(i + 1),
                                      static_cast<long>(i + 1));
        }
        const double after = out.back().total_mass();
        if (std::abs(after - before) > kMassTolerance) {
            throw numeric_error("dr_step lost mass at step " + std::to_string(i + 1) + ": " +
                                std::to_string(after - before));
        }
    }
    return out;
}

std::vector<double> free_energy_proxy(std::span<const GridMeasure> trajectory,
                                      const DiscreteModel& model) {
    if (trajectory.empty()) throw grid_error("free_energy_proxy needs a nonempty trajectory");
    const double growth = 1.0 + model.alpha * model.q.m1();
    std::vector<double> out;
    out.reserve(trajectory.size());
    double norm = 1.0;
    for (const GridMeasure& mu : trajectory) {
        out.push_back(moment(mu, 1) / norm);
        norm *= growth;
    }
    return out;
}

double sustainability(const GridMeasure& mu) {
    if (!mu.normalized()) throw grid_error("sustainability requires a normalized measure");
    return mu.total_mass() - mu.mass_at(0);
}

InitialMeasureSpec with_origin_weight(const InitialMeasureSpec& theta, double p) {
    InitialMeasureSpec spec = theta;
    switch (theta.kind) {
    case InitialMeasureSpec::Kind::dirac:
        spec = InitialMeasureSpec::two_atom(p, theta.x0);
        break;
    case InitialMeasureSpec::Kind::two_atom:
    case InitialMeasureSpec::Kind::exponential_mixture:
    case InitialMeasureSpec::Kind::lattice_law:
        spec.p = p;
        break;
    }
    return spec;
}

namespace {

PhaseScanRow scan_one(double p, const InitialMeasureSpec& theta, int n,
                      const DiscreteModel& model) {
    DiscreteModel m = model;
    m.initial = with_origin_weight(theta, p);
    const auto trajectory = evolve(m, static_cast<std::size_t>(n));
    const auto proxy = free_energy_proxy(trajectory, m);
    const GridMeasure& last = trajectory.back();
    return {p, proxy.back(), sustainability(last), last.mass_at(0), moment(last, 1)};
}

} // namespace

PhaseScanResult phase_scan(const InitialMeasureSpec& theta, std::span<const double> p_grid,
                           int n, const DiscreteModel& model, double epsilon_f,
                           double bracket_tol, std::size_t workers) {
    for (double p : p_grid) {
        if (p < 0.0 || p > 1.0) throw grid_error("phase_scan: p grid must lie in [0,1]");
    }
    PhaseScanResult result;
    result.n = n;
    result.epsilon_f = epsilon_f;
    result.rows.resize(p_grid.size());
    parallel_for(p_grid.size(), workers, [&](std::size_t i) {
        result.rows[i] = scan_one(p_grid[i], theta, n, model);
    });
    std::sort(result.rows.begin(), result.rows.end(),
              [](const PhaseScanRow& a, const PhaseScanRow& b) { return a.p < b.p; });

    // bracket the proxy threshold crossing, then bisect
    double lo = -1.0, hi = -1.0;
    for (const PhaseScanRow& row : result.rows) {
        if (row.proxy > epsilon_f) {
            lo = row.p;
        } else if (hi < 0.0) {
            hi = row.p;
        }
    }
    if (lo < 0.0) {  // already dead at the smallest p
        result.p_c_estimate = result.bracket_lo = result.bracket_hi =
            result.rows.empty() ? 0.0 : result.rows.front().p;
        return result;
    }
    if (hi < 0.0) {  // alive across the whole grid
        result.p_c_estimate = result.bracket_lo = result.bracket_hi = result.rows.back().p;
        return result;
    }
    while (hi - lo > bracket_tol) {
        const double mid = 0.5 * (lo + hi);
        if (scan_one(mid, theta, n, model).proxy > epsilon_f) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    result.bracket_lo = lo;
    result.bracket_hi = hi;
    result.p_c_estimate = 0.5 * (lo + hi);
    return result;
}

} // namespace drflow
