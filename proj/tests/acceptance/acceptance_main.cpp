// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any fails. Every tolerance is pinned here, in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "drflow/dr_discrete.hpp"
#include "drflow/mc_sim.hpp"
#include "drflow/scaling.hpp"
#include "drflow/semigroup.hpp"
#include "drflow/wasserstein.hpp"
#include "test_util.hpp"
#include "transport_oracle.hpp"

using namespace drflow;

namespace {

struct Runner {
    int failures = 0;

    void run(const std::string& name, const std::function<bool(std::string&)>& fn) {
        std::string detail;
        bool ok = false;
        const auto start = std::chrono::steady_clock::now();
        try {
            ok = fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), secs,
                    detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

OffspringDistribution classical_q() { return OffspringDistribution::from_weights({1.0}); }

// ---------------------------------------------------------------------------
// 1. closed-form Dirac dynamics of the classical model
bool criterion1(std::string& detail) {
    DiscreteModel model;
    model.alpha = 1.0;
    model.q = classical_q();
    model.initial = InitialMeasureSpec::dirac(2.0);
    model.h = 1.0;
    model.x_max = static_cast<double>((1u << 20) + 2u);

    const auto trajectory = evolve(model, 20);
    const auto proxy = free_energy_proxy(trajectory, model);
    for (std::size_t n = 0; n <= 20; ++n) {
        const auto site = static_cast<std::size_t>((1ull << n) + 1ull);
        if (trajectory[n].mass_at(site) != 1.0) {
            detail = "atom misplaced at n=" + std::to_string(n);
            return false;
        }
        const double expected = 1.0 + std::pow(2.0, -static_cast<double>(n));
        if (std::abs(proxy[n] - expected) > 1e-12) {
            detail = "proxy off at n=" + std::to_string(n);
            return false;
        }
    }

    DiscreteModel fixed = model;
    fixed.initial = InitialMeasureSpec::dirac(1.0);
    fixed.x_max = 16.0;
    for (const auto& mu : evolve(fixed, 20)) {
        if (mu.mass_at(1) != 1.0) {
            detail = "delta_1 is not a fixed point";
            return false;
        }
    }
    detail = "x_n = 2^n + 1 exact through n = 20";
    return true;
}

// ---------------------------------------------------------------------------
// 2. mass conservation at scale: a = 1, T = 2, Delta = h = 2^-8, J = 2^14
bool criterion2(std::string& detail) {
    CdrModel model;
    model.a = 1.0;
    model.q = classical_q();
    model.initial = InitialMeasureSpec::exponential_mixture(0.2, 1.0);
    model.h = 1.0 / 256.0;
    model.x_max = 64.0;  // J = 2^14
    model.horizon = 2.0;

    const MeasureFlow flow = march_solve(model);
    double worst = 0.0;
    for (std::size_t i = 0; i < flow.slice_count(); ++i) {
        worst = std::max(worst, std::abs(flow.slice(i).total_mass() - 1.0));
    }
    if (worst > 1e-8) {
        detail = "flow drift " + std::to_string(worst);
        return false;
    }

    DiscreteModel dm;
    dm.alpha = 0.5;
    dm.q = classical_q();
    dm.initial = InitialMeasureSpec::two_atom(0.55, 2.0);
    dm.h = 1.0;
    dm.x_max = 4096.0;
    const auto trajectory = evolve(dm, 50);
    double worst_d = 0.0;
    for (const auto& mu : trajectory) {
        worst_d = std::max(worst_d, std::abs(mu.total_mass() - 1.0));
    }
    if (worst_d > 1e-8) {
        detail = "discrete drift " + std::to_string(worst_d);
        return false;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max |mass-1|: flow %.2e, discrete %.2e", worst, worst_d);
    detail = buf;
    return true;
}

// ---------------------------------------------------------------------------
// 3. per-step moment recursions on 50 randomized models
bool criterion3(std::string& detail) {
    CounterRng rng(3001, 0);
    for (int trial = 0; trial < 50; ++trial) {
        DiscreteModel model;
        model.alpha = rng.uniform();
        model.q = testing::random_offspring(rng, 4);
        const double kind = rng.uniform();
        if (kind < 0.5) {
            model.initial = InitialMeasureSpec::two_atom(0.5 * rng.uniform(),
                                                         0.5 + 2.5 * rng.uniform());
        } else {
            model.initial =
                InitialMeasureSpec::exponential_mixture(0.5 * rng.uniform(),
                                                        1.0 + 2.0 * rng.uniform());
        }
        model.h = 0.25;
        model.x_max = 96.0;
        const auto trajectory = evolve(model, 3);
        const double g1 = 1.0 + model.alpha * model.q.m1();
        const double g2 = 1.0 + 2.0 * model.alpha * model.q.m1() + model.alpha * model.q.m2();
        for (std::size_t n = 0; n + 1 < trajectory.size(); ++n) {
            if (moment(trajectory[n + 1], 1) > g1 * moment(trajectory[n], 1) + 1e-8) {
                detail = "first-moment bound broke on trial " + std::to_string(trial);
                return false;
            }
            if (moment(trajectory[n + 1], 2) > g2 * moment(trajectory[n], 2) + 1e-8) {
                detail = "second-moment bound broke on trial " + std::to_string(trial);
                return false;
            }
        }
    }
    detail = "50 random (alpha, q, mu_0) models, 3 steps each";
    return true;
}

// ---------------------------------------------------------------------------
// 4. Picard tail bound and cross-method agreement
bool criterion4(std::string& detail) {
    CdrModel model;
    model.a = 1.0;
    model.q = classical_q();  // m1 = 1
    model.initial = InitialMeasureSpec::dirac(2.0);
    model.h = 1.0 / 256.0;
    model.x_max = 16.0;
    model.horizon = 0.5;
    const double t = 0.5;

    const auto iterates = picard_iterates(model, t, 11);
    for (int n = 1; n <= 10; ++n) {
        const double tv = tv_distance(iterates[static_cast<std::size_t>(n)],
                                      iterates[static_cast<std::size_t>(n) + 1]);
        const double bound = picard_tail_bound(model.a, model.q.m1(), t, n);
        if (tv > bound + 5.0 * model.h) {
            detail = "tv " + std::to_string(tv) + " > tail bound at n = " + std::to_string(n);
            return false;
        }
    }

    // independent series oracle for the n = 5 value
    long double tail = 0.0L, term = 1.0L / 120.0L;
    for (int k = 5; k < 64; ++k) {
        tail += term;
        term /= static_cast<long double>(k + 1);
    }
    const double n5 = picard_tail_bound(1.0, 1.0, 0.5, 5);
    if (std::abs(n5 - static_cast<double>(2.0L * tail)) > 1e-12 ||
        std::abs(n5 - 0.0198969902514) > 1e-10) {
        detail = "n = 5 tail bound evaluates to " + std::to_string(n5);
        return false;
    }

    const GridMeasure via_picard = picard_solve(model, t, 12);
    const MeasureFlow flow = march_solve(model);
    TransportOptions opt;
    opt.want_plan = false;
    opt.want_dual = false;
    opt.support_cap = 1 << 16;
    const double w = exact_w(via_picard, flow.slice_at(t), opt).value;
    const double budget = 5.0 * (model.h + picard_tail_bound(model.a, model.q.m1(), t, 12));
    if (w > budget) {
        detail = "cross-method W " + std::to_string(w) + " > " + std::to_string(budget);
        return false;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "tail(5) = %.6f, cross-method W = %.2e <= %.2e", n5, w,
                  budget);
    detail = buf;
    return true;
}

// ---------------------------------------------------------------------------
// 5. Gronwall stability on 20 random initial pairs
bool criterion5(std::string& detail) {
    CounterRng rng(5005, 0);
    CdrModel base;
    base.a = 1.0;
    base.q = classical_q();
    base.h = 1.0 / 128.0;
    base.x_max = 24.0;
    base.horizon = 1.0;
    TransportOptions opt;
    opt.want_plan = false;
    opt.want_dual = false;
    opt.support_cap = 1 << 16;

    for (int pair = 0; pair < 20; ++pair) {
        CdrModel ma = base, mb = base;
        ma.initial = InitialMeasureSpec::two_atom(0.6 * rng.uniform(),
                                                  0.5 + 3.0 * rng.uniform());
        if (rng.uniform() < 0.5) {
            mb.initial = InitialMeasureSpec::two_atom(0.6 * rng.uniform(),
                                                      0.5 + 3.0 * rng.uniform());
        } else {
            mb.initial = InitialMeasureSpec::exponential_mixture(0.4 * rng.uniform(), 1.5);
        }
        const MeasureFlow fa = march_solve(ma);
        const MeasureFlow fb = march_solve(mb);
        const double w0 = exact_w(fa.slice(0), fb.slice(0), opt).value;
        for (double t : {0.5, 1.0}) {
            const double wt = exact_w(fa.slice_at(t), fb.slice_at(t), opt).value;
            const double bound = std::exp(base.a * base.q.m1() * t) * w0 + 5.0 * base.h;
            if (wt > bound) {
                char buf[160];
                std::snprintf(buf, sizeof(buf), "pair %d, t=%.1f: W=%.5f > e^{am1 t} W0 + 5D = %.5f",
                              pair, t, wt, bound);
                detail = buf;
                return false;
            }
        }
    }
    detail = "W(mu_t, gamma_t) <= e^{a m1 t} W0 + 5 Delta on 20 pairs, t in {0.5, 1}";
    return true;
}

// ---------------------------------------------------------------------------
// 6. scaling rate theorem
bool criterion6(std::string& detail) {
    CdrModel model;
    model.a = 1.0;
    model.q = classical_q();
    model.initial = InitialMeasureSpec::dirac(2.0);
    model.h = 1.0 / 512.0;
    model.x_max = 24.0;
    model.horizon = 1.0;

    const MeasureFlow flow = march_solve(model);
    const std::vector<std::size_t> ks{16, 64, 256};
    const std::vector<double> ts{0.5, 1.0};
    TransportOptions opt;
    opt.support_cap = 1 << 17;
    const ScalingReport report = verify_rate(model, ks, ts, flow, opt, 4);

    if (report.w0 > 1e-12) {
        detail = "gamma_0 != mu_0";
        return false;
    }
    for (const auto& row : report.rows) {
        if (!row.pass) {
            detail = "bound failed at k=" + std::to_string(row.k) + " t=" + std::to_string(row.t);
            return false;
        }
    }
    if (!report.monotone_in_k) {
        detail = "measured W not strictly decreasing in k";
        return false;
    }
    for (const auto& fit : report.slopes) {
        if (!fit.in_band) {
            detail = "slope " + std::to_string(fit.slope) + " at t=" + std::to_string(fit.t) +
                     " outside [0.5, 1.5]";
            return false;
        }
    }
    std::size_t vacuous = 0;
    for (const auto& row : report.rows) vacuous += row.vacuous ? 1 : 0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu rows (%zu vacuous), slopes:", report.rows.size(),
                  vacuous);
    detail = buf;
    for (const auto& fit : report.slopes) {
        detail += " " + std::to_string(fit.slope).substr(0, 5);
    }
    return true;
}

// ---------------------------------------------------------------------------
// 7. Wasserstein engine against the dense LP oracle
bool criterion7(std::string& detail) {
    CounterRng rng(7007, 0);
    const double h = 1.0 / 8.0;

    double worst_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const GridMeasure a = testing::random_measure(rng, h, 64, 30);
        const GridMeasure b = testing::random_measure(rng, h, 64, 30);
        const TransportResult res = exact_w(a, b);

        std::vector<double> xs, ms, ys, mbs;
        testing::to_atoms(a, xs, ms);
        testing::to_atoms(b, ys, mbs);
        const double lp = testing::lp_transport_value(xs, ms, ys, mbs);
        worst_gap = std::max(worst_gap, std::abs(res.value - lp));
        if (std::abs(res.value - lp) > 1e-9) {
            detail = "LP oracle mismatch " + std::to_string(res.value - lp);
            return false;
        }

        const double upper = upper_w(a, b);
        const double lower = dual_lb(a, b, 16);
        if (lower > res.value + 1e-9 || res.value > upper + 1e-12 || res.value < 0.0 ||
            res.value > 1.0) {
            detail = "sandwich dual_lb <= exact <= upper_w broke";
            return false;
        }
    }

    for (int trial = 0; trial < 200; ++trial) {
        const GridMeasure a = testing::random_measure(rng, h, 40, 12);
        const GridMeasure b = testing::random_measure(rng, h, 40, 12);
        const GridMeasure c = testing::random_measure(rng, h, 40, 12);
        const GridMeasure d = testing::random_measure(rng, h, 40, 12);
        const double ab = exact_w(a, b).value;
        if (std::abs(ab - exact_w(b, a).value) > 1e-9) {
            detail = "symmetry broke";
            return false;
        }
        if (ab > exact_w(a, c).value + exact_w(c, b).value + 1e-9) {
            detail = "triangle inequality broke";
            return false;
        }
        if (exact_w(convolve(a, c), convolve(b, d)).value >
            ab + exact_w(c, d).value + 1e-9) {
            detail = "convolution subadditivity broke";
            return false;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "200 LP comparisons (worst gap %.1e), 200 axiom tuples",
                  worst_gap);
    detail = buf;
    return true;
}

// ---------------------------------------------------------------------------
// 8. semigroup: Chapman-Kolmogorov, entrance law, contraction, forward/backward
bool criterion8(std::string& detail) {
    CdrModel model;
    model.a = 1.0;
    model.q = classical_q();
    model.initial = InitialMeasureSpec::two_atom(0.3, 2.0);
    model.h = 1.0 / 64.0;
    model.x_max = 16.0;
    model.horizon = 1.0;
    const MeasureFlow flow = march_solve(model);

    const auto starts = default_start_sites(flow, 16);
    const double ck = chapman_kolmogorov_residual(flow, 0.0, 0.5, 1.0, starts);
    if (ck > 1e-8) {
        detail = "CK residual " + std::to_string(ck);
        return false;
    }

    const GridMeasure entrance = transition(flow, 0.0, 1.0, flow.slice(0));
    const double etv = tv_distance(entrance, flow.slice_at(1.0));
    if (etv > 1e-8) {
        detail = "entrance-law tv " + std::to_string(etv);
        return false;
    }

    CounterRng rng(8008, 0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t sites = flow.slice(0).sites();
    for (int i = 0; i < 32; ++i) {
        pairs.emplace_back(rng.next_u32() % (sites / 2), rng.next_u32() % (sites / 2));
    }
    for (const auto& row : contraction_check(flow, 0.0, 1.0, pairs, -1.0, 4)) {
        if (!row.pass) {
            detail = "contraction broke at sites " + std::to_string(row.x_site) + "," +
                     std::to_string(row.y_site);
            return false;
        }
    }

    // forward/backward residuals halve when Delta halves (within 30%)
    const auto suite = default_test_suite();
    const std::vector<std::size_t> xs{0, 32, 128, 320};
    const auto coarse = forward_backward_residuals(flow, 0.0, 0.5, suite, xs);
    CdrModel fine_model = model;
    fine_model.h = 1.0 / 128.0;
    const MeasureFlow fine_flow = march_solve(fine_model);
    const std::vector<std::size_t> xs_fine{0, 64, 256, 640};
    const auto fine = forward_backward_residuals(fine_flow, 0.0, 0.5, suite, xs_fine);
    const double rf = coarse.max_forward / fine.max_forward;
    const double rb = coarse.max_backward / fine.max_backward;
    if (rf < 1.4 || rf > 2.6 || rb < 1.4 || rb > 2.6) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "halving ratios fwd %.2f bwd %.2f outside [1.4, 2.6]",
                      rf, rb);
        detail = buf;
        return false;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "CK %.1e, entrance %.1e, halving fwd %.2f bwd %.2f", ck,
                  etv, rf, rb);
    detail = buf;
    return true;
}

// ---------------------------------------------------------------------------
// 9. simulators against solvers + moment envelopes + reproducibility
bool criterion9(std::string& detail) {
    const std::size_t n_paths = 100000;
    const double stat = 4.0 / std::sqrt(static_cast<double>(n_paths));

    // discrete: empirical marginal vs deterministic law at n in {10, 50}
    DiscreteModel dm;
    dm.alpha = 0.5;
    dm.q = classical_q();
    dm.initial = InitialMeasureSpec::two_atom(0.55, 2.0);
    dm.h = 1.0;
    dm.x_max = 4096.0;
    const auto law = evolve(dm, 50);
    const auto ensemble = simulate_discrete(dm, law, 50, n_paths, 424242, 4);
    for (std::size_t n : {std::size_t{10}, std::size_t{50}}) {
        const double tv = tv_distance(empirical_measure(ensemble, n, 1.0), law[n]);
        if (tv > stat) {
            detail = "discrete tv " + std::to_string(tv) + " at n = " + std::to_string(n);
            return false;
        }
    }

    // bitwise reproducibility, independent of scheduling
    const auto replay = simulate_discrete(dm, law, 50, n_paths, 424242, 2);
    if (replay.states != ensemble.states) {
        detail = "discrete ensemble not bitwise reproducible";
        return false;
    }

    // continuous: event-driven ensemble vs flow slices
    CdrModel cm;
    cm.a = 1.0;
    cm.q = classical_q();
    cm.initial = InitialMeasureSpec::exponential_mixture(0.3, 1.0);
    cm.h = 1.0 / 256.0;
    cm.x_max = 32.0;
    cm.horizon = 1.0;
    const MeasureFlow flow = march_solve(cm);
    const auto paths = simulate_cdr_ensemble(flow, n_paths, 777777, 4);
    for (double t : {0.5, 1.0}) {
        const double w = upper_w(empirical_measure(paths, t, cm.h), flow.slice_at(t));
        const double budget = 0.02 + 2.0 * cm.h + flow.delta();
        if (w > budget) {
            detail = "continuous marginal W " + std::to_string(w) + " at t = " +
                     std::to_string(t);
            return false;
        }
    }
    const auto paths2 = simulate_cdr_ensemble(flow, 1000, 777777, 1);
    for (std::size_t p = 0; p < paths2.paths.size(); ++p) {
        if (paths2.paths[p].x0 != paths.paths[p].x0 ||
            paths2.paths[p].jumps.size() != paths.paths[p].jumps.size()) {
            detail = "continuous ensemble not reproducible";
            return false;
        }
    }

    // process moment bounds on both ensembles, 3-stderr allowance
    for (double t : {0.5, 1.0}) {
        std::vector<double> xs(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) {
            xs[p] = continuous_state(paths.paths[p], t);
        }
        double m0 = 0.0, m0sq = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double x0 = paths.paths[p].x0;
            m0 += x0;
            m0sq += x0 * x0;
        }
        m0 /= static_cast<double>(n_paths);
        m0sq /= static_cast<double>(n_paths);
        double m1 = 0.0, m2 = 0.0;
        for (double x : xs) {
            m1 += x;
            m2 += x * x;
        }
        m1 /= static_cast<double>(n_paths);
        m2 /= static_cast<double>(n_paths);
        double v1 = 0.0, v2 = 0.0;
        for (double x : xs) {
            v1 += (x - m1) * (x - m1);
            v2 += (x * x - m2) * (x * x - m2);
        }
        const double se1 = std::sqrt(v1 / static_cast<double>(n_paths - 1) /
                                     static_cast<double>(n_paths));
        const double se2 = std::sqrt(v2 / static_cast<double>(n_paths - 1) /
                                     static_cast<double>(n_paths));
        const double q_m1 = cm.q.m1(), q_m2 = cm.q.m2();
        if (m1 > std::exp(cm.a * q_m1 * t) * m0 + 3.0 * se1) {
            detail = "first-moment envelope broke at t = " + std::to_string(t);
            return false;
        }
        if (m2 > std::exp(cm.a * (2.0 * q_m2 + 1.0) * t) * m0sq + 3.0 * se2) {
            detail = "second-moment envelope broke at t = " + std::to_string(t);
            return false;
        }
    }
    detail = "tv and upper_w within budget, moments inside envelopes, bitwise replay";
    return true;
}

// ---------------------------------------------------------------------------
// 10. martingale residuals, 5-function suite
bool criterion10(std::string& detail) {
    CdrModel cm;
    cm.a = 1.0;
    cm.q = classical_q();
    cm.initial = InitialMeasureSpec::exponential_mixture(0.3, 1.0);
    cm.h = 1.0 / 256.0;
    cm.x_max = 32.0;
    cm.horizon = 1.0;
    const MeasureFlow flow = march_solve(cm);
    const std::size_t n_paths = 100000;
    const auto ensemble = simulate_cdr_ensemble(flow, n_paths, 31415926, 4);

    const auto suite = default_test_suite();
    const std::vector<double> times{0.5, 1.0};
    const auto report = martingale_residual(ensemble, flow, suite, times, 4);
    double worst_sigma = 0.0;
    for (const auto& row : report.rows) {
        worst_sigma = std::max(worst_sigma, std::abs(row.mean) / row.stderr_);
        if (row.flagged) {
            detail = row.f_name + " at t = " + std::to_string(row.time) + ": |mean| = " +
                     std::to_string(std::abs(row.mean)) + " > 3 stderr";
            return false;
        }
    }
    for (const auto& row : report.corr_rows) {
        if (row.flagged) {
            detail = "increment correlation " + std::to_string(row.correlation) + " for " +
                     row.f_name;
            return false;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "10 mean checks + 10 increment correlations, worst %.2f sigma",
                  worst_sigma);
    detail = buf;
    return true;
}

// ---------------------------------------------------------------------------
// 11. process marginal convergence in k
bool criterion11(std::string& detail) {
    CdrModel model;
    model.a = 1.0;
    model.q = classical_q();
    model.initial = InitialMeasureSpec::dirac(2.0);
    model.h = 1.0 / 256.0;
    model.x_max = 24.0;
    model.horizon = 1.0;
    const MeasureFlow flow = march_solve(model);

    const std::vector<std::size_t> ks{16, 64, 256};
    const std::vector<double> ts{1.0};
    const MarginalReport report =
        verify_process_marginals(model, ks, ts, flow, 100000, 987654321, 4);
    if (!report.trend_ok) {
        detail = "distance not nonincreasing in k";
        return false;
    }
    if (!report.moments_ok) {
        detail = "a moment envelope broke";
        return false;
    }
    detail = "upper_w at t=1:";
    for (const auto& row : report.rows) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), " k=%zu %.4f", row.k, row.distance);
        detail += buf;
    }
    return true;
}

} // namespace

int main() {
    Runner runner;
    runner.run("1 closed-form Dirac dynamics", criterion1);
    runner.run("2 mass conservation at scale", criterion2);
    runner.run("3 moment recursions (50 random models)", criterion3);
    runner.run("4 Picard tail bound + cross-method agreement", criterion4);
    runner.run("5 Gronwall stability (20 random pairs)", criterion5);
    runner.run("6 scaling rate theorem", criterion6);
    runner.run("7 Wasserstein engine vs dense LP oracle", criterion7);
    runner.run("8 semigroup identities", criterion8);
    runner.run("9 simulators vs solvers", criterion9);
    runner.run("10 martingale residuals", criterion10);
    runner.run("11 process marginal convergence", criterion11);

    if (runner.failures == 0) {
        std::printf("acceptance: all 11 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", runner.failures);
    return 1;
}
