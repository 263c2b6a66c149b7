#include "drflow/mc_sim.hpp"

#include <algorithm>
#include <cmath>

#include "drflow/parallel.hpp"
#include "fft.hpp"

namespace drflow {

namespace {

// Prefix CDFs of the q-mixtures of a law trajectory, for exact
// right-continuous inverse draws.
struct LawQuantiles {
    double h = 1.0;
    std::vector<std::vector<double>> cdf;

    LawQuantiles(std::span<const GridMeasure> law, const OffspringDistribution& q,
                 std::size_t count) {
        h = law[0].step();
        cdf.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const GridMeasure qm = q_mixture(law[i], q);
            auto& c = cdf[i];
            c.resize(qm.sites());
            double acc = 0.0;
            for (std::size_t j = 0; j < qm.sites(); ++j) {
                acc += qm.mass_at(j);
                c[j] = acc;
            }
        }
    }

    double draw(std::size_t i, double u) const {
        const auto& c = cdf[i];
        const auto it = std::upper_bound(c.begin(), c.end(), u);
        const std::size_t j = it == c.end() ? c.size() - 1
                                            : static_cast<std::size_t>(it - c.begin());
        return static_cast<double>(j) * h;
    }
};

double draw_from_cdf(const std::vector<double>& cdf, double h, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t j =
        it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
    return static_cast<double>(j) * h;
}

std::vector<double> prefix_cdf(const GridMeasure& mu) {
    std::vector<double> c(mu.sites());
    double acc = 0.0;
    for (std::size_t j = 0; j < mu.sites(); ++j) {
        acc += mu.mass_at(j);
        c[j] = acc;
    }
    return c;
}

} // namespace

DiscretePathEnsemble simulate_discrete(const DiscreteModel& model,
                                       std::span<const GridMeasure> law_flow, std::size_t n,
                                       std::size_t n_paths, std::uint64_t seed,
                                       std::size_t workers) {
    if (law_flow.size() < n) {
        throw grid_error("law flow covers " + std::to_string(law_flow.size()) +
                         " steps, need " + std::to_string(n));
    }
    const LawQuantiles quantiles(law_flow, model.q, n);
    const std::vector<double> initial_cdf = prefix_cdf(law_flow[0]);
    const double h = law_flow[0].step();
    const double alpha = model.alpha;

    DiscretePathEnsemble ensemble;
    ensemble.n_steps = n;
    ensemble.n_paths = n_paths;
    ensemble.seed = seed;
    ensemble.h = h;
    ensemble.states.resize(n_paths * (n + 1));

    parallel_for(n_paths, workers, [&](std::size_t p) {
        CounterRng rng(seed, p);
        double x = draw_from_cdf(initial_cdf, h, rng.uniform_open());
        double* out = &ensemble.states[p * (n + 1)];
        out[0] = x;
        for (std::size_t i = 0; i < n; ++i) {
            // eta and U are always drawn, as in the defining recursion
            const bool eta = rng.uniform() < alpha;
            const double u = rng.uniform_open();
            const double jump = eta ? quantiles.draw(i, u) : 0.0;
            x = std::max(x + jump - 1.0, 0.0);
            out[i + 1] = x;
        }
    });
    return ensemble;
}

double continuous_state(const ContinuousPath& path, double t) {
    double x = path.x0;
    double last = 0.0;
    for (const JumpEvent& e : path.jumps) {
        if (e.time > t) break;
        x = std::max(x - (e.time - last), 0.0) + e.size;
        last = e.time;
    }
    return std::max(x - (t - last), 0.0);
}

ContinuousPath simulate_cdr_path(const MeasureFlow& flow, double x0, double horizon,
                                 CounterRng& rng) {
    ContinuousPath path;
    path.x0 = x0;
    const double a = flow.model().a;
    if (a <= 0.0) return path;
    double t = 0.0;
    for (;;) {
        t += rng.exponential(a);
        if (t > horizon) break;
        const std::size_t slice = flow.nearest_index(t);
        path.jumps.push_back({t, flow.qmix_quantile(slice, rng.uniform_open())});
    }
    return path;
}

ContinuousPathEnsemble simulate_cdr_ensemble(const MeasureFlow& flow, std::size_t n_paths,
                                             std::uint64_t seed, std::size_t workers,
                                             std::optional<double> x0_fixed) {
    flow.ensure_quantile_tables();
    const std::vector<double> initial_cdf = prefix_cdf(flow.slice(0));
    const double h = flow.slice(0).step();

    ContinuousPathEnsemble ensemble;
    ensemble.horizon = flow.horizon();
    ensemble.seed = seed;
    ensemble.paths.resize(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t p) {
        CounterRng rng(seed, p);
        const double x0 =
            x0_fixed ? *x0_fixed : draw_from_cdf(initial_cdf, h, rng.uniform_open());
        ensemble.paths[p] = simulate_cdr_path(flow, x0, ensemble.horizon, rng);
    });
    return ensemble;
}

namespace {

GridMeasure bin_states(std::span<const double> states, double h) {
    double maxx = 0.0;
    for (double x : states) maxx = std::max(maxx, x);
    const auto top = static_cast<std::size_t>(std::llround(maxx / h));
    std::vector<double> w(top + 1, 0.0);
    const double share = 1.0 / static_cast<double>(states.size());
    for (double x : states) {
        auto j = static_cast<std::size_t>(std::llround(x / h));
        w[std::min(j, top)] += share;
    }
    return GridMeasure(h, std::move(w));
}

} // namespace

GridMeasure empirical_measure(const DiscretePathEnsemble& ensemble, std::size_t step, double h) {
    if (step > ensemble.n_steps) throw grid_error("checkpoint outside the ensemble range");
    std::vector<double> states(ensemble.n_paths);
    for (std::size_t p = 0; p < ensemble.n_paths; ++p) states[p] = ensemble.state(p, step);
    return bin_states(states, h);
}

GridMeasure empirical_measure(const ContinuousPathEnsemble& ensemble, double t, double h) {
    if (t < 0.0 || t > ensemble.horizon + kLatticeAlignTol) {
        throw grid_error("checkpoint outside the ensemble horizon");
    }
    std::vector<double> states(ensemble.paths.size());
    for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
        states[p] = continuous_state(ensemble.paths[p], t);
    }
    return bin_states(states, h);
}

namespace {

// a * (<mu_s^q, f(x + .)> - f(x)) on the lattice; f_lattice must extend
// far enough that x + support(mu^q) stays inside.
std::vector<double> jump_compensator(const GridMeasure& qm, double a,
                                     const std::vector<double>& f_ext, std::size_t n_out) {
    const std::size_t support = qm.support_end() + 1;
    std::vector<double> kernel(qm.masses().begin(),
                               qm.masses().begin() + static_cast<long>(support));
    if (qm.overflow() > 0.0) kernel.back() += qm.overflow();
    std::vector<double> corr = drflow::detail::fft_correlate(kernel, f_ext);
    const double qmass = qm.total_mass();
    std::vector<double> out(n_out);
    for (std::size_t j = 0; j < n_out; ++j) out[j] = a * (corr[j] - qmass * f_ext[j]);
    return out;
}

double interp_clamped(const std::vector<double>& phi, double x, double h) {
    if (x <= 0.0) return phi.front();
    const double pos = x / h;
    const auto j = static_cast<std::size_t>(pos);
    if (j + 1 >= phi.size()) return phi.back();
    const double frac = pos - static_cast<double>(j);
    return phi[j] * (1.0 - frac) + phi[j + 1] * frac;
}

struct Stats {
    double mean = 0.0;
    double stderr_ = 0.0;
};

Stats mean_stderr(std::span<const double> xs) {
    const auto n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

} // namespace

MartingaleReport martingale_residual(const ContinuousPathEnsemble& ensemble,
                                     const MeasureFlow& flow,
                                     std::span<const NamedFunction> f_suite,
                                     std::span<const double> t_list, std::size_t workers) {
    MartingaleReport report;
    if (t_list.empty() || ensemble.paths.empty()) return report;
    const double delta = flow.delta();
    const double a = flow.model().a;
    const double h = delta;
    const std::size_t n_paths = ensemble.paths.size();
    const double corr_threshold = 3.0 / std::sqrt(static_cast<double>(n_paths));

    // checkpoints: every t and its midpoint s = t/2, all on the lattice
    std::vector<std::size_t> check_idx;
    for (double t : t_list) {
        check_idx.push_back(flow.index_of(t));
        check_idx.push_back(flow.index_of(t) / 2);
    }
    std::sort(check_idx.begin(), check_idx.end());
    check_idx.erase(std::unique(check_idx.begin(), check_idx.end()), check_idx.end());
    const std::size_t max_idx = check_idx.back();

    const std::size_t n_sites = flow.slice(0).sites();
    std::vector<double> f_ext(2 * n_sites);

    for (const NamedFunction& nf : f_suite) {
        for (std::size_t j = 0; j < f_ext.size(); ++j) {
            f_ext[j] = nf.f(static_cast<double>(j) * h);
        }
        // phi_i = a(<mu_i^q, f(x+.)> - f(x)) per slice
        std::vector<std::vector<double>> phi(max_idx + 1);
        for (std::size_t i = 0; i <= max_idx; ++i) {
            phi[i] = jump_compensator(flow.qmix(i), a, f_ext, n_sites);
        }

        // per path: M at every checkpoint. The drift terms of
        // f(X_t) - f(X_0) and of the compensator cancel exactly along the
        // path, leaving M = sum of jump increments - int phi_s(X_s) ds.
        std::vector<double> m_values(n_paths * check_idx.size());
        parallel_for(n_paths, workers, [&](std::size_t p) {
            const ContinuousPath& path = ensemble.paths[p];
            double jump_sum = 0.0;      // sum of f(X_tau) - f(X_tau-)
            double integral = 0.0;      // int phi_s(X_s) ds, trapezoid per cell
            std::size_t ev = 0;
            double x_prev = path.x0;    // state at lattice time i
            std::size_t check = 0;
            for (std::size_t i = 0; i <= max_idx; ++i) {
                if (check < check_idx.size() && check_idx[check] == i) {
                    m_values[p * check_idx.size() + check] = jump_sum - integral;
                    ++check;
                }
                if (i == max_idx) break;
                const double t_i = static_cast<double>(i) * delta;
                // advance through (t_i, t_{i+1}], accumulating jumps
                const double t_next = t_i + delta;
                double x_at = x_prev;
                double t_at = t_i;
                while (ev < path.jumps.size() && path.jumps[ev].time <= t_next) {
                    const double before = std::max(x_at - (path.jumps[ev].time - t_at), 0.0);
                    const double after = before + path.jumps[ev].size;
                    jump_sum += nf.f(after) - nf.f(before);
                    x_at = after;
                    t_at = path.jumps[ev].time;
                    ++ev;
                }
                const double x_next = std::max(x_at - (t_next - t_at), 0.0);
                integral += 0.5 * delta *
                            (interp_clamped(phi[i], x_prev, h) + interp_clamped(phi[i], x_next, h));
                x_prev = x_next;
            }
        });

        // means and flags per requested t; increment correlation vs the
        // bounded functional 1 /\ X_s at s = t/2
        for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
            const std::size_t it = flow.index_of(t_list[ti]);
            const std::size_t is = it / 2;
            const auto pos_t = static_cast<std::size_t>(
                std::lower_bound(check_idx.begin(), check_idx.end(), it) - check_idx.begin());
            const auto pos_s = static_cast<std::size_t>(
                std::lower_bound(check_idx.begin(), check_idx.end(), is) - check_idx.begin());

            std::vector<double> mt(n_paths), inc(n_paths), gs(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p) {
                mt[p] = m_values[p * check_idx.size() + pos_t];
                inc[p] = mt[p] - m_values[p * check_idx.size() + pos_s];
                gs[p] = std::min(
                    1.0, continuous_state(ensemble.paths[p], static_cast<double>(is) * delta));
            }
            const Stats st = mean_stderr(mt);
            report.rows.push_back({nf.name, t_list[ti], st.mean, st.stderr_,
                                   std::abs(st.mean) > 3.0 * st.stderr_});
            const double c = pearson(inc, gs);
            report.corr_rows.push_back({nf.name, t_list[ti],
                                        static_cast<double>(is) * delta, c, corr_threshold,
                                        std::abs(c) > corr_threshold});
        }
    }
    return report;
}

MartingaleReport martingale_residual_discrete(const DiscretePathEnsemble& ensemble,
                                              const DiscreteModel& model,
                                              std::span<const GridMeasure> law_flow,
                                              std::span<const NamedFunction> f_suite,
                                              std::span<const std::size_t> n_list) {
    MartingaleReport report;
    if (n_list.empty() || ensemble.n_paths == 0) return report;
    const double h = ensemble.h;
    const std::size_t max_n = *std::max_element(n_list.begin(), n_list.end());
    if (max_n > ensemble.n_steps) throw grid_error("checkpoint beyond the simulated horizon");
    const double alpha = model.alpha;
    const std::size_t unit = law_flow[0].unit_cells();
    const std::size_t n_paths = ensemble.n_paths;
    const double corr_threshold = 3.0 / std::sqrt(static_cast<double>(n_paths));

    // lattice extension covering every reachable state plus one jump
    double max_state = 0.0;
    for (double x : ensemble.states) max_state = std::max(max_state, x);
    std::size_t qm_support = 0;
    std::vector<GridMeasure> qmix;
    qmix.reserve(max_n);
    for (std::size_t i = 0; i < max_n; ++i) {
        qmix.push_back(q_mixture(law_flow[i], model.q));
        qm_support = std::max(qm_support, qmix.back().support_end());
    }
    const auto max_site = static_cast<std::size_t>(std::llround(max_state / h));
    const std::size_t ext = max_site + qm_support + 2;

    for (const NamedFunction& nf : f_suite) {
        std::vector<double> f_ext(ext);
        for (std::size_t j = 0; j < ext; ++j) f_ext[j] = nf.f(static_cast<double>(j) * h);

        // A_i f on the lattice, exact:
        //   alpha sum_z qm[z] f((x + z - 1)+) + (1-alpha) f((x-1)+) - f(x)
        std::vector<std::vector<double>> af(max_n);
        for (std::size_t i = 0; i < max_n; ++i) {
            af[i].assign(max_site + 1, 0.0);
            const GridMeasure& qm = qmix[i];
            for (std::size_t j = 0; j <= max_site; ++j) {
                double acc = 0.0;
                for (std::size_t z = qm.support_begin(); z <= qm.support_end(); ++z) {
                    const double wz = qm.mass_at(z);
                    if (wz == 0.0) continue;
                    const std::size_t idx = j + z > unit ? j + z - unit : 0;
                    acc += wz * f_ext[idx];
                }
                acc += qm.overflow() * f_ext[j + qm.support_end() > unit
                                                 ? j + qm.support_end() - unit
                                                 : 0];
                const std::size_t down = j > unit ? j - unit : 0;
                af[i][j] = alpha * (acc - qm.total_mass() * f_ext[j]) +
                           (1.0 - alpha) * (f_ext[down] - f_ext[j]);
            }
        }

        for (std::size_t n : n_list) {
            std::vector<double> mt(n_paths), inc(n_paths), gs(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p) {
                double m = 0.0, m_half = 0.0;
                const std::size_t half = n / 2;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i == half) m_half = m;
                    const double x = ensemble.state(p, i);
                    const double xn = ensemble.state(p, i + 1);
                    const auto j = static_cast<std::size_t>(std::llround(x / h));
                    m += nf.f(xn) - nf.f(x) - af[i][j];
                }
                if (half == n) m_half = m;
                mt[p] = m;
                inc[p] = m - m_half;
                gs[p] = std::min(1.0, ensemble.state(p, half));
            }
            const Stats st = mean_stderr(mt);
            report.rows.push_back({nf.name, static_cast<double>(n), st.mean, st.stderr_,
                                   std::abs(st.mean) > 3.0 * st.stderr_});
            const double c = pearson(inc, gs);
            report.corr_rows.push_back({nf.name, static_cast<double>(n),
                                        static_cast<double>(n / 2), c, corr_threshold,
                                        std::abs(c) > corr_threshold});
        }
    }
    return report;
}

} // namespace drflow
