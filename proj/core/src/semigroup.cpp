#include "drflow/semigroup.hpp"

#include <algorithm>
#include <cmath>

#include "drflow/parallel.hpp"
#include "drflow/wasserstein.hpp"
#include "fft.hpp"

namespace drflow {

GridMeasure transition(const MeasureFlow& flow, double r, double t, const GridMeasure& nu_r) {
    const std::size_t ir = flow.index_of(r);
    const std::size_t it = flow.index_of(t);
    if (ir > it) throw grid_error("transition needs r <= t");
    const double delta = flow.delta();
    const double w = flow.model().a * delta;

    GridMeasure nu = nu_r;
    const double mass_in = nu.total_mass();
    for (std::size_t i = ir; i < it; ++i) {
        nu = pushforward_shift(mix(1.0 - w, nu, w, convolve(nu, flow.qmix(i))), delta);
        if (nu.overflow() > kOverflowBudget) {
            throw tail_overflow_error("transition overflow at slice " + std::to_string(i + 1),
                                      static_cast<long>(i + 1));
        }
    }
    if (std::abs(nu.total_mass() - mass_in) > 1e-8) {
        throw numeric_error("transition lost mass: " + std::to_string(nu.total_mass() - mass_in));
    }
    return nu;
}

GridMeasure transition_row(const MeasureFlow& flow, double r, double t, std::size_t start_site) {
    const GridMeasure& ref = flow.slice(0);
    std::vector<double> w(ref.sites(), 0.0);
    if (start_site >= w.size()) throw grid_error("start site outside the lattice");
    w[start_site] = 1.0;
    return transition(flow, r, t, GridMeasure(ref.step(), std::move(w)));
}

TransitionKernel compute_kernel(const MeasureFlow& flow, double r, double t,
                                std::span<const std::size_t> start_sites, std::size_t workers) {
    TransitionKernel kernel;
    kernel.r = r;
    kernel.t = t;
    kernel.start_sites.assign(start_sites.begin(), start_sites.end());
    kernel.rows.resize(start_sites.size(), GridMeasure::zero(flow.slice(0).step(), 1));
    parallel_for(start_sites.size(), workers, [&](std::size_t i) {
        kernel.rows[i] = transition_row(flow, r, t, start_sites[i]);
    });
    for (const GridMeasure& row : kernel.rows) {
        if (std::abs(row.total_mass() - 1.0) > 1e-8) {
            throw numeric_error("kernel row not normalized");
        }
    }
    return kernel;
}

std::vector<std::size_t> default_start_sites(const MeasureFlow& flow, std::size_t count) {
    const std::size_t last = flow.slice(0).sites() - 1;
    std::vector<std::size_t> sites;
    sites.push_back(0);
    // geometric spread over (0, x_max]
    double x = 1.0;
    while (sites.size() < count && x < static_cast<double>(last)) {
        const auto j = static_cast<std::size_t>(x);
        if (j > sites.back()) sites.push_back(j);
        x *= 1.35;
        if (x - static_cast<double>(sites.back()) < 1.0) x = static_cast<double>(sites.back()) + 1.0;
    }
    if (sites.back() != last && sites.size() < count) sites.push_back(last / 2);
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    return sites;
}

double chapman_kolmogorov_residual(const MeasureFlow& flow, double r, double s, double t,
                                   std::span<const std::size_t> start_sites) {
    if (!(r <= s && s <= t)) throw grid_error("chapman_kolmogorov needs r <= s <= t");
    double worst = 0.0;
    for (std::size_t site : start_sites) {
        const GridMeasure direct = transition_row(flow, r, t, site);
        const GridMeasure through = transition(flow, s, t, transition_row(flow, r, s, site));
        worst = std::max(worst, tv_distance(direct, through));
    }
    return worst;
}

std::vector<ContractionRow> contraction_check(
    const MeasureFlow& flow, double r, double t,
    std::span<const std::pair<std::size_t, std::size_t>> pairs, double slack,
    std::size_t workers) {
    if (slack < 0.0) slack = 5.0 * flow.delta();
    const double h = flow.slice(0).step();
    const double growth = std::exp(flow.model().a * (t - r));

    std::vector<ContractionRow> rows(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const auto [xs, ys] = pairs[i];
        const GridMeasure px = transition_row(flow, r, t, xs);
        const GridMeasure py = transition_row(flow, r, t, ys);
        TransportOptions opt;
        opt.want_plan = false;
        opt.want_dual = false;
        opt.support_cap = std::size_t{1} << 20;
        ContractionRow row;
        row.x_site = xs;
        row.y_site = ys;
        row.distance = exact_w(px, py, opt).value;
        const double rho =
            std::min(1.0, h * static_cast<double>(xs > ys ? xs - ys : ys - xs));
        row.bound = growth * rho + slack;
        row.pass = row.distance <= row.bound;
        rows[i] = row;
    });
    return rows;
}

namespace {

// u(y) -> (1 - a Delta) T_Delta u (y) + a Delta <mu_s^q, T_Delta u (y + .)>,
// the one-step adjoint of the frozen marching operator.
std::vector<double> adjoint_step(const MeasureFlow& flow, std::size_t slice_index,
                                 const std::vector<double>& u) {
    const double w = flow.model().a * flow.delta();
    const std::size_t n = u.size();

    // v = T_Delta u on the lattice, extended by its last value
    std::vector<double> v(n);
    v[0] = u[0];
    for (std::size_t j = 1; j < n; ++j) v[j] = u[j - 1];

    const GridMeasure& qm = flow.qmix(slice_index);
    const std::size_t support = qm.support_end() + 1;
    std::vector<double> kernel(qm.masses().begin(), qm.masses().begin() + static_cast<long>(support));
    if (qm.overflow() > 0.0 && !kernel.empty()) kernel.back() += qm.overflow();

    // corr[j] = sum_z kernel[z] v[j + z], v clamped at its last value
    std::vector<double> v_ext(n + support, v.back());
    std::copy(v.begin(), v.end(), v_ext.begin());
    std::vector<double> corr = detail::fft_correlate(kernel, v_ext);

    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = (1.0 - w) * v[j] + w * corr[j];
    return out;
}

} // namespace

std::vector<std::vector<double>> backward_function_flow(const MeasureFlow& flow, double r,
                                                        double t,
                                                        std::span<const double> f_lattice) {
    const std::size_t ir = flow.index_of(r);
    const std::size_t it = flow.index_of(t);
    if (ir > it) throw grid_error("backward_function_flow needs r <= t");

    std::vector<std::vector<double>> u(it - ir + 1);
    u[it - ir].assign(f_lattice.begin(), f_lattice.end());
    for (std::size_t k = it - ir; k-- > 0;) {
        u[k] = adjoint_step(flow, ir + k, u[k + 1]);
    }
    return u;
}

namespace {

// A_s g evaluated on the whole lattice from lattice samples of g.
std::vector<double> generator_on_lattice(const MeasureFlow& flow, std::size_t slice_index,
                                         const std::vector<double>& g) {
    const double a = flow.model().a;
    const double h = flow.delta();
    const std::size_t n = g.size();

    const GridMeasure& qm = flow.qmix(slice_index);
    const std::size_t support = qm.support_end() + 1;
    std::vector<double> kernel(qm.masses().begin(), qm.masses().begin() + static_cast<long>(support));
    if (qm.overflow() > 0.0 && !kernel.empty()) kernel.back() += qm.overflow();

    std::vector<double> g_ext(n + support, g.back());
    std::copy(g.begin(), g.end(), g_ext.begin());
    std::vector<double> corr = detail::fft_correlate(kernel, g_ext);

    const double qmass = qm.total_mass();
    std::vector<double> out(n);
    out[0] = a * (corr[0] - qmass * g[0]);
    for (std::size_t j = 1; j < n; ++j) {
        out[j] = a * (corr[j] - qmass * g[j]) - (g[j] - g[j - 1]) / h;
    }
    return out;
}

} // namespace

ForwardBackwardReport forward_backward_residuals(const MeasureFlow& flow, double r, double t,
                                                 std::span<const NamedFunction> f_suite,
                                                 std::span<const std::size_t> x_sites) {
    ForwardBackwardReport report;
    const std::size_t ir = flow.index_of(r);
    const std::size_t it = flow.index_of(t);
    const double delta = flow.delta();
    const std::size_t n = flow.slice(0).sites();

    for (const NamedFunction& nf : f_suite) {
        std::vector<double> f_lattice(n);
        for (std::size_t j = 0; j < n; ++j) f_lattice[j] = nf.f(static_cast<double>(j) * delta);

        // backward flow u_s = P_{s,t} f as lattice functions
        const auto u = backward_function_flow(flow, r, t, f_lattice);

        // A_s f on the lattice, one array per marching step
        std::vector<std::vector<double>> asf_all(it - ir);
        for (std::size_t k = ir; k < it; ++k) {
            asf_all[k - ir] = generator_on_lattice(flow, k, f_lattice);
        }

        // forward: rows of P_{r,s}(x,.) marched once per start site
        for (std::size_t x : x_sites) {
            GridMeasure row = transition_row(flow, r, r, x);
            double forward_acc = 0.0;
            for (std::size_t k = ir; k < it; ++k) {
                const auto& asf = asf_all[k - ir];
                double inner = 0.0;
                for (std::size_t j = 0; j < row.sites(); ++j) {
                    if (row.mass_at(j) != 0.0) inner += row.mass_at(j) * asf[j];
                }
                inner += row.overflow() * asf.back();
                forward_acc += delta * inner;
                row = transition(flow, static_cast<double>(k) * delta,
                                 static_cast<double>(k + 1) * delta, row);
            }
            double p_f = 0.0;
            for (std::size_t j = 0; j < row.sites(); ++j) {
                if (row.mass_at(j) != 0.0) p_f += row.mass_at(j) * f_lattice[j];
            }
            p_f += row.overflow() * f_lattice.back();

            double backward_acc = 0.0;
            for (std::size_t k = ir; k < it; ++k) {
                backward_acc += delta * generator_on_lattice(flow, k, u[k - ir])[x];
            }

            ForwardBackwardRow out;
            out.f_name = nf.name;
            out.x_site = x;
            out.forward_residual = std::abs(p_f - f_lattice[x] - forward_acc);
            out.backward_residual = std::abs(u[0][x] - f_lattice[x] - backward_acc);
            report.max_forward = std::max(report.max_forward, out.forward_residual);
            report.max_backward = std::max(report.max_backward, out.backward_residual);
            report.rows.push_back(std::move(out));
        }
    }
    return report;
}

double derivative_commutation_residual(const MeasureFlow& flow, double r, double t,
                                       const NamedFunction& f,
                                       std::span<const std::size_t> x_sites) {
    const double h = flow.delta();
    const std::size_t n = flow.slice(0).sites();
    std::vector<double> f_lattice(n), fp_lattice(n);
    for (std::size_t j = 0; j < n; ++j) {
        f_lattice[j] = f.f(static_cast<double>(j) * h);
        fp_lattice[j] = f.fprime(static_cast<double>(j) * h);
    }
    const auto uf = backward_function_flow(flow, r, t, f_lattice);
    const auto up = backward_function_flow(flow, r, t, fp_lattice);

    double worst = 0.0;
    for (std::size_t x : x_sites) {
        if (x == 0 || x + 1 >= n) continue;
        const double diff = (uf[0][x + 1] - uf[0][x - 1]) / (2.0 * h);  // centered difference
        worst = std::max(worst, std::abs(diff - up[0][x]));
    }
    return worst;
}

} // namespace drflow
