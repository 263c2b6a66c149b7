#include "drflow/cdr_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "drflow/dr_discrete.hpp"
#include "drflow/io.hpp"

namespace drflow {

namespace {

// Raw accumulation buffer used by the Picard iteration; cheaper than
// round-tripping GridMeasure invariant checks in the inner loops.
struct RawMeasure {
    std::vector<double> w;
    double overflow = 0.0;

    static RawMeasure from(const GridMeasure& mu, std::size_t sites) {
        RawMeasure r;
        r.w.assign(sites, 0.0);
        const auto m = mu.masses();
        const std::size_t n = std::min(sites, m.size());
        std::copy(m.begin(), m.begin() + static_cast<long>(n), r.w.begin());
        r.overflow = mu.overflow();
        for (std::size_t j = n; j < m.size(); ++j) r.overflow += m[j];
        return r;
    }

    void shift_once() {  // pushforward by one lattice cell
        if (w.size() > 1) w[0] += w[1];
        for (std::size_t j = 1; j + 1 < w.size(); ++j) w[j] = w[j + 1];
        if (!w.empty()) w.back() = 0.0;
    }

    void add_scaled(const RawMeasure& other, double c) {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += c * other.w[j];
        overflow += c * other.overflow;
    }

    void scale(double c) {
        for (double& x : w) x *= c;
        overflow *= c;
    }
};

} // namespace

std::size_t MeasureFlow::index_of(double t) const {
    if (t < -kLatticeAlignTol) throw grid_error("time must be nonnegative");
    const std::size_t i = detail::aligned_cells(t, delta(), "time");
    if (i >= slices_.size()) {
        throw grid_error("time " + std::to_string(t) + " outside the solved horizon");
    }
    return i;
}

std::size_t MeasureFlow::nearest_index(double t) const {
    if (t <= 0.0) return 0;
    const auto i = static_cast<std::size_t>(std::llround(t / delta()));
    return std::min(i, slices_.size() - 1);
}

struct MeasureFlow::QuantileCache {
    std::size_t resolution = 0;
    std::vector<std::vector<double>> cdf;              // per slice prefix sums
    std::vector<std::vector<std::uint32_t>> bracket;   // per slice index brackets
};

void MeasureFlow::ensure_quantile_tables(std::size_t resolution) const {
    std::call_once(*quantiles_once_, [&] {
        auto cache = std::make_shared<QuantileCache>();
        cache->resolution = resolution;
        cache->cdf.resize(slices_.size());
        cache->bracket.resize(slices_.size());
        for (std::size_t i = 0; i < slices_.size(); ++i) {
            const GridMeasure& qm = qmix(i);
            auto& cdf = cache->cdf[i];
            cdf.resize(qm.sites());
            double acc = 0.0;
            for (std::size_t j = 0; j < qm.sites(); ++j) {
                acc += qm.mass_at(j);
                cdf[j] = acc;
            }
            auto& br = cache->bracket[i];
            br.resize(resolution + 1);
            std::size_t j = 0;
            for (std::size_t b = 0; b <= resolution; ++b) {
                const double u = static_cast<double>(b) / static_cast<double>(resolution);
                while (j + 1 < cdf.size() && cdf[j] <= u) ++j;
                br[b] = static_cast<std::uint32_t>(j);
            }
        }
        quantiles_ = std::move(cache);
    });
}

double MeasureFlow::qmix_quantile(std::size_t i, double u) const {
    if (!(u > 0.0 && u < 1.0)) throw grid_error("quantile level must lie in (0,1)");
    if (!quantiles_) throw grid_error("quantile tables not built; call ensure_quantile_tables");
    const QuantileCache& c = *quantiles_;
    const auto& cdf = c.cdf[i];
    const auto b = static_cast<std::size_t>(u * static_cast<double>(c.resolution));
    std::size_t lo = c.bracket[i][b];
    std::size_t hi = b + 1 <= c.resolution ? c.bracket[i][b + 1] : cdf.size() - 1;
    // first site with G > u inside the bracket
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (cdf[mid] > u) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return static_cast<double>(lo) * qmix(i).step();
}

MeasureFlow march_solve(const CdrModel& model) {
    if (model.a < 0.0) throw grid_error("jump rate must be nonnegative");
    const double delta = model.h;
    if (model.a * delta > 1.0) {
        throw grid_error("a * Delta exceeds 1; refine the lattice");
    }
    const std::size_t steps = detail::aligned_cells(model.horizon, delta, "horizon");

    MeasureFlow flow;
    flow.model_ = model;
    flow.slices_.reserve(steps + 1);
    flow.slices_.push_back(discretize(model.initial, model.h, model.x_max));
    const bool cache_qmix = model.q.max_offspring() > 1;
    if (cache_qmix) flow.qmix_.reserve(steps + 1);

    const double w = model.a * delta;
    for (std::size_t i = 0; i < steps; ++i) {
        const GridMeasure& cur = flow.slices_.back();
        GridMeasure qm = q_mixture(cur, model.q);
        GridMeasure next = [&] {
            try {
                return pushforward_shift(mix(1.0 - w, cur, w, convolve(cur, qm)), delta);
            } catch (const tail_overflow_error& e) {
                throw tail_overflow_error(std::string(e.what()) + " at slice " +
                                              std::to_string(i + 1),
                                          static_cast<long>(i + 1));
            }
        }();
        if (next.overflow() > kOverflowBudget) {
            throw tail_overflow_error("march overflow " + std::to_string(next.overflow()) +
                                          " at slice " + std::to_string(i + 1),
                                      static_cast<long>(i + 1));
        }
        if (std::abs(next.total_mass() - 1.0) > 1e-8) {
            throw numeric_error("march slice " + std::to_string(i + 1) +
                                " lost mass: " + std::to_string(next.total_mass() - 1.0));
        }
        if (cache_qmix) flow.qmix_.push_back(std::move(qm));
        flow.slices_.push_back(std::move(next));
    }
    if (cache_qmix) flow.qmix_.push_back(q_mixture(flow.slices_.back(), model.q));
    return flow;
}

std::vector<GridMeasure> picard_iterates(const CdrModel& model, double t, int n_iter) {
    if (n_iter < 1) throw grid_error("picard_iterates needs n_iter >= 1");
    const double delta = model.h;
    const std::size_t m = detail::aligned_cells(t, delta, "time");
    const double a = model.a;

    const GridMeasure mu0 = discretize(model.initial, model.h, model.x_max);
    const std::size_t sites = mu0.sites();

    // iterate 0: mu_s^{(0)} = e^{-a s} mu0 o T_s^{-1}
    std::vector<RawMeasure> prev(m + 1);
    {
        RawMeasure shifted = RawMeasure::from(mu0, sites);
        for (std::size_t i = 0; i <= m; ++i) {
            prev[i] = shifted;
            prev[i].scale(std::exp(-a * static_cast<double>(i) * delta));
            if (i < m) shifted.shift_once();
        }
    }

    auto to_measure = [&](const RawMeasure& r) {
        return GridMeasure(model.h, r.w, r.overflow);
    };

    std::vector<GridMeasure> history;
    history.reserve(static_cast<std::size_t>(n_iter) + 1);
    history.push_back(to_measure(prev[m]));

    std::vector<RawMeasure> next(m + 1);
    for (int n = 1; n <= n_iter; ++n) {
        // base term e^{-a t_i} mu0 o T_{t_i}^{-1}
        RawMeasure shifted = RawMeasure::from(mu0, sites);
        for (std::size_t i = 0; i <= m; ++i) {
            next[i] = shifted;
            next[i].scale(std::exp(-a * static_cast<double>(i) * delta));
            if (i < m) shifted.shift_once();
        }
        // source term: a int_0^t e^{a(s-t)} (mu_s * mu_s^q) o T_{t-s}^{-1} ds,
        // left-endpoint rule on the Delta-lattice
        for (std::size_t j = 0; j < m; ++j) {
            const GridMeasure mu_j = to_measure(prev[j]);
            const GridMeasure conv = convolve(mu_j, detail::q_mixture_raw(mu_j, model.q));
            if (conv.overflow() > kOverflowBudget) {
                throw tail_overflow_error("picard source overflow " +
                                          std::to_string(conv.overflow()));
            }
            RawMeasure running = RawMeasure::from(conv, sites);
            for (std::size_t i = j + 1; i <= m; ++i) {
                running.shift_once();
                const double weight =
                    a * delta *
                    std::exp(a * (static_cast<double>(j) - static_cast<double>(i)) * delta);
                next[i].add_scaled(running, weight);
            }
        }
        std::swap(prev, next);
        history.push_back(to_measure(prev[m]));

        const double total = history.back().total_mass();
        if (total > 1.0 + 1e-8) {
            throw numeric_error("picard iterate mass " + std::to_string(total) + " exceeds 1");
        }
    }
    return history;
}

GridMeasure picard_solve(const CdrModel& model, double t, int n_iter) {
    return picard_iterates(model, t, n_iter).back().renormalized();
}

MeasureFlow MeasureFlow::from_slices(const CdrModel& model, std::vector<GridMeasure> slices) {
    if (slices.empty()) throw grid_error("a flow needs at least one slice");
    const auto expected = detail::aligned_cells(model.horizon, model.h, "horizon") + 1;
    if (slices.size() != expected) {
        throw grid_error("slice count " + std::to_string(slices.size()) +
                         " does not match the horizon (" + std::to_string(expected) + ")");
    }
    MeasureFlow flow;
    flow.model_ = model;
    flow.slices_ = std::move(slices);
    if (model.q.max_offspring() > 1) {
        flow.qmix_.reserve(flow.slices_.size());
        for (const GridMeasure& s : flow.slices_) flow.qmix_.push_back(q_mixture(s, model.q));
    }
    return flow;
}

double picard_tail_bound(double a, double m1, double t, int n) {
    if (n < 0) throw grid_error("picard_tail_bound needs n >= 0");
    const double c = a * (m1 + 1.0) * t;
    if (c == 0.0) return n == 0 ? 2.0 : 0.0;
    // term = c^n / n!
    double term = 1.0;
    for (int i = 1; i <= n; ++i) term *= c / static_cast<double>(i);
    double sum = 0.0;
    int k = n;
    while (term > 1e-16 * (sum + term)) {
        sum += term;
        ++k;
        term *= c / static_cast<double>(k);
    }
    return 2.0 * sum;
}

double apply_generator(const std::function<double(double)>& f, const MeasureFlow& flow,
                       double t, double x) {
    const std::size_t i = flow.index_of(t);
    const GridMeasure& qm = flow.qmix(i);
    const double h = qm.step();
    detail::aligned_cells(x, h, "generator argument x");

    const double a = flow.model().a;
    double jump = 0.0;
    const double fx = f(x);
    for (std::size_t j = 0; j < qm.sites(); ++j) {
        const double wj = qm.mass_at(j);
        if (wj != 0.0) jump += wj * (f(x + qm.site_x(j)) - fx);
    }
    jump += qm.overflow() * (f(x + qm.x_max()) - fx);

    double drift = 0.0;
    if (x > 0.0) drift = (fx - f(x - h)) / h;
    return a * jump - drift;
}

std::vector<NamedFunction> default_test_suite() {
    return {
        {"one_minus_exp", [](double x) { return 1.0 - std::exp(-x); },
         [](double x) { return std::exp(-x); }},
        {"exp_neg", [](double x) { return std::exp(-x); },
         [](double x) { return -std::exp(-x); }},
        {"x_over_1px", [](double x) { return x / (1.0 + x); },
         [](double x) { return 1.0 / ((1.0 + x) * (1.0 + x)); }},
        {"cos", [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); }},
        {"trunc_lin", [](double x) { return std::min(1.0, x); },
         [](double x) { return x < 1.0 ? 1.0 : 0.0; }},
    };
}

namespace {

// <nu, f> with overflow evaluated at the last site.
double inner(const GridMeasure& nu, std::span<const double> f_ext) {
    double s = 0.0;
    for (std::size_t j = 0; j < nu.sites(); ++j) {
        if (nu.mass_at(j) != 0.0) s += nu.mass_at(j) * f_ext[j];
    }
    return s + nu.overflow() * f_ext[nu.sites() - 1];
}

// <nu, T_tau f> for a lattice shift of c cells.
double inner_shifted(const GridMeasure& nu, std::span<const double> f_ext, std::size_t c) {
    double s = 0.0;
    for (std::size_t j = 0; j < nu.sites(); ++j) {
        if (nu.mass_at(j) != 0.0) s += nu.mass_at(j) * f_ext[j > c ? j - c : 0];
    }
    const std::size_t last = nu.sites() - 1;
    return s + nu.overflow() * f_ext[last > c ? last - c : 0];
}

// <nu, f' 1_{(0,inf)}> with the backward lattice difference.
double inner_derivative(const GridMeasure& nu, std::span<const double> f_ext, double h) {
    double s = 0.0;
    for (std::size_t j = 1; j < nu.sites(); ++j) {
        if (nu.mass_at(j) != 0.0) s += nu.mass_at(j) * (f_ext[j] - f_ext[j - 1]) / h;
    }
    const std::size_t last = nu.sites() - 1;
    if (last >= 1) s += nu.overflow() * (f_ext[last] - f_ext[last - 1]) / h;
    return s;
}

} // namespace

FormResidualReport form_residuals(const MeasureFlow& flow,
                                  std::span<const NamedFunction> f_suite,
                                  std::span<const double> check_times) {
    FormResidualReport report;
    const double delta = flow.delta();
    const double a = flow.model().a;
    const double h = delta;

    std::size_t max_index = 0;
    for (double t : check_times) max_index = std::max(max_index, flow.index_of(t));

    // conv_j = mu_j * mu_j^q, reused across forms and test functions
    std::vector<GridMeasure> conv;
    conv.reserve(max_index);
    for (std::size_t j = 0; j < max_index; ++j) {
        conv.push_back(convolve(flow.slice(j), flow.qmix(j)));
    }

    const std::size_t sites = flow.slice(0).sites();
    std::vector<double> f_ext(2 * sites);

    for (const NamedFunction& nf : f_suite) {
        for (std::size_t j = 0; j < f_ext.size(); ++j) {
            f_ext[j] = nf.f(static_cast<double>(j) * h);
        }
        for (double t : check_times) {
            const std::size_t i = flow.index_of(t);
            const double lhs = inner(flow.slice(i), f_ext);

            double rhs_diff = inner(flow.slice(0), f_ext);
            double rhs_shift = inner_shifted(flow.slice(0), f_ext, i);
            double rhs_exp = std::exp(-a * t) * rhs_shift;
            for (std::size_t j = 0; j < i; ++j) {
                const double conv_f = inner(conv[j], f_ext);
                const double mu_f = inner(flow.slice(j), f_ext);
                rhs_diff += delta * (a * (conv_f - mu_f) -
                                     inner_derivative(flow.slice(j), f_ext, h));
                const std::size_t c = i - j;
                const double conv_tf = inner_shifted(conv[j], f_ext, c);
                const double mu_tf = inner_shifted(flow.slice(j), f_ext, c);
                rhs_shift += delta * a * (conv_tf - mu_tf);
                rhs_exp += delta * a *
                           std::exp(a * delta * (static_cast<double>(j) - static_cast<double>(i))) *
                           conv_tf;
            }
            FormResidualRow row{nf.name, t, std::abs(lhs - rhs_diff), std::abs(lhs - rhs_shift),
                                std::abs(lhs - rhs_exp)};
            report.max_form_residual =
                std::max({report.max_form_residual, row.differential_form, row.shift_mild_form,
                          row.exponential_form});
            report.rows.push_back(std::move(row));
        }
    }

    // mass equation <mu_t,1> = e^{-at}<mu_0,1> + a int_0^t e^{a(s-t)} g(<mu_s,1>) ds
    // with the exponential weight integrated exactly over each cell, so
    // the residual measures only the deviation of <mu_s,1> from 1.
    for (double t : check_times) {
        const std::size_t i = flow.index_of(t);
        const double lhs = flow.slice(i).total_mass();
        double rhs = std::exp(-a * t) * flow.slice(0).total_mass();
        if (a > 0.0) {
            const double cell = (std::exp(a * delta) - 1.0) / a;
            for (std::size_t j = 0; j < i; ++j) {
                const double weight =
                    std::exp(a * delta * (static_cast<double>(j) - static_cast<double>(i))) * cell;
                rhs += a * weight * flow.model().q.generating_function(flow.slice(j).total_mass());
            }
        }
        report.mass_rows.push_back({t, std::abs(lhs - rhs)});
        report.max_mass_residual = std::max(report.max_mass_residual, report.mass_rows.back().residual);
    }
    return report;
}

namespace {
constexpr char kFlowMagic[4] = {'D', 'R', 'F', 'L'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated flow checkpoint");
    return v;
}
} // namespace

void write_flow_checkpoint(const MeasureFlow& flow, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os.write(kFlowMagic, 4);
    const CdrModel& m = flow.model();
    put(os, m.a);
    put(os, flow.delta());
    put(os, m.h);
    put<std::uint64_t>(os, flow.slice(0).sites() - 1);                // J
    put<std::uint64_t>(os, m.q.max_offspring());                      // K
    put(os, m.horizon);                                               // T
    const auto qs = m.q.weights();
    os.write(reinterpret_cast<const char*>(qs.data()),
             static_cast<std::streamsize>(qs.size() * sizeof(double)));
    put<std::uint64_t>(os, flow.slice_count());
    for (std::size_t i = 0; i < flow.slice_count(); ++i) {
        io::write_measure_binary(flow.slice(i), os);
    }
}

MeasureFlow read_flow_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kFlowMagic, 4) != 0) {
        throw std::runtime_error("not a flow checkpoint");
    }
    CdrModel model;
    model.a = get<double>(is);
    const double delta = get<double>(is);
    model.h = get<double>(is);
    (void)get<std::uint64_t>(is);  // J, re-derived from the slices
    const auto k = get<std::uint64_t>(is);
    model.horizon = get<double>(is);
    if (std::abs(delta - model.h) > kLatticeAlignTol) {
        throw std::runtime_error("flow checkpoint with Delta != h");
    }
    std::vector<double> qw(k);
    is.read(reinterpret_cast<char*>(qw.data()),
            static_cast<std::streamsize>(qw.size() * sizeof(double)));
    model.q = OffspringDistribution::from_weights(std::move(qw));
    const auto count = get<std::uint64_t>(is);
    std::vector<GridMeasure> slices;
    slices.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) slices.push_back(io::read_measure_binary(is));
    return MeasureFlow::from_slices(model, std::move(slices));
}

} // namespace drflow
