#include "drflow/grid_measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fft.hpp"

namespace drflow {

namespace {

std::size_t checked_unit_cells(double step) {
    if (!(step > 0.0)) throw grid_error("lattice step must be positive");
    const double inv = 1.0 / step;
    const double r = std::round(inv);
    if (r < 1.0 || std::abs(inv - r) > kLatticeAlignTol * r) {
        throw grid_error("lattice step must satisfy 1/h integral, got h = " + std::to_string(step));
    }
    return static_cast<std::size_t>(r);
}

double kahan_sum(std::span<const double> xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

} // namespace

std::size_t detail::aligned_cells(double amount, double step, const char* what) {
    if (amount < 0.0) throw grid_error(std::string(what) + " must be nonnegative");
    const double cells = amount / step;
    const double r = std::round(cells);
    if (std::abs(cells - r) > kLatticeAlignTol * std::max(1.0, cells)) {
        throw grid_error(std::string(what) + " is not lattice-aligned: " +
                         std::to_string(amount) + " with step " + std::to_string(step));
    }
    return static_cast<std::size_t>(r);
}

GridMeasure::GridMeasure(double step, std::vector<double> masses, double overflow)
    : step_(step),
      unit_cells_(checked_unit_cells(step)),
      masses_(std::move(masses)),
      overflow_(overflow) {
    if (masses_.empty()) throw grid_error("a GridMeasure needs at least one site");
    if (overflow_ < 0.0) {
        if (overflow_ < -kNegativeClamp) throw numeric_error("negative overflow mass");
        overflow_ = 0.0;
    }
    for (double& w : masses_) {
        if (w < 0.0) {
            if (w < -kNegativeClamp) {
                throw numeric_error("negative mass beyond clamp threshold: " + std::to_string(w));
            }
            w = 0.0;
        }
    }
    core_mass_ = kahan_sum(masses_);
    normalized_ = std::abs(core_mass_ + overflow_ - 1.0) <= kMassTolerance;
}

GridMeasure GridMeasure::zero(double step, std::size_t sites) {
    return GridMeasure(step, std::vector<double>(sites, 0.0));
}

std::size_t GridMeasure::support_end() const {
    for (std::size_t j = masses_.size(); j-- > 0;) {
        if (masses_[j] != 0.0) return j;
    }
    return 0;
}

std::size_t GridMeasure::support_begin() const {
    for (std::size_t j = 0; j < masses_.size(); ++j) {
        if (masses_[j] != 0.0) return j;
    }
    return 0;
}

std::size_t GridMeasure::nonzero_count() const {
    return static_cast<std::size_t>(
        std::count_if(masses_.begin(), masses_.end(), [](double w) { return w != 0.0; }));
}

GridMeasure GridMeasure::renormalized() const {
    const double total = total_mass();
    if (!(total > 0.0)) throw numeric_error("cannot renormalize a measure with no mass");
    std::vector<double> w(masses_);
    for (double& x : w) x /= total;
    return GridMeasure(step_, std::move(w), overflow_ / total);
}

OffspringDistribution OffspringDistribution::from_weights(std::vector<double> weights) {
    while (!weights.empty() && weights.back() == 0.0) weights.pop_back();
    if (weights.empty()) throw grid_error("offspring distribution needs at least q_1");
    double sum = 0.0;
    for (double q : weights) {
        if (q < 0.0) throw grid_error("offspring weights must be nonnegative");
        sum += q;
    }
    if (!(sum > 0.0)) throw grid_error("offspring weights must have positive sum");

    OffspringDistribution out;
    out.renorm_delta_ = std::abs(1.0 - sum);
    out.weights_ = std::move(weights);
    for (double& q : out.weights_) q /= sum;
    for (std::size_t k = 1; k <= out.weights_.size(); ++k) {
        out.m1_ += static_cast<double>(k) * out.weights_[k - 1];
        out.m2_ += static_cast<double>(k * k) * out.weights_[k - 1];
    }
    return out;
}

double OffspringDistribution::generating_function(double z) const {
    // Horner evaluation of sum_k q_k z^{k+1} = z * (q_1 z + q_2 z^2 + ...)
    double acc = 0.0;
    for (std::size_t k = weights_.size(); k-- > 0;) {
        acc = acc * z + weights_[k];
    }
    return acc * z * z;
}

bool OffspringDistribution::moments_consistent(double tol) const {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 1; k <= weights_.size(); ++k) {
        m1 += static_cast<double>(k) * weights_[k - 1];
        m2 += static_cast<double>(k * k) * weights_[k - 1];
    }
    return std::abs(m1 - m1_) <= tol * std::max(1.0, m1_) &&
           std::abs(m2 - m2_) <= tol * std::max(1.0, m2_);
}

InitialMeasureSpec InitialMeasureSpec::dirac(double x0) {
    InitialMeasureSpec s;
    s.kind = Kind::dirac;
    s.x0 = x0;
    return s;
}

InitialMeasureSpec InitialMeasureSpec::two_atom(double p, double x0) {
    InitialMeasureSpec s;
    s.kind = Kind::two_atom;
    s.p = p;
    s.x0 = x0;
    return s;
}

InitialMeasureSpec InitialMeasureSpec::exponential_mixture(double p, double lambda) {
    InitialMeasureSpec s;
    s.kind = Kind::exponential_mixture;
    s.p = p;
    s.lambda = lambda;
    return s;
}

InitialMeasureSpec InitialMeasureSpec::lattice_law(std::vector<double> weights, double p) {
    InitialMeasureSpec s;
    s.kind = Kind::lattice_law;
    s.p = p;
    s.lattice_weights = std::move(weights);
    return s;
}

namespace {

void check_mixture_weight(double p) {
    if (p < 0.0 || p > 1.0) throw grid_error("mixture weight p must lie in [0,1]");
}

std::size_t nearest_site(double x, double h, std::size_t sites) {
    const double j = std::round(x / h);
    if (j < 0.0 || j > static_cast<double>(sites - 1)) {
        throw grid_error("atom at " + std::to_string(x) + " lies outside [0, x_max]");
    }
    return static_cast<std::size_t>(j);
}

} // namespace

GridMeasure discretize(const InitialMeasureSpec& spec, double h, double x_max) {
    checked_unit_cells(h);
    if (!(x_max > 0.0)) throw grid_error("x_max must be positive");
    const std::size_t sites = static_cast<std::size_t>(std::round(x_max / h)) + 1;
    std::vector<double> w(sites, 0.0);
    double overflow = 0.0;

    switch (spec.kind) {
    case InitialMeasureSpec::Kind::dirac:
        w[nearest_site(spec.x0, h, sites)] = 1.0;
        break;

    case InitialMeasureSpec::Kind::two_atom: {
        check_mixture_weight(spec.p);
        w[0] += spec.p;
        if (spec.p < 1.0) w[nearest_site(spec.x0, h, sites)] += 1.0 - spec.p;
        break;
    }

    case InitialMeasureSpec::Kind::exponential_mixture: {
        check_mixture_weight(spec.p);
        const double lambda = spec.lambda;
        if (!(lambda > 0.0)) throw grid_error("exponential rate must be positive");
        if (x_max < 10.0 / lambda) {
            throw grid_error("x_max must be at least 10/lambda for exponential initial data");
        }
        w[0] += spec.p;
        const double scale = 1.0 - spec.p;
        if (scale > 0.0) {
            // exact cell mass: integral of lambda e^{-lambda x} over
            // [x_j - h/2, x_j + h/2) intersected with R+
            double upper_exp = std::exp(-lambda * (h / 2.0));
            w[0] += scale * (1.0 - upper_exp);
            for (std::size_t j = 1; j + 1 < sites; ++j) {
                const double lo = (static_cast<double>(j) - 0.5) * h;
                const double next = std::exp(-lambda * (lo + h));
                w[j] += scale * (std::exp(-lambda * lo) - next);
            }
            // last cell keeps its lower half; the rest is tail overflow
            const double lo = (static_cast<double>(sites - 1) - 0.5) * h;
            const double hi = lo + h;
            w[sites - 1] += scale * (std::exp(-lambda * lo) - std::exp(-lambda * hi));
            overflow = scale * std::exp(-lambda * hi);
        }
        break;
    }

    case InitialMeasureSpec::Kind::lattice_law: {
        check_mixture_weight(spec.p);
        if (spec.lattice_weights.empty()) throw grid_error("lattice law needs weights");
        double sum = 0.0;
        for (double q : spec.lattice_weights) {
            if (q < 0.0) throw grid_error("lattice law weights must be nonnegative");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw grid_error("lattice law weights must sum to 1");
        w[0] += spec.p;
        const double scale = 1.0 - spec.p;
        for (std::size_t k = 1; k <= spec.lattice_weights.size(); ++k) {
            if (spec.lattice_weights[k - 1] == 0.0) continue;
            w[nearest_site(static_cast<double>(k), h, sites)] += scale * spec.lattice_weights[k - 1];
        }
        break;
    }
    }

    if (overflow > kOverflowBudget) {
        throw tail_overflow_error("initial tail truncation lost " + std::to_string(overflow) +
                                  " mass; enlarge x_max");
    }
    return GridMeasure(h, std::move(w), overflow);
}

namespace {

bool steps_match(const GridMeasure& a, const GridMeasure& b) {
    return a.unit_cells() == b.unit_cells();
}

// Direct sparse double sum; exact, used when the support product is small.
std::vector<double> convolve_direct(const GridMeasure& a, const GridMeasure& b) {
    std::vector<std::pair<std::size_t, double>> sa;
    sa.reserve(a.nonzero_count());
    for (std::size_t j = 0; j < a.sites(); ++j) {
        if (a.mass_at(j) != 0.0) sa.emplace_back(j, a.mass_at(j));
    }
    std::vector<double> out(a.support_end() + b.support_end() + 1, 0.0);
    for (const auto& [i, wa] : sa) {
        for (std::size_t j = b.support_begin(); j <= b.support_end(); ++j) {
            const double wb = b.mass_at(j);
            if (wb != 0.0) out[i + j] += wa * wb;
        }
    }
    return out;
}

} // namespace

GridMeasure convolve(const GridMeasure& a, const GridMeasure& b) {
    if (!steps_match(a, b)) throw grid_error("convolve: lattice steps differ");

    const std::size_t out_sites = std::max(a.sites(), b.sites());
    const std::size_t full_len = a.support_end() + b.support_end() + 1;

    const double nnz_product =
        static_cast<double>(a.nonzero_count()) * static_cast<double>(b.nonzero_count());
    const double n = static_cast<double>(detail::next_pow2(full_len));
    const double fft_cost = 6.0 * n * std::log2(n + 1.0);

    std::vector<double> full;
    if (nnz_product <= fft_cost) {
        full = convolve_direct(a, b);
    } else {
        std::vector<double> va(a.masses().begin(), a.masses().begin() + static_cast<long>(a.support_end()) + 1);
        std::vector<double> vb(b.masses().begin(), b.masses().begin() + static_cast<long>(b.support_end()) + 1);
        full = detail::fft_convolve(va, vb);
    }

    std::vector<double> w(out_sites, 0.0);
    const std::size_t keep = std::min<std::size_t>(out_sites, full.size());
    double clipped = 0.0;
    for (std::size_t j = 0; j < keep; ++j) w[j] = full[j];
    for (std::size_t j = keep; j < full.size(); ++j) clipped += full[j];

    // Overflow as the conservation residual: whatever of the exact
    // product mass is not on the kept lattice sits past x_max.
    double kept = 0.0;
    for (std::size_t j = 0; j < keep; ++j) {
        if (w[j] < 0.0) {
            if (w[j] < -kNegativeClamp) {
                throw numeric_error("convolution produced negative mass " + std::to_string(w[j]));
            }
            w[j] = 0.0;
        }
        kept += w[j];
    }
    const double total_in = a.total_mass() * b.total_mass();
    double overflow = total_in - kept;
    if (overflow < 0.0) {
        if (overflow < -kMassTolerance) {
            throw numeric_error("convolution inflated total mass by " + std::to_string(-overflow));
        }
        overflow = 0.0;
    }
    return GridMeasure(a.step(), std::move(w), overflow);
}

GridMeasure q_mixture(const GridMeasure& mu, const OffspringDistribution& q) {
    if (!mu.normalized()) throw grid_error("q_mixture requires a normalized input");
    return detail::q_mixture_raw(mu, q);
}

GridMeasure detail::q_mixture_raw(const GridMeasure& mu, const OffspringDistribution& q) {
    const auto qs = q.weights();
    if (qs.size() == 1) return mu;  // q_1 = 1 reduces the mixture to the identity

    std::vector<double> acc(mu.sites(), 0.0);
    double acc_overflow = 0.0;
    GridMeasure power = mu;  // mu^{*k}, k running
    for (std::size_t k = 1; k <= qs.size(); ++k) {
        const double qk = qs[k - 1];
        if (qk != 0.0) {
            const auto pm = power.masses();
            for (std::size_t j = 0; j < pm.size() && j < acc.size(); ++j) acc[j] += qk * pm[j];
            acc_overflow += qk * power.overflow();
        }
        if (k < qs.size()) {
            power = convolve(power, mu);
            if (power.overflow() > kOverflowBudget) {
                throw tail_overflow_error("q_mixture: convolution power " + std::to_string(k + 1) +
                                          " pushed " + std::to_string(power.overflow()) +
                                          " mass past x_max");
            }
        }
    }
    GridMeasure out(mu.step(), std::move(acc), acc_overflow);
    if (out.overflow() > kOverflowBudget) {
        throw tail_overflow_error("q_mixture overflow " + std::to_string(out.overflow()));
    }
    return out;
}

GridMeasure pushforward_shift(const GridMeasure& mu, double a) {
    const std::size_t cells = detail::aligned_cells(a, mu.step(), "shift amount");
    if (cells == 0) return mu;

    std::vector<double> w(mu.sites(), 0.0);
    const auto m = mu.masses();
    double at_zero = 0.0;
    for (std::size_t j = 0; j < std::min<std::size_t>(cells + 1, m.size()); ++j) at_zero += m[j];
    w[0] = at_zero;
    for (std::size_t j = cells + 1; j < m.size(); ++j) w[j - cells] = m[j];
    return GridMeasure(mu.step(), std::move(w), mu.overflow());
}

double moment(const GridMeasure& mu, int k) {
    if (k < 0 || k > 2) throw grid_error("moment order must be 0, 1 or 2");
    if (k == 0) return mu.total_mass();
    const auto m = mu.masses();
    const double h = mu.step();
    double s = 0.0, c = 0.0;
    for (std::size_t j = 1; j < m.size(); ++j) {
        if (m[j] == 0.0) continue;
        const double x = static_cast<double>(j) * h;
        const double term = (k == 1 ? x : x * x) * m[j];
        const double y = term - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    const double xm = mu.x_max();
    return s + (k == 1 ? xm : xm * xm) * mu.overflow();
}

std::size_t quantile_site(const GridMeasure& mu, double u) {
    if (!(u > 0.0 && u < 1.0)) throw grid_error("quantile level must lie in (0,1)");
    if (!mu.normalized()) throw grid_error("quantile requires a normalized measure");
    const auto m = mu.masses();
    double cdf = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
        cdf += m[j];
        if (cdf > u) return j;
    }
    return m.size() - 1;  // overflow mass counts as sitting at x_max
}

double quantile(const GridMeasure& mu, double u) {
    return static_cast<double>(quantile_site(mu, u)) * mu.step();
}

double tv_distance(const GridMeasure& a, const GridMeasure& b) {
    if (!steps_match(a, b)) throw grid_error("tv_distance: lattice steps differ");
    const auto ma = a.masses();
    const auto mb = b.masses();
    const std::size_t n = std::max(ma.size(), mb.size());
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double wa = j < ma.size() ? ma[j] : 0.0;
        const double wb = j < mb.size() ? mb[j] : 0.0;
        s += std::abs(wa - wb);
    }
    return s + std::abs(a.overflow() - b.overflow());
}

GridMeasure mix(double wa, const GridMeasure& a, double wb, const GridMeasure& b) {
    if (!steps_match(a, b)) throw grid_error("mix: lattice steps differ");
    if (wa < 0.0 || wb < 0.0) throw grid_error("mix weights must be nonnegative");
    const auto ma = a.masses();
    const auto mb = b.masses();
    std::vector<double> w(std::max(ma.size(), mb.size()), 0.0);
    for (std::size_t j = 0; j < ma.size(); ++j) w[j] += wa * ma[j];
    for (std::size_t j = 0; j < mb.size(); ++j) w[j] += wb * mb[j];
    return GridMeasure(a.step(), std::move(w), wa * a.overflow() + wb * b.overflow());
}

GridMeasure coarsen(const GridMeasure& mu, std::size_t factor) {
    if (factor == 0) throw grid_error("coarsen factor must be positive");
    if (factor == 1) return mu;
    if (mu.unit_cells() % factor != 0) {
        throw grid_error("coarsen factor must divide 1/h to keep the unit shift aligned");
    }
    const auto m = mu.masses();
    std::vector<double> w((m.size() + factor - 1) / factor, 0.0);
    for (std::size_t j = 0; j < m.size(); ++j) w[j / factor] += m[j];
    return GridMeasure(mu.step() * static_cast<double>(factor), std::move(w), mu.overflow());
}

} // namespace drflow
