#pragma once

// Lattice-backed Borel measures on R+ and the primitive operations the
// rest of the engine composes: convolution, offspring mixture,
// shift-truncation pushforward, moments, CDF/quantile, total variation.
//
// The lattice always has 1/h integral so the unit shift x -> (x-1)+ is
// an exact translation by 1/h cells; mass leaving [0, x_max] is tracked
// in an explicit overflow bucket rather than dropped.

#include <cstddef>
#include <span>
#include <vector>

#include "drflow/errors.hpp"

namespace drflow {

inline constexpr double kMassTolerance = 1e-10;       // |total - 1| for the normalized flag
inline constexpr double kNegativeClamp = 1e-12;       // FP cancellation clamp in convolutions
inline constexpr double kOverflowBudget = 1e-6;       // runs abort past this much escaped mass
inline constexpr double kLatticeAlignTol = 1e-9;      // shift / step alignment checks

/// Nonnegative mass vector on the uniform lattice {j*h : j = 0..J}.
/// Immutable after construction; all operations are pure functions.
class GridMeasure {
public:
    /// Takes ownership of the mass vector. Masses in (-1e-12, 0) are
    /// clamped to zero; more negative entries are a hard error.
    GridMeasure(double step, std::vector<double> masses, double overflow = 0.0);

    static GridMeasure zero(double step, std::size_t sites);

    double step() const { return step_; }
    std::size_t sites() const { return masses_.size(); }   // J + 1
    double x_max() const { return static_cast<double>(masses_.size() - 1) * step_; }
    double site_x(std::size_t j) const { return static_cast<double>(j) * step_; }
    std::span<const double> masses() const { return masses_; }
    double mass_at(std::size_t j) const { return masses_[j]; }
    double overflow() const { return overflow_; }
    /// Sum of lattice masses plus overflow.
    double total_mass() const { return core_mass_ + overflow_; }
    double core_mass() const { return core_mass_; }
    /// True when |total_mass - 1| <= 1e-10.
    bool normalized() const { return normalized_; }

    /// Number of lattice cells per unit length (= 1/h, integral by construction).
    std::size_t unit_cells() const { return unit_cells_; }

    /// Largest site index with nonzero mass (0 when empty).
    std::size_t support_end() const;
    /// Smallest site index with nonzero mass.
    std::size_t support_begin() const;
    std::size_t nonzero_count() const;

    /// Returns a copy rescaled so total_mass == 1. Errors when total is
    /// not positive.
    GridMeasure renormalized() const;

private:
    double step_;
    std::size_t unit_cells_;
    std::vector<double> masses_;
    double overflow_;
    double core_mass_;
    bool normalized_;
};

/// Finite-support offspring law q on {1,..,K} with cached first and
/// second moments and the mass generating function g(z) = sum_k q_k z^{k+1}.
class OffspringDistribution {
public:
    /// weights[k-1] = q_k. Input is renormalized to sum exactly 1; the
    /// size of the adjustment is retained for reporting.
    static OffspringDistribution from_weights(std::vector<double> weights);

    std::span<const double> weights() const { return weights_; }
    std::size_t max_offspring() const { return weights_.size(); }
    double m1() const { return m1_; }
    double m2() const { return m2_; }
    /// |1 - sum of the weights as given| before renormalization.
    double renormalization_delta() const { return renorm_delta_; }

    /// g(z) = sum_k q_k z^{k+1}; the mass equation's nonlinearity.
    double generating_function(double z) const;

    /// Recomputes m1/m2 from the weights and checks them against the
    /// cache; used by invariant tests.
    bool moments_consistent(double tol = 1e-12) const;

private:
    OffspringDistribution() = default;
    std::vector<double> weights_;
    double m1_ = 0.0;
    double m2_ = 0.0;
    double renorm_delta_ = 0.0;
};

/// Description of the initial measure mu_0 = p*delta_0 + (1-p)*theta.
struct InitialMeasureSpec {
    enum class Kind { dirac, two_atom, exponential_mixture, lattice_law };

    Kind kind = Kind::dirac;
    double p = 0.0;          // weight of the atom at 0 (mixture kinds)
    double x0 = 1.0;         // position of the non-zero atom (dirac / two_atom)
    double lambda = 1.0;     // rate of the exponential component
    std::vector<double> lattice_weights;  // weights on {1,2,...} (lattice_law)

    static InitialMeasureSpec dirac(double x0);
    static InitialMeasureSpec two_atom(double p, double x0);
    static InitialMeasureSpec exponential_mixture(double p, double lambda);
    static InitialMeasureSpec lattice_law(std::vector<double> weights, double p = 0.0);
};

/// Realizes an initial spec on the lattice. Atoms snap to the nearest
/// site; density kinds get exact per-cell mass over [x_j - h/2, x_j + h/2);
/// tail mass past x_max is lumped into overflow and must stay within the
/// overflow budget.
GridMeasure discretize(const InitialMeasureSpec& spec, double h, double x_max);

/// Exact discrete convolution. Mass pushed past the larger input's
/// x_max, and every overflow interaction, accumulates into overflow, so
/// total mass is conserved by construction. Dispatches between a sparse
/// direct sum and an FFT fast path on a deterministic cost estimate.
GridMeasure convolve(const GridMeasure& mu, const GridMeasure& nu);

/// Offspring mixture mu^q = sum_k q_k mu^{*k} by running convolution powers.
GridMeasure q_mixture(const GridMeasure& mu, const OffspringDistribution& q);

/// Pushforward under T_a(x) = (x-a)+ for lattice-aligned a >= 0: mass at
/// sites below a collapses onto the origin, everything else translates.
/// Overflow is left untouched.
GridMeasure pushforward_shift(const GridMeasure& mu, double a);

/// sum_j x_j^k w_j for k in {0,1,2}; overflow contributes x_max^k * overflow,
/// making the result a lower bound whenever overflow > 0.
double moment(const GridMeasure& mu, int k);

/// Right-continuous inverse of the CDF: inf{ x_j : G(x_j) > u }. Overflow
/// counts as mass at x_max. u must lie in (0,1).
double quantile(const GridMeasure& mu, double u);
/// Same, as a site index.
std::size_t quantile_site(const GridMeasure& mu, double u);

/// Total variation: sum_j |w_j - v_j| + |overflow difference|.
double tv_distance(const GridMeasure& mu, const GridMeasure& nu);

/// Convex combination wa*a + wb*b (wa, wb >= 0). Steps must match.
GridMeasure mix(double wa, const GridMeasure& a, double wb, const GridMeasure& b);

/// Aggregates blocks of `factor` cells onto a lattice with step
/// factor*h (mass at site j moves to site j/factor, displacement
/// < factor*h). 1/(factor*h) must remain integral.
GridMeasure coarsen(const GridMeasure& mu, std::size_t factor);

namespace detail {
/// Lattice cell count for a shift amount; rejects non-aligned shifts.
std::size_t aligned_cells(double amount, double step, const char* what);
/// q_mixture without the normalization precondition; the Picard iterates
/// are genuine sub-probabilities and still need the mixture.
GridMeasure q_mixture_raw(const GridMeasure& mu, const OffspringDistribution& q);
}

} // namespace drflow
