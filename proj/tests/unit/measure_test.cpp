#include <doctest.h>

#include <cmath>

#include "drflow/grid_measure.hpp"
#include "drflow/rng.hpp"
#include "test_util.hpp"

using namespace drflow;

namespace {

GridMeasure dirac_at(double h, std::size_t sites, std::size_t j) {
    std::vector<double> w(sites, 0.0);
    w[j] = 1.0;
    return GridMeasure(h, std::move(w));
}

} // namespace

TEST_CASE("discretize places atoms on the lattice") {
    const GridMeasure mu = discretize(InitialMeasureSpec::dirac(2.0), 0.5, 8.0);
    CHECK(mu.mass_at(4) == 1.0);
    CHECK(mu.normalized());

    const GridMeasure pure0 = discretize(InitialMeasureSpec::two_atom(1.0, 3.0), 0.5, 8.0);
    CHECK(pure0.mass_at(0) == 1.0);
}

TEST_CASE("discretize exponential: cell-exact mass and first moment") {
    const double h = 0.01;
    const GridMeasure mu = discretize(InitialMeasureSpec::exponential_mixture(0.0, 1.0), h, 40.0);
    CHECK(std::abs(mu.total_mass() - 1.0) <= 1e-10);
    CHECK(std::abs(moment(mu, 1) - 1.0) <= 2.0 * h);
}

TEST_CASE("discretize rejects bad grids and truncated tails") {
    CHECK_THROWS_AS(discretize(InitialMeasureSpec::dirac(1.0), 0.3, 8.0), grid_error);
    CHECK_THROWS_AS(discretize(InitialMeasureSpec::exponential_mixture(0.0, 1.0), 0.5, 8.0),
                    grid_error);  // x_max < 10/lambda
    // x_max = 10/lambda passes the precondition but the tail overflow
    // exceeds the budget
    CHECK_THROWS_AS(discretize(InitialMeasureSpec::exponential_mixture(0.0, 1.0), 0.5, 10.0),
                    tail_overflow_error);
}

TEST_CASE("convolution identities") {
    const double h = 0.5;
    const GridMeasure d0 = dirac_at(h, 16, 0);
    const GridMeasure d1 = dirac_at(h, 16, 2);  // atom at 1.0

    CounterRng rng(7, 0);
    const GridMeasure mu = testing::random_measure(rng, h, 12, 6);
    CHECK(tv_distance(convolve(d0, mu), mu) <= 1e-15);

    const GridMeasure two = convolve(d1, d1);
    CHECK(two.mass_at(4) == doctest::Approx(1.0).epsilon(1e-14));

    std::vector<double> half{0.5, 0.5};
    half.resize(8, 0.0);
    const GridMeasure bern(h, std::move(half));
    const GridMeasure sq = convolve(bern, bern);
    CHECK(sq.mass_at(0) == doctest::Approx(0.25));
    CHECK(sq.mass_at(1) == doctest::Approx(0.5));
    CHECK(sq.mass_at(2) == doctest::Approx(0.25));

    CHECK_THROWS_AS(convolve(dirac_at(0.5, 8, 1), dirac_at(0.25, 8, 1)), grid_error);
}

TEST_CASE("convolution matches the direct double-sum oracle") {
    // dense measures force the FFT path; the oracle is the O(J^2) sum
    CounterRng rng(11, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t sites = 512;
        std::vector<double> wa(sites), wb(sites);
        double sa = 0.0, sb = 0.0;
        for (std::size_t j = 0; j < sites; ++j) {
            wa[j] = rng.uniform();
            wb[j] = rng.uniform();
            sa += wa[j];
            sb += wb[j];
        }
        for (std::size_t j = 0; j < sites; ++j) {
            wa[j] /= sa;
            wb[j] /= sb;
        }
        const GridMeasure a(1.0 / 256, wa), b(1.0 / 256, wb);
        const GridMeasure fast = convolve(a, b);
        CHECK(fast.nonzero_count() > 0);

        std::vector<double> direct(sites, 0.0);
        double clipped = 0.0;
        for (std::size_t i = 0; i < sites; ++i) {
            for (std::size_t j = 0; j < sites; ++j) {
                if (i + j < sites) {
                    direct[i + j] += wa[i] * wb[j];
                } else {
                    clipped += wa[i] * wb[j];
                }
            }
        }
        for (std::size_t j = 0; j < sites; ++j) {
            CHECK(std::abs(fast.mass_at(j) - direct[j]) <= 1e-12);
        }
        CHECK(std::abs(fast.overflow() - clipped) <= 1e-12);
        CHECK(std::abs(fast.total_mass() - 1.0) <= 1e-10);
    }
}

TEST_CASE("q_mixture basics") {
    const double h = 1.0;
    const GridMeasure d1 = dirac_at(h, 8, 1);

    const auto q1 = OffspringDistribution::from_weights({1.0});
    CHECK(tv_distance(q_mixture(d1, q1), d1) == 0.0);

    const auto q2 = OffspringDistribution::from_weights({0.0, 1.0});
    CHECK(q_mixture(d1, q2).mass_at(2) == doctest::Approx(1.0));

    const auto qh = OffspringDistribution::from_weights({0.5, 0.5});
    const GridMeasure mixed = q_mixture(d1, qh);
    CHECK(mixed.mass_at(1) == doctest::Approx(0.5));
    CHECK(mixed.mass_at(2) == doctest::Approx(0.5));
}

TEST_CASE("q_mixture first moment scales by m1") {
    CounterRng rng(13, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const GridMeasure mu = testing::random_measure(rng, 0.25, 128, 8, 24);
        const auto q = testing::random_offspring(rng, 4);
        const GridMeasure mixed = q_mixture(mu, q);
        CHECK(std::abs(moment(mixed, 1) - q.m1() * moment(mu, 1)) <= 1e-8);
        CHECK(std::abs(mixed.total_mass() - 1.0) <= 1e-9);
    }
}

TEST_CASE("pushforward_shift truncates at the origin") {
    const double h = 0.5;
    std::vector<double> w(8, 0.0);
    w[1] = 0.5;  // 0.5 at x = 0.5
    w[3] = 0.5;  // 0.5 at x = 1.5
    const GridMeasure mu(h, std::move(w));

    const GridMeasure shifted = pushforward_shift(mu, 1.0);
    CHECK(shifted.mass_at(0) == doctest::Approx(0.5));
    CHECK(shifted.mass_at(1) == doctest::Approx(0.5));

    CHECK(tv_distance(pushforward_shift(mu, 0.0), mu) == 0.0);
    CHECK(pushforward_shift(dirac_at(1.0, 8, 4), 1.0).mass_at(3) == 1.0);
    CHECK_THROWS_AS(pushforward_shift(mu, 0.3), grid_error);
}

TEST_CASE("pushforward properties: moment never grows, origin mass never shrinks") {
    CounterRng rng(17, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const GridMeasure mu = testing::random_measure(rng, 0.5, 32, 10);
        const GridMeasure shifted = pushforward_shift(mu, 1.0);
        CHECK(moment(shifted, 1) <= moment(mu, 1) + 1e-12);
        CHECK(shifted.mass_at(0) >= mu.mass_at(0) - 1e-15);
        CHECK(std::abs(shifted.total_mass() - mu.total_mass()) <= 1e-12);
    }
}

TEST_CASE("moments") {
    CHECK(moment(dirac_at(1.0, 8, 2), 1) == doctest::Approx(2.0));
    std::vector<double> w(8, 0.0);
    w[0] = 0.5;
    w[2] = 0.5;
    const GridMeasure mu(1.0, std::move(w));
    CHECK(moment(mu, 2) == doctest::Approx(2.0));
    CHECK_THROWS_AS(moment(mu, 3), grid_error);
}

TEST_CASE("quantile: right-continuous inverse") {
    std::vector<double> w(8, 0.0);
    w[0] = 0.5;
    w[2] = 0.5;
    const GridMeasure mu(1.0, std::move(w));
    CHECK(quantile(mu, 0.25) == 0.0);
    CHECK(quantile(mu, 0.5) == 2.0);  // G(0) = 0.5 is not > 0.5
    CHECK(quantile(mu, 0.75) == 2.0);

    const GridMeasure d = dirac_at(0.5, 16, 6);
    for (double u : {0.01, 0.3, 0.77, 0.999}) CHECK(quantile(d, u) == 3.0);
    CHECK_THROWS_AS(quantile(mu, 0.0), grid_error);
    CHECK_THROWS_AS(quantile(mu, 1.0), grid_error);
}

TEST_CASE("quantile pushforward of Uniform(0,1) reproduces the measure") {
    CounterRng rng(23, 0);
    const GridMeasure mu = testing::random_measure(rng, 0.25, 40, 12);
    std::vector<double> counts(mu.sites(), 0.0);
    const std::size_t n = 1000000;
    double prev = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform_open();
        counts[quantile_site(mu, u)] += 1.0;
        (void)prev;
    }
    double tv = 0.0;
    for (std::size_t j = 0; j < mu.sites(); ++j) {
        tv += std::abs(counts[j] / static_cast<double>(n) - mu.mass_at(j));
    }
    CHECK(tv <= 0.01);

    // monotone in u
    double last = 0.0;
    for (double u = 0.05; u < 1.0; u += 0.05) {
        const double x = quantile(mu, u);
        CHECK(x >= last);
        last = x;
    }
}

TEST_CASE("tv distance") {
    const GridMeasure d0 = dirac_at(0.5, 8, 0);
    const GridMeasure dh = dirac_at(0.5, 8, 1);
    CHECK(tv_distance(d0, d0) == 0.0);
    CHECK(tv_distance(d0, dh) == 2.0);
    std::vector<double> w(8, 0.0);
    w[0] = 0.5;
    w[1] = 0.5;
    CHECK(tv_distance(GridMeasure(0.5, std::move(w)), d0) == doctest::Approx(1.0));
}

TEST_CASE("coarsen conserves mass and moves atoms less than one coarse cell") {
    CounterRng rng(29, 0);
    const GridMeasure mu = testing::random_measure(rng, 0.25, 64, 16);
    const GridMeasure c = coarsen(mu, 4);
    CHECK(c.step() == doctest::Approx(1.0));
    CHECK(std::abs(c.total_mass() - mu.total_mass()) <= 1e-12);
    CHECK(std::abs(moment(c, 1) - moment(mu, 1)) <= 1.0);
    CHECK_THROWS_AS(coarsen(mu, 3), grid_error);  // 3 does not divide 1/h = 4
}

TEST_CASE("offspring distribution moments and generating function") {
    const auto q = OffspringDistribution::from_weights({0.25, 0.5, 0.25});
    CHECK(q.m1() == doctest::Approx(2.0));
    CHECK(q.m2() == doctest::Approx(4.5));
    CHECK(q.moments_consistent());
    // g(z) = sum q_k z^{k+1}
    const double z = 0.7;
    const double expected = 0.25 * z * z + 0.5 * z * z * z + 0.25 * z * z * z * z;
    CHECK(q.generating_function(z) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(q.generating_function(1.0) == doctest::Approx(1.0));

    const auto renorm = OffspringDistribution::from_weights({2.0, 2.0});
    CHECK(renorm.weights()[0] == doctest::Approx(0.5));
    CHECK(renorm.renormalization_delta() == doctest::Approx(3.0));
}

TEST_CASE("negative masses: clamp below threshold, error above") {
    std::vector<double> ok{1.0, -1e-13};
    CHECK(GridMeasure(1.0, std::move(ok)).mass_at(1) == 0.0);
    std::vector<double> bad{1.0, -1e-9};
    CHECK_THROWS_AS(GridMeasure(1.0, std::move(bad)), numeric_error);
}
