#include <doctest.h>

#include <cmath>

#include "drflow/dr_discrete.hpp"
#include "drflow/rng.hpp"
#include "test_util.hpp"

using namespace drflow;

namespace {

DiscreteModel classical_from(double x0, double x_max) {
    DiscreteModel m;
    m.alpha = 1.0;
    m.q = OffspringDistribution::from_weights({1.0});
    m.initial = InitialMeasureSpec::dirac(x0);
    m.h = 1.0;
    m.x_max = x_max;
    return m;
}

} // namespace

TEST_CASE("classical Dirac dynamics: x_{n+1} = 2 x_n - 1") {
    const DiscreteModel model = classical_from(2.0, (1 << 10) + 2.0);
    const auto trajectory = evolve(model, 8);
    for (std::size_t n = 0; n < trajectory.size(); ++n) {
        const auto site = static_cast<std::size_t>((1u << n) + 1u);
        CHECK(trajectory[n].mass_at(site) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(trajectory[n].nonzero_count() == 1);
    }
    const auto proxy = free_energy_proxy(trajectory, model);
    for (std::size_t n = 0; n < proxy.size(); ++n) {
        CHECK(proxy[n] == doctest::Approx(1.0 + std::pow(2.0, -static_cast<double>(n)))
                              .epsilon(1e-12));
    }
}

TEST_CASE("delta_1 is the classical fixed point") {
    const DiscreteModel model = classical_from(1.0, 16.0);
    const auto trajectory = evolve(model, 10);
    for (const auto& mu : trajectory) {
        CHECK(mu.mass_at(1) == doctest::Approx(1.0).epsilon(1e-14));
    }
    const auto proxy = free_energy_proxy(trajectory, model);
    CHECK(proxy[10] == doctest::Approx(std::pow(2.0, -10.0)).epsilon(1e-12));
}

TEST_CASE("alpha = 0 degenerates to the pure shift") {
    DiscreteModel model = classical_from(2.0, 16.0);
    model.alpha = 0.0;
    model.initial = InitialMeasureSpec::two_atom(0.25, 3.0);
    const auto trajectory = evolve(model, 3);
    const GridMeasure expected = pushforward_shift(trajectory[0], 2.0);
    CHECK(tv_distance(trajectory[2], expected) <= 1e-15);
}

TEST_CASE("one step against direct atom enumeration") {
    // alpha=0.5, q_1=1, mu_0 = (1/2) delta_0 + (1/2) delta_2
    DiscreteModel model = classical_from(2.0, 16.0);
    model.alpha = 0.5;
    model.initial = InitialMeasureSpec::two_atom(0.5, 2.0);
    const auto trajectory = evolve(model, 1);

    // independent enumeration of the finitely many mass paths
    std::vector<double> expected(17, 0.0);
    const std::vector<std::pair<double, double>> atoms{{0.0, 0.5}, {2.0, 0.5}};
    for (const auto& [x, w] : atoms) {
        expected[static_cast<std::size_t>(std::max(x - 1.0, 0.0))] += 0.5 * w;
    }
    for (const auto& [x1, w1] : atoms) {
        for (const auto& [x2, w2] : atoms) {
            expected[static_cast<std::size_t>(std::max(x1 + x2 - 1.0, 0.0))] += 0.5 * w1 * w2;
        }
    }
    const GridMeasure oracle(1.0, std::move(expected));
    CHECK(tv_distance(trajectory[1], oracle) <= 1e-15);
}

TEST_CASE("moment recursions hold per step on random models") {
    CounterRng rng(211, 0);
    for (int trial = 0; trial < 10; ++trial) {
        DiscreteModel model;
        model.alpha = rng.uniform();
        model.q = testing::random_offspring(rng, 3);
        model.initial = InitialMeasureSpec::two_atom(0.3 * rng.uniform(), 1.0 + 2.0 * rng.uniform());
        model.h = 0.5;
        model.x_max = 128.0;
        const auto trajectory = evolve(model, 4);
        for (std::size_t n = 0; n + 1 < trajectory.size(); ++n) {
            const double m1 = moment(trajectory[n], 1);
            const double m1_next = moment(trajectory[n + 1], 1);
            CHECK(m1_next <= (1.0 + model.alpha * model.q.m1()) * m1 + 1e-8);
            const double m2 = moment(trajectory[n], 2);
            const double m2_next = moment(trajectory[n + 1], 2);
            CHECK(m2_next <=
                  (1.0 + 2.0 * model.alpha * model.q.m1() + model.alpha * model.q.m2()) * m2 +
                      1e-8);
        }
        const auto proxy = free_energy_proxy(trajectory, model);
        for (std::size_t n = 0; n + 1 < proxy.size(); ++n) {
            CHECK(proxy[n + 1] <= proxy[n] + 1e-9);
        }
    }
}

TEST_CASE("sustainability probability") {
    CHECK(sustainability(discretize(InitialMeasureSpec::two_atom(1.0, 2.0), 1.0, 8.0)) == 0.0);
    CHECK(sustainability(discretize(InitialMeasureSpec::dirac(2.0), 1.0, 8.0)) == 1.0);
    CHECK(sustainability(discretize(InitialMeasureSpec::two_atom(0.5, 2.0), 1.0, 8.0)) ==
          doctest::Approx(0.5));
}

TEST_CASE("phase scan: monotone proxy, labeled heuristic bracket") {
    DiscreteModel model = classical_from(2.0, 300.0);
    const std::vector<double> p_grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    const auto scan =
        phase_scan(InitialMeasureSpec::dirac(2.0), p_grid, 8, model, 1e-4, 1e-2, 2);

    REQUIRE(scan.rows.size() == p_grid.size());
    CHECK(scan.rows.back().proxy == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t i = 0; i + 1 < scan.rows.size(); ++i) {
        CHECK(scan.rows[i + 1].proxy <= scan.rows[i].proxy + 1e-9);
    }
    CHECK(scan.n == 8);
    CHECK(scan.bracket_hi - scan.bracket_lo <= 1e-2 + 1e-12);
    CHECK(scan.p_c_estimate >= 0.0);
    CHECK(scan.p_c_estimate <= 1.0);
}

TEST_CASE("evolve aborts with the step index when mass escapes") {
    DiscreteModel model = classical_from(2.0, 8.0);  // far too short for 2^n growth
    try {
        evolve(model, 6);
        FAIL("expected tail_overflow_error");
    } catch (const tail_overflow_error& e) {
        CHECK(e.step() >= 1);
    }
}
