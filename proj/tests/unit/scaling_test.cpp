#include <doctest.h>

#include <cmath>

#include "drflow/dr_discrete.hpp"
#include "drflow/scaling.hpp"

using namespace drflow;

namespace {

CdrModel base_model(double h, double x_max, double horizon) {
    CdrModel m;
    m.a = 1.0;
    m.q = OffspringDistribution::from_weights({1.0});
    m.initial = InitialMeasureSpec::dirac(2.0);
    m.h = h;
    m.x_max = x_max;
    m.horizon = horizon;
    return m;
}

} // namespace

TEST_CASE("theorem bound evaluations") {
    // e^3 * (4/100) * 2, against an independent long-double evaluation
    const long double expected = std::exp(3.0L) * 0.08L;
    CHECK(std::abs(theorem_bound(1.0, 1.0, 1.0, 100.0, 0.0) -
                   static_cast<double>(expected)) <= 1e-12);
    CHECK(theorem_bound(1.0, 1.0, 1.0, 100.0, 0.0) == doctest::Approx(1.60684).epsilon(1e-4));

    // t = 0: 4/k + W0, no growth factor
    CHECK(theorem_bound(1.0, 1.0, 0.0, 64.0, 0.25) == doctest::Approx(4.0 / 64.0 + 0.25));
    // a = 0: same
    CHECK(theorem_bound(0.0, 2.0, 3.0, 64.0, 0.25) == doctest::Approx(4.0 / 64.0 + 0.25));
}

TEST_CASE("rescaled recursion with a = 0 is a pure shift") {
    CdrModel model = base_model(1.0 / 32, 8.0, 1.0);
    model.a = 0.0;
    const GridMeasure gamma = build_rescaled(model, 8, 0.75);  // floor(8 * 0.75) = 6 steps of 1/8
    const GridMeasure expected =
        pushforward_shift(discretize(model.initial, model.h, model.x_max), 6.0 / 8.0);
    CHECK(tv_distance(gamma, expected) <= 1e-15);
}

TEST_CASE("one rescaled step at k = 1 is a dr_step with alpha = a") {
    CdrModel model = base_model(1.0 / 16, 8.0, 1.0);
    model.a = 0.5;
    const GridMeasure via_scaling = build_rescaled(model, 1, 1.0);
    DiscreteModel dm;
    dm.alpha = model.a;
    dm.q = model.q;
    dm.initial = model.initial;
    dm.h = model.h;
    dm.x_max = model.x_max;
    const GridMeasure via_discrete = dr_step(discretize(dm.initial, dm.h, dm.x_max), dm);
    CHECK(tv_distance(via_scaling, via_discrete) == 0.0);
}

TEST_CASE("misaligned k is rejected with the admissible list") {
    const CdrModel model = base_model(1.0 / 16, 8.0, 1.0);
    try {
        build_rescaled(model, 3, 1.0);
        FAIL("expected grid_error");
    } catch (const grid_error& e) {
        const std::string what = e.what();
        CHECK(what.find("admissible") != std::string::npos);
        CHECK(what.find("16") != std::string::npos);
    }
}

TEST_CASE("verify_rate: bounds hold and W decreases in k") {
    const CdrModel model = base_model(1.0 / 256, 16.0, 0.5);
    const MeasureFlow flow = march_solve(model);
    const std::vector<std::size_t> ks{8, 16, 32};
    const std::vector<double> ts{0.25, 0.5};
    TransportOptions opt;
    opt.support_cap = 1 << 16;
    const ScalingReport report = verify_rate(model, ks, ts, flow, opt, 2);

    REQUIRE(report.rows.size() == 6);
    CHECK(report.all_pass);
    CHECK(report.monotone_in_k);
    CHECK(report.w0 <= 1e-12);
    for (const auto& row : report.rows) {
        CHECK(row.vacuous == (row.bound >= 1.0));
        CHECK(row.measured <= 1.0);
        CHECK(row.measured >= 0.0);
    }
    // measured W shrinks roughly linearly in 1/k
    REQUIRE(!report.slopes.empty());
    for (const auto& fit : report.slopes) {
        INFO("t=", fit.t, " slope=", fit.slope);
        CHECK(fit.slope > 0.3);
        CHECK(fit.slope < 2.0);
    }
}

TEST_CASE("scale_initial stretches positions by k") {
    const auto d = scale_initial(InitialMeasureSpec::dirac(2.0), 8);
    CHECK(d.x0 == doctest::Approx(16.0));
    const auto e = scale_initial(InitialMeasureSpec::exponential_mixture(0.2, 2.0), 4);
    CHECK(e.lambda == doctest::Approx(0.5));
    CHECK(e.p == doctest::Approx(0.2));
}

TEST_CASE("process marginals: trend and moment envelopes") {
    const CdrModel model = base_model(1.0 / 64, 16.0, 0.5);
    const MeasureFlow flow = march_solve(model);
    const std::vector<std::size_t> ks{4, 16};
    const std::vector<double> ts{0.5};
    const MarginalReport report = verify_process_marginals(model, ks, ts, flow, 5000, 4242, 4);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.trend_ok);
    CHECK(report.moments_ok);
    for (const auto& row : report.rows) {
        CHECK(row.distance <= 0.5);  // loose sanity; the real gate runs in acceptance
    }
}
