#include <doctest.h>

#include <cmath>

#include "fermiloc/random.hpp"
#include "fermiloc/wegner.hpp"

using namespace fermiloc;

namespace {

McPlan small_plan(std::size_t trials) {
    McPlan p;
    p.trials = trials;
    p.base_seed = 3;
    p.scenario.b = 2.5;
    p.scenario.n_max = 24;
    p.omega = OmegaRule{2, 1, std::nullopt};
    p.s_grid = {1e-4, 1e-2, 1.0, 1e3};
    p.L = 1;
    return p;
}

}  // namespace

TEST_CASE("plans") {
    McPlan p = small_plan(17);
    p.threshold = 0.125;
    p.scenario.U.B = 3.0;
    const McPlan q = plan_from_json(nlohmann::json::parse(to_json(p).dump()));
    CHECK(to_json(q) == to_json(p));
    CHECK(q.threshold == 0.125);
    CHECK(q.trial_seed(4) == 7);

    const auto w = trial_omegas(p, 0);
    REQUIRE(w.size() == 3);
    CHECK(w[0][0] == 0.25);
    CHECK(w[1][0] == 0.75);
    CHECK(trial_omegas(p, 0)[2] == w[2]);
    CHECK(trial_omegas(p, 1)[2] != w[2]);
    p.omega.fixed = std::vector<double>{0.4};
    CHECK(trial_omegas(p, 9).size() == 1);
    p.omega.fixed = std::vector<double>{0.4, 0.1};
    CHECK_THROWS(trial_omegas(p, 0));
    CHECK(double_bits(1.0) == double_bits(1.0));
    CHECK(double_bits(1.0) != double_bits(std::nextafter(1.0, 2.0)));
}

TEST_CASE("spectral spacing estimate") {
    const auto x = FermiConfig::from_1d({0, 1}), y = FermiConfig::from_1d({20, 21});
    McPlan p = small_plan(40);
    const auto serial = wegner_estimate(p, x, y);
    p.workers = 4;
    const auto pooled = wegner_estimate(p, x, y);
    REQUIRE(serial.trials.size() == 40);
    for (std::size_t t = 0; t < 40; ++t) {
        CHECK(double_bits(serial.trials[t].value) == double_bits(pooled.trials[t].value));
        CHECK(serial.trials[t].value == wegner_trial(p, x, y, t).value);
    }
    for (std::size_t i = 1; i < serial.empirical.size(); ++i) CHECK(serial.empirical[i] >= serial.empirical[i - 1]);
    CHECK(serial.empirical.back() == 1.0);
    CHECK(std::isfinite(serial.log_fitted_constant));
    CHECK(wegner_log_bound(1, 2, 1, 100.0, 1.0) == 0.0);
    CHECK(wegner_log_bound(1, 2, 1, 100.0, 8.0) == doctest::Approx(2.0 * std::log(2.0)));
    CHECK_THROWS_AS(wegner_estimate(p, x, FermiConfig::from_1d({1, 2})), std::invalid_argument);
}

TEST_CASE("bad parameter sets") {
    McPlan p = small_plan(6);
    p.window_radius_cap = 12;
    p.max_pairs = 30;
    p.L = 2;
    p.threshold = 0.0;
    const auto none = theta_bad_measure(p, 0);
    CHECK(none.bad_measure == 0.0);
    CHECK(none.failures.empty());
    p.threshold = 1e9;
    const auto all = theta_bad_measure(p, 0);
    CHECK(all.plan["pairs"].get<std::size_t>() > 0);
    CHECK(all.bad_measure == 1.0);
    CHECK(all.failures.size() == 6);
    CHECK(all.reference_bound == doctest::Approx(std::pow(2.0, -2.5)));

    const auto pairs = separated_pairs(ball(FermiConfig::from_1d({0, 1}), 8).domain, 1, 1000);
    CHECK_FALSE(pairs.empty());
    const auto win = ball(FermiConfig::from_1d({0, 1}), 8).domain;
    for (const auto& pr : pairs) {
        CHECK_FALSE(graph_distance(win[pr.first], win[pr.second], 6));
        CHECK(weakly_separated(win[pr.first], win[pr.second], 1));
    }
}

TEST_CASE("separation at the initial scale") {
    McPlan p = small_plan(5);
    p.L = 2;
    p.window_radius_cap = 4;
    p.threshold = 0.0;
    const auto rep = sep_L0_estimate(p);
    CHECK(rep.bad_measure == 0.0);
    CHECK(rep.implication_violations == 0);
    p.threshold = 1e300;
    CHECK(sep_L0_estimate(p).bad_measure == 1.0);
    p.L = 1;
    CHECK_THROWS(sep_L0_estimate(p));
}

TEST_CASE("default thresholds") {
    McPlan p = small_plan(10);
    p.L = 2;
    p.window_radius_cap = 4;
    p.scenario.g = 1e12;
    const auto sep = sep_L0_estimate(p);
    CHECK(sep.bad_measure == 0.0);
    CHECK(sep.unresolved == 0);

    McPlan q = small_plan(10);
    q.L = 2;
    q.window_radius_cap = 12;
    q.max_pairs = 30;
    const auto bad = theta_bad_measure(q, 0);
    CHECK(bad.plan["pairs"].get<std::size_t>() > 0);
    CHECK(bad.unresolved == 0);
    CHECK(bad.bad_measure - bad.bad_half_width <= bad.reference_bound);
    for (const auto& t : bad.trials) CHECK(t.value >= bad.log2_threshold);
}

TEST_CASE("concentration of sample means") {
    const double one[] = {0.3};
    CHECK(rcm_exact_nu(one, 0.1, 1.0) == doctest::Approx(0.1));
    const double spread[] = {0.0, 0.95};
    CHECK(rcm_exact_nu(spread, 0.1, 1.0) == 1.0);
    const double pair[] = {0.2, 0.4};
    CHECK(rcm_exact_nu(pair, 0.2, 1.0) == doctest::Approx(0.25));
    CHECK_THROWS(rcm_exact_nu(std::span<const double>{}, 0.1, 1.0));

    RcmPlan p;
    p.q = 2;
    p.samples = 200000;
    p.bin_width = 0.05;
    p.seed = 4;
    const auto r = rcm_check(p);
    CHECK(r.passed());
    CHECK(r.cells.size() == 25);
    for (const auto& c : r.cells) {
        CHECK(c.bound == doctest::Approx(4 * c.eps * c.eps));
        CHECK(c.exceedance_exact <= c.bound + c.half_width + 0.01);
    }
}

TEST_CASE("eigenvalue shifts on a cube") {
    Scenario sc;
    sc.b = 0.5;
    sc.n_max = 16;
    sc.g = 2.0;
    const auto x = FermiConfig::from_1d({0, 1}), y = FermiConfig::from_1d({20, 21});
    const TorusPoint w({0.31});
    const auto zero = evc_pair_bound_check(sc, 5, w, x, y, 1, 0.0);
    CHECK(zero.passed);
    CHECK(zero.max_relative_fd_error == 0.0);
    const auto exact = evc_pair_bound_check(sc, 5, w, x, y, 0, 0.3);
    CHECK(exact.exact);
    CHECK(exact.passed);
    CHECK(exact.max_exact_error <= 1e-12);
    const auto fd = evc_pair_bound_check(sc, 5, w, x, y, 1, 1e-6);
    CHECK(fd.passed);
    CHECK(fd.max_relative_fd_error <= 0.05);
    // occupation of the witness cube is constant on each ball
    CHECK(fd.max_slope_first - fd.min_slope_first <= 1e-9);
    CHECK(fd.max_slope_second - fd.min_slope_second <= 1e-9);
    CHECK(std::abs(fd.min_slope_first - fd.min_slope_second) >= sc.g - 1e-9);
    CHECK_THROWS(evc_pair_bound_check(sc, 5, w, x, FermiConfig::from_1d({1, 2}), 1, 0.1));
}
