#include <cmath>
#include <random>

#include "doctest.h"
#include "icgkit/error.hpp"
#include "icgkit/kinetics.hpp"
#include "ode_oracle.hpp"

using namespace icgkit;

TEST_CASE("zero gain gives the background everywhere") {
    const KineticParams p{0.8, 10.0, 30.0, 0.0, 0.3, 5.0};
    const auto s = simulate(p, uniform_grid(0.0, 0.5, 200));
    for (double v : s.values) CHECK(v == 0.3);
    CHECK(s.valid_count() == 200);
}

TEST_CASE("constant input settles at unit DC gain") {
    const KineticParams p{1.0, 10.0, 1e9, 0.5, 0.1, 0.0};
    const auto s = simulate(p, uniform_grid(0.0, 1.0, 1001));
    CHECK(s.values.back() == doctest::Approx(0.6).epsilon(1e-6));
    for (double d : {0.3, 1.0, 2.5}) {
        const KineticParams q{d, 7.0, 1e8, 1.3, 0.2, 3.0};
        // the slow overdamped mode has time constant tau (D + sqrt(D^2 - 1)), roughly 2 D tau
        const double t_end = 3.0 + 20.0 * 7.0 * std::max({1.0, 1.0 / d, 2.0 * d});
        const auto y = simulate(q, uniform_grid(0.0, 0.5, static_cast<std::size_t>(t_end / 0.5) + 1));
        CHECK(std::abs(y.values.back() - 1.5) < 1e-3);
    }
}

TEST_CASE("y(30) matches a fine RK4 integration") {
    const KineticParams p{0.5, 15.0, 40.0, 1.0, 0.0, 10.0};
    const double expect = oracle::rk4_at(p, 30.0, 1e-3);
    const auto s = simulate(p, std::vector<double>{0.0, 10.0, 20.0, 30.0});
    CHECK(std::abs(s.values[3] - expect) < 1e-6);
    CHECK(s.values[1] == 0.0);
}

TEST_CASE("closed form agrees with RK4 across damping regimes") {
    std::mt19937_64 rng(11);
    auto logu = [&](double lo, double hi) {
        return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
    };
    for (int i = 0; i < 12; ++i) {
        const KineticParams p{logu(0.2, 3.0), logu(2.0, 60.0), logu(5.0, 200.0), logu(0.1, 2.0),
                              0.05, 4.0};
        const auto grid = uniform_grid(0.0, 1.0, 301);
        const auto s = simulate(p, grid);
        const auto ref = oracle::rk4_on_grid(p, grid, 1e-3);
        double worst = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            worst = std::max(worst, std::abs(s.values[k] - ref[k]));
        }
        CHECK(worst < 1e-6);
    }
    SUBCASE("critical, weakly and strongly overdamped") {
        for (double d : {1.0, 1.0 + 1e-9, 1.0 - 1e-9, 1.02, 8.0, 40.0}) {
            const KineticParams p{d, 3.0, 50.0, 1.0, 0.0, 2.0};
            const auto grid = uniform_grid(0.0, 0.5, 601);
            const auto s = simulate(p, grid);
            const auto ref = oracle::rk4_on_grid(p, grid, 1e-3);
            for (std::size_t k = 0; k < grid.size(); k += 7) {
                CHECK(std::abs(s.values[k] - ref[k]) < 1e-6);
            }
        }
    }
    SUBCASE("resonant forcing") {
        // tau/tau_i = D - sqrt(D^2 - 1) zeroes the particular-solution denominator
        const KineticParams p{1.25, 10.0, 20.0, 0.7, 0.0, 1.0};
        CHECK(near_resonance(p));
        const auto grid = uniform_grid(0.0, 0.5, 401);
        const auto s = simulate(p, grid);
        const auto ref = oracle::rk4_on_grid(p, grid, 1e-3);
        for (std::size_t k = 0; k < grid.size(); k += 5) {
            CHECK(std::abs(s.values[k] - ref[k]) < 1e-6);
        }
    }
}

TEST_CASE("simulate continuity at the delay and input checks") {
    const KineticParams p{0.4, 8.0, 25.0, 1.0, 0.2, 10.0};
    const auto s = simulate(p, uniform_grid(0.0, 0.1, 300));
    CHECK(s.values[100] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(std::abs(s.values[101] - 0.2) < 1e-4);
    CHECK_THROWS_AS(simulate(p, std::vector<double>{0.0, 1.0, 3.0}), DomainError);
    CHECK_THROWS_AS(simulate(p, std::vector<double>{0.0, 0.0}), DomainError);
    KineticParams bad = p;
    bad.tau_s = -1.0;
    CHECK_THROWS_AS(simulate(bad, uniform_grid(0.0, 1.0, 5)), DomainError);
    bad = p;
    bad.gain = std::nan("");
    CHECK_THROWS_AS(simulate(bad, uniform_grid(0.0, 1.0, 5)), DomainError);
}

TEST_CASE("jacobian values match simulate and finite differences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        const KineticParams p{0.2 + 2.5 * u(rng), 3.0 + 30 * u(rng), 10 + 150 * u(rng),
                              0.2 + u(rng), 0.1 * u(rng), 2 + 10 * u(rng)};
        const auto grid = uniform_grid(0.0, 0.5, 400);
        const auto jac = simulate_with_jacobian(p, grid);
        const auto s = simulate(p, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(jac.values[k] == doctest::Approx(s.values[k]).epsilon(1e-13));
        }
        CHECK(jacobian_check(p, grid) < 1e-4);
    }
    const KineticParams zero_gain{0.7, 12.0, 40.0, 0.0, 0.1, 5.0};
    const auto grid = uniform_grid(0.0, 0.5, 400);
    const double dev = jacobian_check(zero_gain, grid);
    CHECK(dev < 1e-4);
    CHECK(jacobian_check(zero_gain, grid) == dev);
    // with K = 0 the gain column is the unit-gain response itself
    const auto jac = simulate_with_jacobian(zero_gain, grid);
    KineticParams unit = zero_gain;
    unit.gain = 1.0;
    unit.background = 0.0;
    const auto unit_resp = simulate(unit, grid);
    for (std::size_t k = 0; k < grid.size(); k += 13) {
        CHECK(jac.d[k][kGain] == doctest::Approx(unit_resp.values[k]).epsilon(1e-12));
    }
}

TEST_CASE("initial_guess") {
    SUBCASE("formula on a constructed curve") {
        std::vector<double> v;
        for (int k = 0; k <= 120; ++k) {
            const double t = k;
            double y = 0.1;
            if (t >= 10 && t <= 50) y = 0.2 + 0.7 * (t - 10) / 40;
            if (t > 50) y = 0.9 - 0.005 * (t - 50);
            v.push_back(y);
        }
        LandmarkConfig lc;
        lc.smooth_window_s = 0.0;
        const KineticParams g = initial_guess(TimeSeries::from_values(v, 1.0), lc);
        CHECK(g.delay_s == 10.0);
        CHECK(g.gain == doctest::Approx(0.8));
        CHECK(g.background == doctest::Approx(0.1));
        CHECK(g.tau_s == doctest::Approx(20.0));
        CHECK(g.tau_i_s == doctest::Approx(40.0));
        CHECK(g.damping == 1.0);
    }
    SUBCASE("constant series propagates the landmark error") {
        CHECK_THROWS_AS(initial_guess(TimeSeries::from_values(std::vector<double>(60, 0.4), 1.0)),
                        DomainError);
    }
    SUBCASE("guess always satisfies the parameter invariants") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int checked = 0;
        for (int seed = 0; seed < 1000; ++seed) {
            const KineticParams p{0.2 + 2.0 * u(rng), 2.0 + 30 * u(rng), 5 + 200 * u(rng),
                                  0.1 + u(rng), 0.2 * u(rng), 5 + 15 * u(rng)};
            auto s = simulate(p, uniform_grid(0.0, 0.5, 240));
            std::normal_distribution<double> noise(0.0, 0.01 * p.gain);
            for (auto& v : s.values) v = std::max(0.0, v + noise(rng));
            try {
                const KineticParams g = initial_guess(s);
                CHECK_NOTHROW(g.validate());
                CHECK(g.damping >= 1e-3);
                CHECK(g.tau_s >= 1e-3);
                CHECK(g.tau_i_s >= 1e-3);
                CHECK(g.gain >= 1e-3);
                ++checked;
            } catch (const DomainError&) {
                // a landmark failure is an allowed outcome, not an invalid guess
            }
        }
        CHECK(checked > 900);
    }
}

TEST_CASE("fit recovers noiseless parameters") {
    const KineticParams truths[] = {
        {0.5, 15.0, 40.0, 1.0, 0.1, 10.0},
        {0.3, 8.0, 120.0, 0.6, 0.05, 6.0},
        {0.75, 25.0, 60.0, 1.2, 0.15, 15.0},
    };
    for (const auto& p : truths) {
        const auto s = simulate(p, uniform_grid(0.0, 1.0 / 30.0, 9000));
        const FitResult r = fit(s);
        CHECK(r.rmse < 1e-8);
        CHECK(r.converged);
        CHECK(r.params.damping == doctest::Approx(p.damping).epsilon(0.01));
        CHECK(r.params.tau_s == doctest::Approx(p.tau_s).epsilon(0.01));
        CHECK(r.params.tau_i_s == doctest::Approx(p.tau_i_s).epsilon(0.01));
        CHECK(r.params.gain == doctest::Approx(p.gain).epsilon(0.01));
        CHECK(r.n_iterations <= FitConfig{}.max_iterations);
    }
}

TEST_CASE("overdamped rates can be exchanged without changing the curve") {
    // With D > 1 the response is a sum of three exponentials; swapping the input
    // decay with one of the system rates gives another exact solution.
    const KineticParams p{2.0, 5.0, 30.0, 1.0, 0.0, 5.0};
    const double r_fast = (p.damping + std::sqrt(p.damping * p.damping - 1)) / p.tau_s;
    const double r_slow = (p.damping - std::sqrt(p.damping * p.damping - 1)) / p.tau_s;
    // new system rates {1/tau_i, r_fast}, new input rate r_slow
    const double a = 1.0 / p.tau_i_s;
    KineticParams q = p;
    q.tau_s = 1.0 / std::sqrt(a * r_fast);
    q.damping = 0.5 * (a + r_fast) * q.tau_s;
    q.tau_i_s = 1.0 / r_slow;
    // y is K / tau^2 times a convolution that is symmetric in the three rates
    q.gain = p.gain * (q.tau_s * q.tau_s) / (p.tau_s * p.tau_s);
    const auto grid = uniform_grid(0.0, 0.5, 600);
    const auto y1 = simulate(p, grid);
    const auto y2 = simulate(q, grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        worst = std::max(worst, std::abs(y1.values[k] - y2.values[k]));
    }
    CHECK(worst < 1e-9);
    CHECK(std::abs(q.tau_i_s - p.tau_i_s) > 1.0);
}

TEST_CASE("fit edge cases") {
    SUBCASE("constant series with a forced start") {
        const auto s = TimeSeries::from_values(std::vector<double>(300, 0.4), 0.5);
        FitConfig cfg;
        cfg.start = KineticParams{1.0, 10.0, 20.0, 0.2, 0.3, 20.0};
        const FitResult r = fit(s, cfg);
        CHECK(r.params.gain <= 1e-3);
        CHECK(r.params.background == doctest::Approx(0.4).epsilon(1e-6));
        CHECK(r.rmse < 1e-6);
    }
    SUBCASE("too few valid samples") {
        auto s = simulate({0.5, 10, 30, 1, 0, 2}, uniform_grid(0.0, 1.0, 60));
        for (std::size_t k = 19; k < s.size(); ++k) s.valid[k] = 0;
        CHECK_THROWS_AS(fit(s), DomainError);
    }
    SUBCASE("truncation is reported and the fit is deterministic") {
        const KineticParams p{0.5, 15.0, 40.0, 1.0, 0.1, 10.0};
        auto s = simulate(p, uniform_grid(0.0, 0.25, 1200));
        std::mt19937_64 rng(3);
        std::normal_distribution<double> noise(0.0, 0.01);
        for (auto& v : s.values) v = std::max(0.0, v + noise(rng));
        FitConfig cfg;
        cfg.truncate_at_s = 100.0;
        cfg.seed = 42;
        const FitResult a = fit(s, cfg);
        const FitResult b = fit(s, cfg);
        CHECK(a.truncation_time_s == doctest::Approx(100.0));
        CHECK(a.params == b.params);
        CHECK(a.rmse == b.rmse);
        const FitResult full = fit(s);
        CHECK(full.truncation_time_s == doctest::Approx(299.75));
    }
}
