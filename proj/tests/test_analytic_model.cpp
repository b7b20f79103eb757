#include <cmath>
#include <vector>

#include "doctest.h"
#include "m2m/analytic_model.hpp"

using namespace m2m;

namespace {

// Bisection on E = tp + k / (mu - M/E) for the root above max(tp, M/mu).
// Independent of the quadratic formula used by solve_no_timeout.
double no_timeout_rtt_by_bisection(double mu, double tp, double m, int k) {
    auto f = [&](double e) { return tp + k / (mu - m / e) - e; };
    double lo = std::max(tp, m / mu) * (1.0 + 1e-12) + 1e-12;
    double hi = lo + 1.0;
    while (f(hi) > 0.0) {
        hi *= 2.0;
    }
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ModelInputs base_inputs(int m, double tout = kInfinite) {
    ModelInputs in;
    in.mu_up = 64.0;
    in.tp = 0.6;
    in.m = m;
    in.tout = tout;
    return in;
}

}  // namespace

TEST_CASE("solve_no_timeout zero-load limit") {
    const auto sol = solve_no_timeout(base_inputs(0));
    CHECK(sol.converged());
    CHECK(sol.rtt == doctest::Approx(0.6625).epsilon(1e-15));
    CHECK(sol.gamma_raw == 0.0);
    CHECK(sol.p_timeout == 0.0);
}

TEST_CASE("solve_no_timeout matches the bisection oracle at M=32") {
    const double oracle = no_timeout_rtt_by_bisection(64.0, 0.6, 32.0, 4);
    CHECK(oracle == doctest::Approx(0.7758).epsilon(1e-4));
    const auto sol = solve_no_timeout(base_inputs(32));
    CHECK(std::abs(sol.rtt - oracle) < 1e-9);
    CHECK(sol.gamma_raw == doctest::Approx(0.6445).epsilon(1e-4));
    const double residual = sol.rtt - (0.6 + 4.0 / (64.0 - 32.0 / sol.rtt));
    CHECK(std::abs(residual) < 1e-9);
    CHECK(sol.x == doctest::Approx((sol.rtt - 0.6) / 4.0));
}

TEST_CASE("asymmetric mu=32, M=16 equals symmetric mu=64, M=32") {
    ModelInputs in;
    in.mu_up = 32.0;
    in.tp = 0.6;
    in.m = 16;
    in.mode = LinkMode::Asymmetric;
    const auto asym = solve_no_timeout(in);
    const auto sym = solve_no_timeout(base_inputs(32));
    CHECK(std::abs(asym.rtt - no_timeout_rtt_by_bisection(32.0, 0.6, 16.0, 2)) < 1e-9);
    CHECK(asym.rtt == doctest::Approx(sym.rtt).epsilon(1e-12));
    CHECK(asym.gamma_raw == doctest::Approx(sym.gamma_raw).epsilon(1e-12));
    CHECK(asym.x == doctest::Approx((asym.rtt - 0.6) / 2.0));
}

TEST_CASE("solve_no_timeout root validity over the standard grid") {
    for (int m = 0; m <= 170; ++m) {
        const auto sol = solve_no_timeout(base_inputs(m));
        const double residual = sol.rtt - (0.6 + 4.0 / (64.0 - m / sol.rtt));
        CHECK(std::abs(residual) <= 1e-9 * std::max(1.0, sol.rtt));
        CHECK(sol.rtt > 0.6);
        if (m > 0) {
            // The other root of mu E^2 - b E + M tp = 0 is M tp / (mu E).
            const double other = m * 0.6 / (64.0 * sol.rtt);
            CHECK(other < 0.6);
        }
    }
}

TEST_CASE("no-timeout curve is monotone and bounded by 1") {
    double prev_rtt = 0.0;
    double prev_gamma = -1.0;
    for (int m = 1; m <= 170; ++m) {
        const auto sol = solve_no_timeout(base_inputs(m));
        CHECK(sol.rtt >= prev_rtt);
        CHECK(sol.gamma_raw >= prev_gamma);
        CHECK(sol.gamma_raw < 1.0);
        prev_rtt = sol.rtt;
        prev_gamma = sol.gamma_raw;
    }
}

TEST_CASE("solve_no_timeout rejects a non-positive service rate") {
    ModelInputs in = base_inputs(10);
    in.mu_up = 0.0;
    CHECK_THROWS_AS(solve_no_timeout(in), ParameterError);
}

TEST_CASE("normalized_throughput") {
    CHECK(normalized_throughput(0, 0.7, 64.0) == 0.0);
    CHECK(normalized_throughput(32, 0.7758, 64.0) == doctest::Approx(0.6445).epsilon(1e-4));
    CHECK(normalized_throughput(64.0 * 1.3, 1.3, 64.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(normalized_throughput(1, 0.0, 64.0), ParameterError);
}

TEST_CASE("solve_with_timeout with an effectively infinite timer matches no-timeout") {
    const auto ref = solve_no_timeout(base_inputs(32));
    const auto sol = solve_with_timeout(base_inputs(32, 1e9));
    REQUIRE(sol.converged());
    CHECK(std::abs(sol.rtt - ref.rtt) <= 0.001);
    CHECK(sol.p_timeout == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solve_with_timeout saturates when the service margin is negative everywhere") {
    const auto sol = solve_with_timeout(base_inputs(5000, 2.0));
    CHECK(sol.status == SolveStatus::Saturated);
    CHECK(std::isnan(sol.rtt));
    CHECK(std::isnan(sol.gamma_good));
}

TEST_CASE("solve_with_timeout parameter errors") {
    CHECK_THROWS_AS(solve_with_timeout(base_inputs(10, 0.6)), ParameterError);
    CHECK_THROWS_AS(solve_with_timeout(base_inputs(10, 0.3)), ParameterError);
    CHECK_THROWS_AS(solve_with_timeout(base_inputs(10, kInfinite)), ParameterError);
    CHECK_THROWS_AS(solve_with_timeout(base_inputs(10, 2.0), SolverSettings{0.0, 0.001, 60.0}),
                    ParameterError);
    CHECK_THROWS_AS(solve_with_timeout(base_inputs(10, 2.0), SolverSettings{-0.1, 0.001, 60.0}),
                    ParameterError);
}

TEST_CASE("converged timeout solutions satisfy the fixed-point equations") {
    for (LinkMode mode : {LinkMode::Symmetric, LinkMode::Asymmetric}) {
        const int k = stage_count(mode);
        for (double tout : {1.0, 2.0, 3.0, 4.0, 8.0}) {
            for (int m = 1; m <= 200; m += 3) {
                ModelInputs in = base_inputs(m, tout);
                in.mode = mode;
                if (mode == LinkMode::Asymmetric) {
                    in.mu_up = 32.0;
                }
                const auto sol = solve_with_timeout(in);
                if (!sol.converged()) {
                    continue;
                }
                CHECK(sol.rtt > in.tp);
                CHECK(sol.x == doctest::Approx((sol.rtt - in.tp) / k));
                const double p = 1.0 - erlang_cdf(tout - in.tp, {k, sol.x});
                CHECK(sol.p_timeout == doctest::Approx(p).epsilon(1e-12));
                CHECK(sol.p_timeout >= 0.0);
                CHECK(sol.p_timeout < 1.0);
                const double rhs = in.tp + k / ((1.0 - p) * (in.mu_up - m / sol.rtt));
                CHECK(std::abs(rhs - sol.rtt) <= 0.001);
                CHECK(sol.gamma_raw > 0.0);
                CHECK(sol.gamma_raw < 1.0);
                CHECK(sol.gamma_good == doctest::Approx(sol.gamma_raw * (1.0 - p)));
            }
        }
    }
}

TEST_CASE("solve_with_timeout returns the smallest fixed point") {
    // Every grid candidate below the returned rtt has residual above tolerance.
    const SolverSettings s;
    for (int m : {60, 90, 130, 170}) {
        const auto in = base_inputs(m, 2.0);
        const auto sol = solve_with_timeout(in, s);
        REQUIRE(sol.converged());
        for (double r = in.tp + s.step; r < sol.rtt - s.step; r += s.step) {
            const auto t = fixed_point_terms(in, r);
            if (t) {
                REQUIRE(t->rhs - r > s.tolerance);
            }
        }
    }
}

TEST_CASE("timeout solution converges to the no-timeout solution as tout grows") {
    const SolverSettings s;
    for (int m : {10, 40, 70, 100, 150}) {
        const auto ref = solve_no_timeout(base_inputs(m));
        const double tout = 0.6 + 50.0 * ref.x;
        const auto sol = solve_with_timeout(base_inputs(m, tout), s);
        REQUIRE(sol.converged());
        CHECK(std::abs(sol.rtt - ref.rtt) <= 2.0 * s.step);
    }
}

TEST_CASE("timeout probability is nondecreasing in M along converged curves") {
    for (double tout : {2.0, 3.0, 4.0}) {
        double prev = 0.0;
        for (int m = 1; m <= 170; ++m) {
            const auto sol = solve_with_timeout(base_inputs(m, tout));
            if (!sol.converged()) {
                continue;
            }
            CHECK(sol.p_timeout >= prev - 1e-15);
            prev = sol.p_timeout;
        }
    }
}

TEST_CASE("theory_curve builds per-M solutions in order") {
    const auto zero = theory_curve(base_inputs(0), {0});
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].first == 0);
    CHECK(zero[0].second.rtt == doctest::Approx(0.6625));

    std::vector<int> grid;
    for (int m = 10; m <= 170; m += 10) {
        grid.push_back(m);
    }
    const auto inf_curve = theory_curve(base_inputs(0), grid);
    for (std::size_t i = 1; i < inf_curve.size(); ++i) {
        CHECK(inf_curve[i].second.gamma_raw > inf_curve[i - 1].second.gamma_raw);
        CHECK(inf_curve[i].second.gamma_raw < 1.0);
    }

    auto argmax = [&](double tout) {
        const auto curve = theory_curve(base_inputs(0, tout), grid);
        int best = -1;
        double best_v = -1.0;
        for (const auto &[m, sol] : curve) {
            if (sol.converged() && sol.gamma_good > best_v) {
                best_v = sol.gamma_good;
                best = m;
            }
        }
        return best;
    };
    CHECK(argmax(2.0) == 70);
    CHECK(argmax(3.0) == 90);

    CHECK_THROWS_AS(theory_curve(base_inputs(0), {}), ParameterError);
    CHECK_THROWS_AS(theory_curve(base_inputs(0), {20, 10}), ParameterError);

    // A template whose timer fires before tp marks every point, never throws.
    const auto bad = theory_curve(base_inputs(0, 0.5), {10, 20});
    REQUIRE(bad.size() == 2);
    CHECK(bad[0].second.status == SolveStatus::Invalid);
    CHECK(bad[1].second.status == SolveStatus::Invalid);
}
