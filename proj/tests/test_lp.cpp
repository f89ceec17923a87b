#include "v2g/lp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace v2g;

TEST_SUITE("lp") {
    TEST_CASE("textbook maximization") {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        lp::LinearProgram p;
        const int x = p.add_variable(-3.0, 0.0, 4.0);
        const int y = p.add_variable(-5.0, 0.0);
        p.add_row({{y, 2.0}}, -lp::kInf, 12.0);
        p.add_row({{x, 3.0}, {y, 2.0}}, -lp::kInf, 18.0);
        const auto s = lp::solve(p);
        REQUIRE(s.status == lp::Status::optimal);
        CHECK(s.x[0] == doctest::Approx(2.0));
        CHECK(s.x[1] == doctest::Approx(6.0));
        CHECK(s.objective == doctest::Approx(-36.0));
    }

    TEST_CASE("equality rows and shifted bounds") {
        lp::LinearProgram p;
        const int a = p.add_variable(1.0, 5.0, 50.0);
        const int b = p.add_variable(2.0, -10.0, 50.0);
        p.add_row({{a, 1.0}, {b, 1.0}}, 30.0, 30.0);
        const auto s = lp::solve(p);
        REQUIRE(s.status == lp::Status::optimal);
        CHECK(s.x[0] == doctest::Approx(40.0));
        CHECK(s.x[1] == doctest::Approx(-10.0));
    }

    TEST_CASE("infeasible and unbounded are reported") {
        lp::LinearProgram p;
        const int a = p.add_variable(1.0, 0.0, 1.0);
        p.add_row({{a, 1.0}}, 2.0, lp::kInf);
        CHECK(lp::solve(p).status == lp::Status::infeasible);

        lp::LinearProgram q;
        q.add_variable(-1.0, 0.0);
        CHECK(lp::solve(q).status == lp::Status::unbounded);
    }

    TEST_CASE("equal costs resolve to the lowest index") {
        lp::LinearProgram p;
        const int a = p.add_variable(1.0, 0.0, 100.0);
        const int b = p.add_variable(1.0, 0.0, 100.0);
        p.add_row({{a, 1.0}, {b, 1.0}}, 60.0, 60.0);
        const auto s = lp::solve(p);
        REQUIRE(s.status == lp::Status::optimal);
        CHECK(s.objective == doctest::Approx(60.0));
    }

    TEST_CASE("random transportation problems match brute force over vertices") {
        // Two sources, two sinks. For a fixed x00 the cost is linear in x01,
        // so scanning x00 finely with x01 at either end of its feasible range
        // finds the optimum.
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(1.0, 10.0);
        for (int trial = 0; trial < 30; ++trial) {
            const double s1 = 20 + 10 * u(rng), s2 = 20 + 10 * u(rng);
            const double d1 = 10 + u(rng), d2 = 10 + u(rng);
            double c[4];
            for (double& ci : c) ci = u(rng);
            lp::LinearProgram p;
            int f[4];
            for (int k = 0; k < 4; ++k) f[k] = p.add_variable(c[k], 0.0);
            p.add_row({{f[0], 1}, {f[1], 1}}, -lp::kInf, s1);
            p.add_row({{f[2], 1}, {f[3], 1}}, -lp::kInf, s2);
            p.add_row({{f[0], 1}, {f[2], 1}}, d1, d1);
            p.add_row({{f[1], 1}, {f[3], 1}}, d2, d2);
            const auto s = lp::solve(p);
            REQUIRE(s.status == lp::Status::optimal);
            double best = INFINITY;
            for (int i = 0; i <= 20000; ++i) {
                const double x00 = d1 * i / 20000.0;
                for (int j = 0; j <= 1; ++j) {
                    const double x01 = j == 0 ? std::max(0.0, d2 - s2 + (d1 - x00)) : std::min(d2, s1 - x00);
                    const double x10 = d1 - x00, x11 = d2 - x01;
                    if (x01 < -1e-12 || x11 < -1e-12 || x00 + x01 > s1 + 1e-9 || x10 + x11 > s2 + 1e-9) continue;
                    best = std::min(best, c[0] * x00 + c[1] * x01 + c[2] * x10 + c[3] * x11);
                }
            }
            CHECK(s.objective <= best + 1e-9);
            CHECK(s.objective >= best - 1e-2);
        }
    }
}
