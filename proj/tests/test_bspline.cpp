#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "ssr/bspline.hpp"

using namespace ssr;

TEST_CASE("centered B-spline point values", "[bspline]") {
    CHECK(bspline::eval_centered(2, 0.0) == 1.0);
    CHECK(bspline::eval_centered(1, 0.49) == 1.0);
    CHECK(bspline::eval_centered(1, 0.51) == 0.0);
    CHECK(bspline::eval_centered(1, 0.5) == 0.0);   // right-open
    CHECK(bspline::eval_centered(1, -0.5) == 1.0);

    // order-4 values frozen from the Cox-de Boor oracle
    double o0 = oracle::cox_de_boor(4, 0.0);
    double o1 = oracle::cox_de_boor(4, 1.0);
    CHECK(o0 == Catch::Approx(2.0 / 3.0).margin(1e-14));
    CHECK(o1 == Catch::Approx(1.0 / 6.0).margin(1e-14));
    CHECK(bspline::eval_centered(4, 0.0) == Catch::Approx(o0).margin(1e-14));
    CHECK(bspline::eval_centered(4, 1.0) == Catch::Approx(o1).margin(1e-14));

    CHECK_THROWS_AS(bspline::eval_centered(0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bspline::eval_centered(-2, 0.0), std::invalid_argument);
}

TEST_CASE("closed form matches Cox-de Boor everywhere", "[bspline]") {
    std::mt19937_64 rng(12345);
    for (int r = 1; r <= 6; ++r) {
        std::uniform_real_distribution<double> xs(-0.5 * r - 1.0, 0.5 * r + 1.0);
        double worst = 0.0;
        for (int i = 0; i < 2000; ++i) {
            double x = xs(rng);
            worst = std::max(worst,
                             std::abs(bspline::eval_centered(r, x) - oracle::cox_de_boor(r, x)));
        }
        INFO("r = " << r);
        CHECK(worst <= 1e-13);
    }
}

TEST_CASE("support, nonnegativity, symmetry", "[bspline]") {
    std::mt19937_64 rng(777);
    for (int r = 1; r <= 4; ++r) {
        std::uniform_real_distribution<double> xs(-0.5 * r, 0.5 * r);
        for (int i = 0; i < 2000; ++i) {
            double x = xs(rng);
            double v = bspline::eval_centered(r, x);
            CHECK(v >= 0.0);
            if (r >= 2) {
                // r = 1 is symmetric except at the half-integer jump itself
                CHECK(std::abs(v - bspline::eval_centered(r, -x)) <= 1e-15);
            }
        }
        CHECK(bspline::eval_centered(r, 0.5 * r + 1e-12) == 0.0);
        CHECK(bspline::eval_centered(r, -0.5 * r - 1e-12) == 0.0);
    }
}

TEST_CASE("partition of unity", "[bspline]") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> xs(-10.0, 10.0);
    for (int r = 1; r <= 4; ++r) {
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            double x = xs(rng);
            double sum = 0.0;
            int lo = static_cast<int>(std::floor(x - 0.5 * r)) - 1;
            int hi = static_cast<int>(std::ceil(x + 0.5 * r)) + 1;
            for (int s = lo; s <= hi; ++s) sum += bspline::eval_centered(r, x - s);
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        INFO("r = " << r);
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("refinement identity", "[bspline]") {
    CHECK(std::abs(bspline::refinement_residual(2, 0.5)) <= 1e-12);
    CHECK(std::abs(bspline::refinement_residual(1, 0.0)) <= 1e-12);

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> xs(-3.0, 3.0);
    for (int r = 1; r <= 4; ++r) {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i)
            worst = std::max(worst, std::abs(bspline::refinement_residual(r, xs(rng))));
        INFO("r = " << r);
        CHECK(worst <= 1e-12);
    }
    // and against the oracle on the r = 4 dense sweep
    for (int i = 0; i <= 1000; ++i) {
        double x = -3.0 + 6.0 * i / 1000.0;
        double rhs = 0.0;
        for (int j = 0; j <= 4; ++j)
            rhs += binomial(4, j) * oracle::cox_de_boor(4, 2.0 * x - j + 2.0);
        CHECK(std::abs(oracle::cox_de_boor(4, x) - rhs / 8.0) <= 1e-12);
    }
}

TEST_CASE("mixed B-splines multiply univariate factors", "[bspline]") {
    bspline::mixed_bspline hat2;
    hat2.order = 2;
    hat2.level = {0, 0};
    hat2.shift = {0, 0};
    std::vector<double> x = {0.0, 0.0};
    CHECK(hat2(x) == 1.0);

    bspline::mixed_bspline m;
    m.order = 2;
    m.level = {1, 0};
    m.shift = {1, 1};
    x = {0.5, 1.0};
    CHECK(m(x) == 1.0);

    x = {0.5, 1.0, 0.3};
    CHECK_THROWS_AS(m(std::span<const double>(x)), std::invalid_argument);

    // vanishing when any factor's support excludes the coordinate
    x = {0.0, 1.0};
    CHECK(m(std::span<const double>(x).subspan(0, 2)) == 0.0);

    std::mt19937_64 rng(4321);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        bspline::mixed_bspline mb;
        mb.order = 3;
        mb.half_shift = true;
        mb.level = {2, 1, 0};
        mb.shift = {3, 1, 2};
        std::vector<double> p = {xs(rng), xs(rng), xs(rng)};
        double expect = 1.0;
        for (int i = 0; i < 3; ++i)
            expect *= bspline::eval_centered(3, std::ldexp(p[i], mb.level[i]) - 0.5 * mb.shift[i]);
        CHECK(mb(p) == Catch::Approx(expect).margin(1e-15));
    }
}
