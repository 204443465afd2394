#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <random>

#include "oracles.hpp"
#include "ssr/recovery.hpp"

using namespace ssr;
using quasi::builtin_mask;
using recovery::build_coefficients;
using recovery::recovery_operator;

namespace {

eval_fn fn1(double (*f)(double)) {
    return [f](std::span<const double> x) { return f(x[0]); };
}

std::vector<index_vec> grid_nodes(int d, int m, int r_variant) {
    std::vector<index_vec> out;
    for (const auto& k : grid::enumerate_levels(d, m)) {
        index_vec dims(d);
        for (int i = 0; i < d; ++i) dims[i] = (1 << k[i]) + (r_variant == 2 ? 1 : 0);
        index_vec s(d, 0);
        do {
            index_vec node(2 * d);
            for (int i = 0; i < d; ++i) {
                node[i] = k[i];
                node[d + i] = s[i];
            }
            out.push_back(node);
        } while (ssr::detail::advance(s, dims));
    }
    return out;
}

}  // namespace

TEST_CASE("coefficient tables on simple functions", "[recovery]") {
    // linear f: level-0 coefficients carry everything
    {
        grid::eval_cache cache;
        auto t = build_coefficients(fn1(+[](double x) { return x; }), 1, 2, builtin_mask(2), 3, cache);
        CHECK(t.coefficient({0}, {0}) == Catch::Approx(0.0).margin(1e-14));
        CHECK(t.coefficient({0}, {1}) == Catch::Approx(1.0).margin(1e-14));
        for (int k = 1; k <= 3; ++k)
            for (int s = 0; s <= (1 << k); ++s)
                CHECK(std::abs(t.coefficient({k}, {s})) <= 1e-13);
    }
    // tensor-linear f in d = 2
    {
        grid::eval_cache cache;
        eval_fn f = [](std::span<const double> x) { return x[0] * x[1]; };
        auto t = build_coefficients(f, 2, 2, builtin_mask(2), 2, cache);
        for (const auto& b : t.blocks()) {
            double mx = 0.0;
            for (double c : b.c) mx = std::max(mx, std::abs(c));
            if (b.k == index_vec{0, 0})
                CHECK(mx == 1.0);
            else
                CHECK(mx <= 1e-13);
        }
    }
    // f = x^2: second differences at dyadic midpoints
    {
        grid::eval_cache cache;
        auto t = build_coefficients(fn1(+[](double x) { return x * x; }), 1, 2, builtin_mask(2), 2, cache);
        CHECK(t.coefficient({1}, {1}) == Catch::Approx(-0.25).margin(1e-14));
        CHECK(t.coefficient({2}, {1}) == Catch::Approx(-1.0 / 16).margin(1e-14));
        CHECK(t.coefficient({2}, {3}) == Catch::Approx(-1.0 / 16).margin(1e-14));
        // build used exactly the distinct grid points
        CHECK(cache.misses() == grid::grid_cardinality(1, 2, 2).distinct_count);
    }
}

TEST_CASE("recovery evaluation basics", "[recovery]") {
    grid::eval_cache cache;
    auto t = build_coefficients(fn1(+[](double x) { return std::sin(M_PI * x); }), 1, 2,
                                builtin_mask(2), 0, cache);
    recovery_operator rm(t);
    std::vector<double> x = {0.5};
    CHECK(rm.value(x) == Catch::Approx(0.0).margin(1e-15));  // level-0 chord of sin

    x = {1.5};
    CHECK_THROWS_AS(rm.value(x), std::domain_error);
    std::vector<double> bad_dim = {0.5, 0.5};
    CHECK_THROWS_AS(rm.value(bad_dim), std::invalid_argument);
}

TEST_CASE("polynomial reproduction", "[recovery]") {
    // multilinear polynomials are reproduced for every order (the level-0
    // extension caps the exact degree)
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    for (int r = 2; r <= 4; ++r) {
        eval_fn f = [](std::span<const double> x) {
            return 1.0 + 2.0 * x[0] - 0.5 * x[1] + 3.0 * x[0] * x[1];
        };
        grid::eval_cache cache;
        auto t = build_coefficients(f, 2, r, builtin_mask(r), 3, cache);
        recovery_operator rm(t);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            std::vector<double> x = {xs(rng), xs(rng)};
            worst = std::max(worst, std::abs(rm.value(x) - f(x)));
        }
        INFO("r=" << r);
        CHECK(worst <= 1e-10);
    }
    // d = 1: R_m = Q_m reproduces P_{r-1} once 2^m + 1 >= r
    for (int r = 2; r <= 4; ++r) {
        eval_fn f = [r](std::span<const double> x) { return ipow(2.0 * x[0] - 0.7, r - 1); };
        grid::eval_cache cache;
        auto t = build_coefficients(f, 1, r, builtin_mask(r), 4, cache);
        recovery_operator rm(t);
        double worst = 0.0;
        for (int i = 0; i <= 300; ++i) {
            std::vector<double> x = {i / 300.0};
            worst = std::max(worst, std::abs(rm.value(x) - f(x)));
        }
        INFO("r=" << r);
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("interpolation at sparse grid nodes (r = 1, 2)", "[recovery]") {
    std::mt19937_64 rng(2718);
    for (int r : {1, 2}) {
        for (int d = 1; d <= 3; ++d) {
            int m = (d == 3) ? 4 : 5;
            auto base = oracle::random_trig_poly(d, rng);
            eval_fn f = oracle::as_fn(base);
            grid::eval_cache cache;
            auto t = build_coefficients(f, d, r, builtin_mask(r), m, cache);
            recovery_operator rm(t);
            double worst = 0.0;
            for (const auto& node : grid_nodes(d, m, 2)) {
                index_vec k(node.begin(), node.begin() + d);
                index_vec s(node.begin() + d, node.end());
                auto p = grid::make_point(k, s);
                auto x = p.values();
                worst = std::max(worst, std::abs(rm.value(x) - f(x)));
            }
            INFO("r=" << r << " d=" << d << " m=" << m);
            CHECK(worst <= 1e-10);
        }
    }
}

TEST_CASE("level components telescope", "[recovery]") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    for (int r : {2, 3}) {
        auto base = oracle::random_trig_poly(2, rng);
        eval_fn f = oracle::as_fn(base);
        grid::eval_cache cache;
        const int m = 3;
        auto t = build_coefficients(f, 2, r, builtin_mask(r), m, cache);

        // sum_{k' <= k} q_{k'} = Q_k
        index_vec kq = {1, 2};
        auto qk = recovery::build_q_operator(f, 2, r, builtin_mask(r), kq, cache);
        for (int i = 0; i < 30; ++i) {
            std::vector<double> x = {xs(rng), xs(rng)};
            double sum = 0.0;
            for (const auto& b : t.blocks())
                if (b.k[0] <= kq[0] && b.k[1] <= kq[1])
                    sum += recovery::level_component(t, b.k).value(x);
            INFO("r=" << r);
            CHECK(sum == Catch::Approx(qk.value(x)).margin(1e-10));
        }

        // R_m - R_{m-1} = sum_{|k| = m} q_k
        grid::eval_cache cache2;
        auto tm1 = build_coefficients(f, 2, r, builtin_mask(r), m - 1, cache2);
        recovery_operator rm(t), rm1(tm1);
        for (int i = 0; i < 30; ++i) {
            std::vector<double> x = {xs(rng), xs(rng)};
            double level_sum = 0.0;
            for (const auto& b : t.blocks())
                if (b.k[0] + b.k[1] == m) level_sum += recovery::level_component(t, b.k).value(x);
            CHECK(rm.value(x) - rm1.value(x) == Catch::Approx(level_sum).margin(1e-10));
        }

        CHECK_THROWS_AS(t.block({5, 5}), std::invalid_argument);
    }
}

TEST_CASE("d = 1 collapse: R_m equals Q_m", "[recovery]") {
    std::mt19937_64 rng(47);
    for (int r = 1; r <= 4; ++r) {
        auto base = oracle::random_trig_poly(1, rng);
        eval_fn f = oracle::as_fn(base);
        grid::eval_cache cache;
        const int m = 4;
        auto t = build_coefficients(f, 1, r, builtin_mask(r), m, cache);
        recovery_operator rm(t);
        auto qm = recovery::build_q_operator(f, 1, r, builtin_mask(r), {m}, cache);
        double worst = 0.0;
        for (int i = 0; i <= 512; ++i) {
            std::vector<double> x = {i / 512.0};
            worst = std::max(worst, std::abs(rm.value(x) - qm.value(x)));
        }
        INFO("r=" << r);
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("exact error law for f = x(1-x)", "[recovery]") {
    for (int m : {1, 3, 6}) {
        grid::eval_cache cache;
        auto t = build_coefficients(fn1(+[](double x) { return x * (1.0 - x); }), 1, 2,
                                    builtin_mask(2), m, cache);
        recovery_operator rm(t);
        double sup = 0.0;
        int probes = 1 << (m + 3);
        for (int i = 0; i <= probes; ++i) {
            std::vector<double> x = {double(i) / probes};
            sup = std::max(sup, std::abs(x[0] * (1.0 - x[0]) - rm.value(x)));
        }
        CHECK(sup == Catch::Approx(std::ldexp(1.0, -2 * m - 2)).margin(1e-12));
    }
}

TEST_CASE("psi weights: support counts and pipeline equivalence", "[recovery]") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    const int m = 3;
    for (int r : {1, 2, 3, 4}) {
        auto mask = builtin_mask(r);
        auto psi = recovery::build_psi_weights(2, r, mask, m);
        int bound = (r % 2 == 0) ? 4 * mask.mu + r + 5 : 12 * mask.mu + 2 * r + 13;
        for (int l = 0; l <= m; ++l) {
            INFO("r=" << r << " level=" << l);
            CHECK(psi.max_support(l) <= bound);
        }

        auto base = oracle::random_trig_poly(2, rng);
        eval_fn f = oracle::as_fn(base);
        grid::eval_cache cache;
        auto t = build_coefficients(f, 2, r, mask, m, cache);
        recovery_operator rm(t);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            std::vector<double> x = {xs(rng), xs(rng)};
            worst = std::max(worst, std::abs(rm.value(x) - sampling_value(psi, f, x, cache)));
        }
        INFO("r=" << r);
        CHECK(worst <= 1e-9);

        // constants: sum of psi-weighted samples is identically one
        grid::eval_cache cache1;
        eval_fn one = [](std::span<const double>) { return 1.0; };
        for (int i = 0; i < 20; ++i) {
            std::vector<double> x = {xs(rng), xs(rng)};
            CHECK(sampling_value(psi, one, x, cache1) == Catch::Approx(1.0).margin(1e-10));
        }
        std::vector<double> corner = {1.0, 1.0};
        CHECK(sampling_value(psi, one, corner, cache1) == Catch::Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("batched grid evaluation matches pointwise", "[recovery]") {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    for (int d : {1, 2, 3}) {
        auto base = oracle::random_trig_poly(d, rng);
        eval_fn f = oracle::as_fn(base);
        grid::eval_cache cache;
        auto t = build_coefficients(f, d, 2, builtin_mask(2), 3, cache);
        recovery_operator rm(t);
        std::vector<std::vector<double>> axes(d);
        for (int i = 0; i < d; ++i) {
            axes[i] = {0.0, 1.0};  // include both endpoints
            for (int n = 0; n < 6; ++n) axes[i].push_back(xs(rng));
            std::sort(axes[i].begin(), axes[i].end());
        }
        std::size_t total = 1;
        for (const auto& a : axes) total *= a.size();
        std::vector<double> out(total, 0.0);
        rm.accumulate_on_grid(axes, out);
        index_vec dims(d), idx(d, 0);
        for (int i = 0; i < d; ++i) dims[i] = static_cast<int>(axes[i].size());
        std::size_t pos = 0;
        double worst = 0.0;
        do {
            std::vector<double> x(d);
            for (int i = 0; i < d; ++i) x[i] = axes[i][static_cast<std::size_t>(idx[i])];
            worst = std::max(worst, std::abs(out[pos++] - rm.value(x)));
        } while (ssr::detail::advance(idx, dims));
        INFO("d=" << d);
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("parallel build is deterministic", "[recovery]") {
    std::mt19937_64 rng(8080);
    auto base = oracle::random_trig_poly(2, rng);
    eval_fn f = oracle::as_fn(base);

    setenv("SSR_THREADS", "1", 1);
    grid::eval_cache c1;
    auto t1 = build_coefficients(f, 2, 2, builtin_mask(2), 4, c1);
    setenv("SSR_THREADS", "4", 1);
    grid::eval_cache c4;
    auto t4 = build_coefficients(f, 2, 2, builtin_mask(2), 4, c4);
    unsetenv("SSR_THREADS");

    REQUIRE(t1.blocks().size() == t4.blocks().size());
    for (std::size_t i = 0; i < t1.blocks().size(); ++i) {
        CHECK(t1.blocks()[i].k == t4.blocks()[i].k);
        CHECK(t1.blocks()[i].c == t4.blocks()[i].c);  // bitwise identical
    }
}

TEST_CASE("tainted samples propagate from the build", "[recovery]") {
    grid::eval_cache cache;
    eval_fn f = [](std::span<const double> x) {
        return (x[0] == 0.25) ? std::numeric_limits<double>::infinity() : x[0];
    };
    CHECK_THROWS_AS(build_coefficients(f, 1, 2, builtin_mask(2), 3, cache),
                    tainted_sample_error);
}
