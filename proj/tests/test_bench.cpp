#include <catch2/catch_amalgamated.hpp>
#include <chrono>

#include <sstream>

#include "oracles.hpp"
#include "ssr/bench.hpp"

using namespace ssr;
using quasi::builtin_mask;

TEST_CASE("rate fitting", "[bench]") {
    // exact geometric sequence
    std::vector<std::pair<int, double>> errs;
    for (int m = 2; m <= 9; ++m) errs.push_back({m, std::ldexp(1.0, -2 * m)});
    auto fit = bench::fit_rate(errs, false);
    CHECK(fit.slope == Catch::Approx(-2.0).margin(1e-9));
    CHECK(fit.residual <= 1e-9);

    // polylog shape e_m = 2^{-2m} m
    errs.clear();
    for (int m = 2; m <= 9; ++m) errs.push_back({m, std::ldexp(double(m), -2 * m)});
    auto fitp = bench::fit_rate(errs, true);
    CHECK(fitp.slope == Catch::Approx(-2.0).margin(1e-6));
    CHECK(fitp.polylog_coeff == Catch::Approx(1.0).margin(1e-6));

    // too few points
    errs.resize(3);
    CHECK_THROWS_AS(bench::fit_rate(errs, false), std::invalid_argument);
}

TEST_CASE("error estimation", "[bench]") {
    bench::function_context ctx;

    // exact interpolation-error law, d = 1, r = 2, m = 5
    auto quad = bench::make_function("quad", 1, ctx);
    auto est = bench::estimate_error(quad, 1, 2, builtin_mask(2), 5, besov::inf);
    CHECK(est.e_m == Catch::Approx(std::ldexp(1.0, -12)).margin(1e-12));
    CHECK(est.n_multiset == grid::grid_cardinality(1, 5, 2).multiset_count);
    CHECK(est.samples_used == est.n_distinct);

    // multilinear polynomials are recovered exactly
    bench::test_function bilin;
    bilin.name = "bilin";
    bilin.dim = 2;
    bilin.f = [](std::span<const double> x) { return 0.2 + x[0] - 0.7 * x[0] * x[1]; };
    auto est2 = bench::estimate_error(bilin, 2, 2, builtin_mask(2), 3, besov::inf);
    CHECK(est2.e_m <= 1e-10);

    // a witness built against budget m is annihilated by R_m, so the error
    // equals its own norm
    ctx.m = 4;
    ctx.alpha = 1.5;
    auto g1 = bench::make_function("witness:g1", 2, ctx);
    auto estw = bench::estimate_error(g1, 2, 2, builtin_mask(2), 4, besov::inf);
    double sup = 0.0;
    for (int i = 0; i <= 256; ++i)
        for (int j = 0; j <= 256; ++j) {
            std::vector<double> x = {i / 256.0, j / 256.0};
            sup = std::max(sup, std::abs(g1.f(x)));
        }
    CHECK(estw.e_m == Catch::Approx(sup).margin(1e-14));

    // finite q agrees with an analytic integral: f - R_0(f) for f = x(1-x)
    // in d = 1 is x(1-x) itself minus its chord 0 -> ||x - x^2||_2
    auto est3 = bench::estimate_error(quad, 1, 2, builtin_mask(2), 0, 2.0);
    CHECK(est3.e_m == Catch::Approx(std::sqrt(1.0 / 30.0)).margin(1e-12));

    CHECK_THROWS_AS(bench::make_function("nope", 1, ctx), std::invalid_argument);
    CHECK_THROWS_AS(bench::make_function("witness:g9", 2, ctx), std::invalid_argument);
}

TEST_CASE("suite runner", "[bench]") {
    // empty function list: valid report with zero rows
    bench::bench_config empty;
    empty.functions.clear();
    empty.dims = {1};
    empty.level_lo = 2;
    empty.level_hi = 5;
    auto rep0 = bench::run_suite(empty);
    CHECK(rep0.rows.empty());
    std::ostringstream csv0;
    bench::write_report_csv(rep0, csv0);
    CHECK(csv0.str() == "d,r,m,q,func,n_multiset,n_distinct,samples_used,e_m,status\n");

    // single row matches estimate_error
    bench::bench_config one;
    one.functions = {"quad"};
    one.dims = {1};
    one.orders = {2};
    one.level_lo = 5;
    one.level_hi = 5;
    auto rep1 = bench::run_suite(one);
    REQUIRE(rep1.rows.size() == 1);
    CHECK(rep1.rows[0].status == "ok");
    CHECK(rep1.rows[0].e_m == Catch::Approx(std::ldexp(1.0, -12)).margin(1e-12));

    // rows stay sorted by (d, r, m), failures are recorded per row and the
    // run continues
    bench::bench_config mixed;
    mixed.functions = {"witness:g3", "quad"};  // g3 needs m >= 2: fails at m = 1
    mixed.dims = {1, 2};
    mixed.orders = {2};
    mixed.level_lo = 1;
    mixed.level_hi = 4;
    auto rep = bench::run_suite(mixed);
    CHECK(rep.rows.size() == 2 * 4 * 2);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        auto key = [](const bench::bench_row& r) { return std::tuple(r.d, r.r, r.m); };
        CHECK(key(rep.rows[i - 1]) <= key(rep.rows[i]));
    }
    bool has_error = false, has_ok = false;
    for (const auto& row : rep.rows) {
        if (row.status != "ok") has_error = true;
        if (row.status == "ok") has_ok = true;
        CHECK(row.n_multiset >= row.n_distinct);
    }
    CHECK(has_error);  // witness:g3 at m = 1
    CHECK(has_ok);

    // byte-identical reruns
    auto rep2 = bench::run_suite(mixed);
    std::ostringstream a, b;
    bench::write_report_csv(rep, a);
    bench::write_report_csv(rep2, b);
    CHECK(a.str() == b.str());
    CHECK(bench::report_json(rep).dump(2) == bench::report_json(rep2).dump(2));
    std::ostringstream ra, rb;
    bench::write_rates_dat(rep, ra);
    bench::write_rates_dat(rep2, rb);
    CHECK(ra.str() == rb.str());
}

TEST_CASE("default suite stays inside its time budget", "[bench]") {
    // the stock configuration: sine/quad/kink, d in {1,2}, r = 2, m = 2..8
    bench::bench_config cfg;  // defaults
    auto t0 = std::chrono::steady_clock::now();
    auto rep = bench::run_suite(cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 60.0);
    CHECK(rep.rows.size() == 2 * 7 * 3);
    for (const auto& row : rep.rows) {
        CHECK(row.status == "ok");
        CHECK(row.n_multiset >= row.n_distinct);
        CHECK(row.n_multiset == grid::grid_cardinality(row.d, row.m, 2).multiset_count);
    }
}

TEST_CASE("config parsing", "[bench]") {
    nlohmann::json j = nlohmann::json::parse(R"({
        "dims": [2], "orders": [2, 3],
        "levels": {"lo": 3, "hi": 7},
        "q_values": ["inf", 2.0],
        "functions": ["sine"],
        "quadrature": {"g": 4, "qmc_n": 1024},
        "seed": 7,
        "fit": {"polylog": true, "min_m": 4}
    })");
    auto c = bench::parse_config(j);
    CHECK(c.dims == std::vector<int>{2});
    CHECK(c.orders == std::vector<int>{2, 3});
    CHECK(c.level_lo == 3);
    CHECK(c.level_hi == 7);
    REQUIRE(c.q_values.size() == 2);
    CHECK(std::isinf(c.q_values[0]));
    CHECK(c.q_values[1] == 2.0);
    CHECK(c.gauss == 4);
    CHECK(c.seed == 7);
    CHECK(c.fit_polylog);
    CHECK(c.fit_min_m == 4);
}
