#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ssr/bench.hpp"
#include "ssr/besov.hpp"
#include "ssr/faber.hpp"
#include "ssr/recovery.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace ssr::cli {

namespace detail {

inline std::ostream& open_sink(const std::string& path, std::ofstream& file) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot open output file " + path);
    return file;
}

inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path, int columns) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                row.push_back(v);
            } catch (...) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (rows.empty()) continue;  // tolerate a header line
            throw std::runtime_error("non-numeric row in " + path + ": " + line);
        }
        if (static_cast<int>(row.size()) != columns)
            throw std::runtime_error("expected " + std::to_string(columns) + " columns in " +
                                     path);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Sampled-data files carry rows (x_1..x_d, value) at exact nodes of G^d(m);
// the node set must be complete.
inline eval_fn load_sampled_data(const std::string& path, int d, int m) {
    auto rows = read_numeric_csv(path, d + 1);
    auto to_node = [&](double v, int axis) {
        double u = std::ldexp(v, m);
        double r = std::round(u);
        if (std::abs(u - r) > 1e-9 || r < 0 || r > std::ldexp(1.0, m))
            throw std::runtime_error("data point coordinate " + std::to_string(v) + " (axis " +
                                     std::to_string(axis) + ") is not a level-" +
                                     std::to_string(m) + " grid node");
        return grid::canonical(m, static_cast<long long>(r));
    };
    auto values = std::make_shared<
        std::unordered_map<grid::dyadic_point, double, grid::dyadic_point_hash>>();
    for (const auto& row : rows) {
        grid::dyadic_point p;
        p.coords.resize(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) p.coords[static_cast<std::size_t>(i)] = to_node(row[static_cast<std::size_t>(i)], i);
        (*values)[p] = row[static_cast<std::size_t>(d)];
    }
    // completeness over the distinct nodes of G^d(m)
    long long missing = 0;
    std::string first_missing;
    for (const auto& k : grid::enumerate_levels(d, m)) {
        index_vec dims(d);
        for (int i = 0; i < d; ++i) dims[i] = (1 << k[i]) + 1;
        index_vec s(d, 0);
        do {
            index_vec sv(s);
            auto p = grid::make_point(k, sv);
            if (!values->count(p)) {
                ++missing;
                if (first_missing.empty()) first_missing = p.describe();
            }
        } while (ssr::detail::advance(s, dims));
    }
    if (missing > 0)
        throw std::runtime_error("sampled-data file misses " + std::to_string(missing) +
                                 " grid nodes of G^d(m), first " + first_missing);
    return [values, d, m](std::span<const double> x) {
        grid::dyadic_point p;
        p.coords.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double u = std::ldexp(x[i], m);
            double r = std::round(u);
            if (std::abs(u - r) > 1e-9)
                throw std::runtime_error("query outside the sampled grid");
            p.coords[i] = grid::canonical(m, static_cast<long long>(r));
        }
        return values->at(p);
    };
}

inline bench::test_function resolve_function(const std::string& spec, int d, int m, double alpha,
                                             double p, double theta) {
    if (spec.rfind("data:", 0) == 0) {
        bench::test_function tf;
        tf.name = spec;
        tf.dim = d;
        tf.tag = "data";
        tf.f = load_sampled_data(spec.substr(5), d, m);
        return tf;
    }
    bench::function_context ctx{m, alpha, p, theta};
    return bench::make_function(spec, d, ctx);
}

inline nlohmann::ordered_json psi_json(const recovery::psi_weights& psi) {
    nlohmann::ordered_json j;
    j["order"] = psi.order;
    j["budget"] = psi.budget;
    j["levels"] = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < psi.levels.size(); ++l) {
        nlohmann::ordered_json lv;
        lv["level"] = l;
        lv["nodes"] = nlohmann::ordered_json::array();
        for (std::size_t jn = 0; jn < psi.levels[l].size(); ++jn) {
            const auto& row = psi.levels[l][jn];
            nlohmann::ordered_json node;
            node["j"] = jn;
            node["s_lo"] = row.lo;
            node["weights"] = row.w;
            lv["nodes"].push_back(node);
        }
        j["levels"].push_back(lv);
    }
    return j;
}

}  // namespace detail

// Exit codes: 0 success, 1 usage error, 2 computation error.
inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"sparse-grid sampling recovery with mixed B-spline quasi-interpolants"};
    app.require_subcommand(1);

    // ---- grid ----
    int g_dim = 1, g_level = 0, g_variant = 2;
    std::string g_format = "csv", g_out;
    auto* gcmd = app.add_subcommand("grid", "dump the sparse grid G^d(m)");
    gcmd->add_option("--dim", g_dim, "dimension d")->required()->check(CLI::PositiveNumber);
    gcmd->add_option("--level", g_level, "budget m")->required()->check(CLI::NonNegativeNumber);
    gcmd->add_option("--grid-variant", g_variant, "1: left nodes only, 2: full")
        ->check(CLI::Range(1, 2));
    gcmd->add_option("--format", g_format)->check(CLI::IsMember({"csv", "json"}));
    gcmd->add_option("--out", g_out, "output file (default stdout)");

    // ---- recover ----
    int r_dim = 1, r_order = 2, r_level = 0;
    std::string r_func, r_points, r_out, r_format = "csv", r_mask, r_emit_psi;
    double r_alpha = 1.5, r_p = 2.0, r_theta = 2.0;
    auto* rcmd = app.add_subcommand("recover", "evaluate R_m(f) at query points");
    rcmd->add_option("--dim", r_dim)->required()->check(CLI::PositiveNumber);
    rcmd->add_option("--order", r_order)->required()->check(CLI::PositiveNumber);
    rcmd->add_option("--level", r_level)->required()->check(CLI::NonNegativeNumber);
    rcmd->add_option("--func", r_func, "builtin name or data:FILE")->required();
    rcmd->add_option("--points", r_points, "CSV of query points")->required();
    rcmd->add_option("--out", r_out);
    rcmd->add_option("--format", r_format)->check(CLI::IsMember({"csv", "json"}));
    rcmd->add_option("--mask", r_mask, "mask config file (JSON)");
    rcmd->add_option("--emit-psi", r_emit_psi, "dump the psi-weight tables as JSON");
    rcmd->add_option("--alpha", r_alpha, "witness smoothness");
    rcmd->add_option("--p", r_p);
    rcmd->add_option("--theta", r_theta);

    // ---- norm ----
    int n_dim = 1, n_order = 2, n_level = 0, n_gauss = 8;
    std::string n_func, n_out, n_format = "json", n_mask, n_p = "2", n_theta = "2", n_b3_variant;
    double n_alpha = 1.0;
    auto* ncmd = app.add_subcommand("norm", "discrete Besov norms of the coefficient ladder");
    ncmd->add_option("--dim", n_dim)->required()->check(CLI::PositiveNumber);
    ncmd->add_option("--order", n_order)->required()->check(CLI::PositiveNumber);
    ncmd->add_option("--level", n_level)->required()->check(CLI::NonNegativeNumber);
    ncmd->add_option("--func", n_func)->required();
    ncmd->add_option("--alpha", n_alpha)->required();
    ncmd->add_option("--p", n_p, "p in (0, inf]");
    ncmd->add_option("--theta", n_theta, "theta in (0, inf]");
    ncmd->add_option("--mask", n_mask);
    ncmd->add_option("--gauss", n_gauss)->check(CLI::PositiveNumber);
    ncmd->add_option("--b3-variant", n_b3_variant, "also emit the scalar-level variant")
        ->check(CLI::IsMember({"scalar"}));
    ncmd->add_option("--out", n_out);
    ncmd->add_option("--format", n_format)->check(CLI::IsMember({"csv", "json"}));

    // ---- bench ----
    std::string b_config, b_out_dir = ".";
    auto* bcmd = app.add_subcommand("bench", "worst-case-error sweep");
    bcmd->add_option("--config", b_config, "sweep config (JSON)")->required();
    bcmd->add_option("--out-dir", b_out_dir);

    // global, honored by every subcommand
    unsigned long long seed = 0;
    for (auto* sub : {gcmd, rcmd, ncmd, bcmd}) sub->add_option("--seed", seed, "rng seed");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gcmd->parsed()) {
            std::ofstream file;
            auto& os = detail::open_sink(g_out, file);
            auto levels = grid::enumerate_levels(g_dim, g_level);
            if (g_format == "csv") {
                for (int i = 1; i <= g_dim; ++i) os << "k_" << i << ',';
                for (int i = 1; i <= g_dim; ++i) os << "s_" << i << ',';
                for (int i = 1; i <= g_dim; ++i) os << "x_" << i << (i == g_dim ? '\n' : ',');
            }
            nlohmann::ordered_json jpoints = nlohmann::ordered_json::array();
            for (const auto& k : levels) {
                index_vec dims(g_dim);
                for (int i = 0; i < g_dim; ++i)
                    dims[i] = (1 << k[i]) + (g_variant == 2 ? 1 : 0);
                index_vec s(g_dim, 0);
                do {
                    if (g_format == "csv") {
                        for (int i = 0; i < g_dim; ++i) os << k[i] << ',';
                        for (int i = 0; i < g_dim; ++i) os << s[i] << ',';
                        for (int i = 0; i < g_dim; ++i)
                            os << bench::format_real(std::ldexp(double(s[i]), -k[i]))
                               << (i == g_dim - 1 ? '\n' : ',');
                    } else {
                        nlohmann::ordered_json row;
                        row["k"] = k;
                        row["s"] = s;
                        std::vector<double> x(static_cast<std::size_t>(g_dim));
                        for (int i = 0; i < g_dim; ++i) x[static_cast<std::size_t>(i)] = std::ldexp(double(s[i]), -k[i]);
                        row["x"] = x;
                        jpoints.push_back(row);
                    }
                } while (ssr::detail::advance(s, dims));
            }
            if (g_format == "json") {
                auto card = grid::grid_cardinality(g_dim, g_level, g_variant);
                nlohmann::ordered_json j;
                j["dim"] = g_dim;
                j["level"] = g_level;
                j["multiset_count"] = card.multiset_count;
                j["distinct_count"] = card.distinct_count;
                j["points"] = jpoints;
                os << j.dump(2) << '\n';
            }
            return 0;
        }

        if (rcmd->parsed()) {
            auto mask = r_mask.empty() ? quasi::builtin_mask(r_order) : quasi::load_mask(r_mask);
            auto tf = detail::resolve_function(r_func, r_dim, r_level, r_alpha, r_p, r_theta);
            auto points = detail::read_numeric_csv(r_points, r_dim);
            grid::eval_cache cache;
            auto table = recovery::build_coefficients(tf.f, r_dim, r_order, mask, r_level, cache);
            recovery::recovery_operator rm(std::move(table));
            auto card = grid::grid_cardinality(r_dim, r_level, 2);
            std::cerr << "recover: " << cache.misses() << " distinct samples ("
                      << card.multiset_count << " multiset grid points), " << cache.hits()
                      << " cache hits\n";
            std::ofstream file;
            auto& os = detail::open_sink(r_out, file);
            if (r_format == "csv") {
                for (int i = 1; i <= r_dim; ++i) os << "x_" << i << ',';
                os << "value\n";
                for (const auto& x : points) {
                    for (double xi : x) os << bench::format_real(xi) << ',';
                    os << bench::format_real(rm.value(x)) << '\n';
                }
            } else {
                nlohmann::ordered_json j;
                j["dim"] = r_dim;
                j["order"] = r_order;
                j["level"] = r_level;
                j["func"] = r_func;
                j["rows"] = nlohmann::ordered_json::array();
                for (const auto& x : points) {
                    nlohmann::ordered_json row;
                    row["x"] = x;
                    row["value"] = rm.value(x);
                    j["rows"].push_back(row);
                }
                os << j.dump(2) << '\n';
            }
            if (!r_emit_psi.empty()) {
                auto psi = recovery::build_psi_weights(r_dim, r_order, mask, r_level);
                std::ofstream pf(r_emit_psi);
                if (!pf) throw std::runtime_error("cannot open " + r_emit_psi);
                pf << detail::psi_json(psi).dump(2) << '\n';
            }
            return 0;
        }

        if (ncmd->parsed()) {
            auto mask = n_mask.empty() ? quasi::builtin_mask(n_order) : quasi::load_mask(n_mask);
            auto tf = detail::resolve_function(n_func, n_dim, n_level, n_alpha,
                                               bench::parse_real(n_p), bench::parse_real(n_theta));
            besov::besov_params bp(n_alpha, bench::parse_real(n_p), bench::parse_real(n_theta),
                                   n_dim, n_order);
            grid::eval_cache cache;
            auto table = recovery::build_coefficients(tf.f, n_dim, n_order, mask, n_level, cache);
            double b3 = besov::discrete_b3_norm(table, bp);
            auto b2 = besov::b2_norm_via_quadrature(table, bp, n_gauss, true);
            std::ofstream file;
            auto& os = detail::open_sink(n_out, file);
            if (n_format == "json") {
                nlohmann::ordered_json j;
                j["alpha"] = n_alpha;
                j["p"] = n_p;
                j["theta"] = n_theta;
                j["dim"] = n_dim;
                j["order"] = n_order;
                j["level"] = n_level;
                j["func"] = n_func;
                j["b3"] = b3;
                if (n_b3_variant == "scalar")
                    j["b3_scalar"] = besov::discrete_b3_norm_scalar(table, bp);
                j["b2"] = b2.value;
                j["b2_resolution_warning"] = b2.resolution_warning;
                auto ladder = besov::b3_ladder(table, bp);
                j["per_level"] = nlohmann::ordered_json::array();
                for (std::size_t li = 0; li < b2.levels.size(); ++li) {
                    nlohmann::ordered_json e;
                    e["k"] = b2.levels[li].k;
                    e["b3_term"] = ladder[li].second;
                    e["q_k_lp"] = b2.levels[li].lp_norm;
                    e["b2_term"] = b2.levels[li].term;
                    j["per_level"].push_back(e);
                }
                os << j.dump(2) << '\n';
            } else {
                os << "b3," << bench::format_real(b3) << '\n';
                if (n_b3_variant == "scalar")
                    os << "b3_scalar,"
                       << bench::format_real(besov::discrete_b3_norm_scalar(table, bp)) << '\n';
                os << "b2," << bench::format_real(b2.value) << '\n';
                os << "b2_resolution_warning," << (b2.resolution_warning ? 1 : 0) << '\n';
            }
            return 0;
        }

        if (bcmd->parsed()) {
            std::ifstream in(b_config);
            if (!in) throw std::runtime_error("cannot open config " + b_config);
            nlohmann::json cj;
            in >> cj;
            auto cfg = bench::parse_config(cj);
            if (seed != 0) cfg.seed = seed;
            auto t0 = std::chrono::steady_clock::now();
            auto rep = bench::run_suite(cfg);
            auto wall =
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
            std::filesystem::create_directories(b_out_dir);
            {
                std::ofstream csv(b_out_dir + "/report.csv");
                bench::write_report_csv(rep, csv);
            }
            {
                std::ofstream js(b_out_dir + "/report.json");
                js << bench::report_json(rep).dump(2) << '\n';
            }
            {
                std::ofstream dat(b_out_dir + "/rates.dat");
                bench::write_rates_dat(rep, dat);
            }
            // wall-clock goes to stderr so the report files stay byte-identical
            std::cerr << "bench: " << rep.rows.size() << " rows in " << wall.count() << " ms -> "
                      << b_out_dir << "/report.{csv,json}, rates.dat\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

inline int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    return dispatch(args);
}

}  // namespace ssr::cli
