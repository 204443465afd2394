#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ssr/besov.hpp"
#include "ssr/common.hpp"
#include "ssr/faber.hpp"
#include "ssr/recovery.hpp"

#include <json.hpp>

namespace ssr::bench {

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

struct test_function {
    std::string name;
    int dim = 1;
    double alpha_nominal = 0.0;  // nominal mixed smoothness
    std::string tag;             // analytic | kink exponent | witness | data
    eval_fn f;
};

// Context for functions that depend on the recovery configuration (the
// witnesses are built against a budget and normalized in a Besov norm).
struct function_context {
    int m = 0;
    double alpha = 1.5;
    double p = 2.0;
    double theta = 2.0;
};

inline double parse_real(const std::string& s) {
    if (s == "inf" || s == "oo") return besov::inf;
    return std::stod(s);
}

// Registry keyed by name with parameter suffixes, e.g. "kink:beta=1.5".
inline test_function make_function(const std::string& spec, int d, const function_context& ctx) {
    test_function tf;
    tf.name = spec;
    tf.dim = d;
    std::string name = spec, args;
    if (auto pos = spec.find(':'); pos != std::string::npos) {
        name = spec.substr(0, pos);
        args = spec.substr(pos + 1);
    }
    if (name == "sine") {
        tf.tag = "analytic";
        tf.alpha_nominal = besov::inf;
        tf.f = [](std::span<const double> x) {
            double v = 1.0;
            for (double xi : x) v *= std::sin(M_PI * xi);
            return v;
        };
    } else if (name == "quad") {
        tf.tag = "analytic";
        tf.alpha_nominal = besov::inf;
        tf.f = [](std::span<const double> x) {
            double v = 1.0;
            for (double xi : x) v *= xi * (1.0 - xi);
            return v;
        };
    } else if (name == "kink") {
        double beta = 1.5;
        if (args.rfind("beta=", 0) == 0) beta = std::stod(args.substr(5));
        tf.tag = "kink exponent";
        tf.alpha_nominal = beta;  // |x - 1/2|^beta has mixed smoothness ~ beta + 1/p
        tf.f = [beta](std::span<const double> x) {
            double v = 1.0;
            for (double xi : x) v *= std::pow(std::abs(xi - 0.5), beta);
            return v;
        };
    } else if (name == "witness") {
        if (args.size() != 2 || args[0] != 'g' || args[1] < '1' || args[1] > '4')
            throw std::invalid_argument("make_function: witness case must be g1..g4");
        int which = args[1] - '0';
        auto w = faber::make_witness(which, d, ctx.m, ctx.alpha, ctx.p, ctx.theta);
        tf.tag = "witness";
        tf.alpha_nominal = ctx.alpha;
        tf.f = [w](std::span<const double> x) { return w.value(x); };
    } else {
        throw std::invalid_argument("make_function: unknown function '" + spec + "'");
    }
    return tf;
}

// ---------------------------------------------------------------------------
// Worst-case-error estimation for a single function
// ---------------------------------------------------------------------------

struct error_estimate {
    double e_m = 0.0;
    double quadrature_delta = 0.0;
    long long n_multiset = 0;
    long long n_distinct = 0;
    long long samples_used = 0;  // distinct f evaluations during the build
};

namespace detail {

// ||f - R_m(f)||_q with the recovery evaluated on tensor grids in strips.
inline double residual_norm(const eval_fn& f, const recovery::recovery_operator& rm, double q,
                            int mhat, int gauss, double* delta_out) {
    const int d = rm.dim();
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> weights(static_cast<std::size_t>(d));
    if (std::isinf(q)) {
        // dyadic grid at level mhat plus midpoint refinement = level mhat+1
        for (int i = 0; i < d; ++i) {
            long long n = 1LL << (mhat + 1);
            for (long long t = 0; t <= n; ++t)
                axes[static_cast<std::size_t>(i)].push_back(std::ldexp(double(t), -(mhat + 1)));
        }
    } else {
        std::vector<double> gx, gw;
        besov::gauss_legendre(gauss, gx, gw);
        for (int i = 0; i < d; ++i) {
            long long cells = 1LL << mhat;
            double h = 1.0 / double(cells);
            for (long long c = 0; c < cells; ++c)
                for (int n = 0; n < gauss; ++n) {
                    axes[static_cast<std::size_t>(i)].push_back((double(c) + gx[static_cast<std::size_t>(n)]) * h);
                    weights[static_cast<std::size_t>(i)].push_back(gw[static_cast<std::size_t>(n)] * h);
                }
        }
    }
    const std::size_t n0 = axes[0].size();
    std::size_t rest = 1;
    for (int i = 1; i < d; ++i) rest *= axes[static_cast<std::size_t>(i)].size();
    const std::size_t strip_rows = std::max<std::size_t>(1, (1 << 21) / std::max<std::size_t>(rest, 1));

    double sup = 0.0, sup_base = 0.0;
    kahan_sum integral;
    std::vector<double> out;
    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::size_t row0 = 0; row0 < n0; row0 += strip_rows) {
        std::size_t rows = std::min(strip_rows, n0 - row0);
        std::vector<std::vector<double>> strip_axes = axes;
        strip_axes[0].assign(axes[0].begin() + static_cast<long>(row0),
                             axes[0].begin() + static_cast<long>(row0 + rows));
        out.assign(rows * rest, 0.0);
        rm.accumulate_on_grid(strip_axes, out);
        index_vec idx(d, 0);
        index_vec dims(d);
        dims[0] = static_cast<int>(rows);
        for (int i = 1; i < d; ++i) dims[i] = static_cast<int>(axes[static_cast<std::size_t>(i)].size());
        std::size_t pos = 0;
        do {
            x[0] = strip_axes[0][static_cast<std::size_t>(idx[0])];
            for (int i = 1; i < d; ++i) x[static_cast<std::size_t>(i)] = axes[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[i])];
            double fv = f(x);
            if (!std::isfinite(fv)) throw tainted_sample_error("estimate_error: non-finite f value");
            double resid = std::abs(fv - out[pos]);
            if (std::isinf(q)) {
                sup = std::max(sup, resid);
                // base grid = even indices of the refined grid
                bool base = ((row0 + static_cast<std::size_t>(idx[0])) % 2 == 0);
                for (int i = 1; base && i < d; ++i) base = (idx[i] % 2 == 0);
                if (base) sup_base = std::max(sup_base, resid);
            } else {
                double w = weights[0][row0 + static_cast<std::size_t>(idx[0])];
                for (int i = 1; i < d; ++i) w *= weights[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[i])];
                integral.add(w * std::pow(resid, q));
            }
            ++pos;
        } while (ssr::detail::advance(idx, dims));
    }
    if (std::isinf(q)) {
        if (delta_out) *delta_out = std::abs(sup - sup_base) / std::max(sup, 1e-300);
        return sup;
    }
    if (delta_out) *delta_out = 0.0;
    return std::pow(integral.value(), 1.0 / q);
}

}  // namespace detail

inline error_estimate estimate_error(const test_function& tf, int d, int r, const quasi::mask& m,
                                     int budget, double q, int gauss = 8) {
    grid::eval_cache cache;
    auto table = recovery::build_coefficients(tf.f, d, r, m, budget, cache);
    recovery::recovery_operator rm(std::move(table));
    error_estimate est;
    est.e_m = detail::residual_norm(tf.f, rm, q, budget + 2, gauss, &est.quadrature_delta);
    auto card = grid::grid_cardinality(d, budget, 2);
    est.n_multiset = card.multiset_count;
    est.n_distinct = card.distinct_count;
    est.samples_used = cache.misses();
    return est;
}

// ---------------------------------------------------------------------------
// Rate fits
// ---------------------------------------------------------------------------

// Least squares for log2 e_m = a + slope * m (+ c * log2 m).
struct rate_fit {
    double slope = 0.0;
    double polylog_coeff = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
    int points = 0;
    bool polylog = false;
};

inline rate_fit fit_rate(const std::vector<std::pair<int, double>>& errors, bool polylog) {
    std::vector<std::pair<int, double>> pts;
    for (auto [m, e] : errors)
        if (e > 0.0 && m >= 1) pts.push_back({m, e});
    if (pts.size() < 4) throw std::invalid_argument("fit_rate: need at least 4 positive points");
    const int n = static_cast<int>(pts.size());
    const int cols = polylog ? 3 : 2;
    // normal equations for the design [1, m, log2 m]
    double ata[3][3] = {};
    double atb[3] = {};
    for (auto [m, e] : pts) {
        double row[3] = {1.0, double(m), std::log2(double(m))};
        double y = std::log2(e);
        for (int i = 0; i < cols; ++i) {
            atb[i] += row[i] * y;
            for (int j = 0; j < cols; ++j) ata[i][j] += row[i] * row[j];
        }
    }
    // gaussian elimination on the tiny system
    double a[3][4];
    for (int i = 0; i < cols; ++i) {
        for (int j = 0; j < cols; ++j) a[i][j] = ata[i][j];
        a[i][cols] = atb[i];
    }
    for (int i = 0; i < cols; ++i) {
        int piv = i;
        for (int rr = i + 1; rr < cols; ++rr)
            if (std::abs(a[rr][i]) > std::abs(a[piv][i])) piv = rr;
        std::swap(a[i], a[piv]);
        for (int rr = i + 1; rr < cols; ++rr) {
            double fpiv = a[rr][i] / a[i][i];
            for (int j = i; j <= cols; ++j) a[rr][j] -= fpiv * a[i][j];
        }
    }
    double sol[3] = {};
    for (int i = cols - 1; i >= 0; --i) {
        double s = a[i][cols];
        for (int j = i + 1; j < cols; ++j) s -= a[i][j] * sol[j];
        sol[i] = s / a[i][i];
    }
    rate_fit fit;
    fit.intercept = sol[0];
    fit.slope = sol[1];
    fit.polylog_coeff = polylog ? sol[2] : 0.0;
    fit.points = n;
    fit.polylog = polylog;
    double rss = 0.0;
    for (auto [m, e] : pts) {
        double pred = sol[0] + sol[1] * m + (polylog ? sol[2] * std::log2(double(m)) : 0.0);
        double dres = std::log2(e) - pred;
        rss += dres * dres;
    }
    fit.residual = std::sqrt(rss);
    return fit;
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

struct bench_config {
    std::vector<int> dims = {1, 2};
    std::vector<int> orders = {2};
    int level_lo = 2;
    int level_hi = 8;
    std::vector<double> q_values = {besov::inf};
    std::vector<std::string> functions = {"sine", "quad", "kink:beta=1.5"};
    int gauss = 8;
    long long qmc_n = 1LL << 17;
    unsigned long long seed = 0;
    bool fit_polylog = false;
    int fit_min_m = 3;
    double witness_alpha = 1.5;
    double witness_p = 2.0;
    double witness_theta = 2.0;
};

inline bench_config parse_config(const nlohmann::json& j) {
    bench_config c;
    if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<int>>();
    if (j.contains("orders")) c.orders = j.at("orders").get<std::vector<int>>();
    if (j.contains("levels")) {
        c.level_lo = j.at("levels").at("lo").get<int>();
        c.level_hi = j.at("levels").at("hi").get<int>();
    }
    if (j.contains("q_values")) {
        c.q_values.clear();
        for (const auto& q : j.at("q_values"))
            c.q_values.push_back(q.is_string() ? parse_real(q.get<std::string>())
                                               : q.get<double>());
    }
    if (j.contains("functions")) c.functions = j.at("functions").get<std::vector<std::string>>();
    if (j.contains("quadrature")) {
        const auto& qj = j.at("quadrature");
        if (qj.contains("g")) c.gauss = qj.at("g").get<int>();
        if (qj.contains("qmc_n")) c.qmc_n = qj.at("qmc_n").get<long long>();
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<unsigned long long>();
    if (j.contains("fit")) {
        if (j.at("fit").contains("polylog")) c.fit_polylog = j.at("fit").at("polylog").get<bool>();
        if (j.at("fit").contains("min_m")) c.fit_min_m = j.at("fit").at("min_m").get<int>();
    }
    if (j.contains("witness")) {
        const auto& wj = j.at("witness");
        if (wj.contains("alpha")) c.witness_alpha = wj.at("alpha").get<double>();
        if (wj.contains("p")) c.witness_p = wj.at("p").get<double>();
        if (wj.contains("theta")) c.witness_theta = wj.at("theta").get<double>();
    }
    return c;
}

struct bench_row {
    int d = 0, r = 0, m = 0;
    double q = 0.0;
    std::string func;
    long long n_multiset = 0, n_distinct = 0, samples_used = 0;
    double e_m = 0.0;
    std::string status = "ok";  // or the error text
};

struct bench_fit_entry {
    std::string func;
    int d = 0, r = 0;
    double q = 0.0;
    rate_fit fit;
    bool valid = false;
};

struct bench_report {
    bench_config config;
    std::vector<bench_row> rows;
    std::vector<bench_fit_entry> fits;
    std::string environment;
};

inline std::string format_real(double v) {
    if (std::isinf(v)) return "inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline bench_report run_suite(const bench_config& cfg) {
    bench_report rep;
    rep.config = cfg;
    rep.environment = std::string("gxx ") + __VERSION__;
    // row grid, sorted by (d, r, m)
    for (int d : cfg.dims)
        for (int r : cfg.orders)
            for (int m = cfg.level_lo; m <= cfg.level_hi; ++m)
                for (double q : cfg.q_values)
                    for (const auto& fname : cfg.functions) {
                        bench_row row;
                        row.d = d;
                        row.r = r;
                        row.m = m;
                        row.q = q;
                        row.func = fname;
                        rep.rows.push_back(row);
                    }
    parallel_for(static_cast<int>(rep.rows.size()), [&](int i) {
        auto& row = rep.rows[static_cast<std::size_t>(i)];
        try {
            function_context ctx{row.m, cfg.witness_alpha, cfg.witness_p, cfg.witness_theta};
            auto tf = make_function(row.func, row.d, ctx);
            auto mask = quasi::builtin_mask(row.r);
            auto est = estimate_error(tf, row.d, row.r, mask, row.m, row.q, cfg.gauss);
            row.e_m = est.e_m;
            row.n_multiset = est.n_multiset;
            row.n_distinct = est.n_distinct;
            row.samples_used = est.samples_used;
        } catch (const std::exception& e) {
            row.status = e.what();
        }
    });
    // fits per (func, d, r, q) series
    for (int d : cfg.dims)
        for (int r : cfg.orders)
            for (double q : cfg.q_values)
                for (const auto& fname : cfg.functions) {
                    std::vector<std::pair<int, double>> series;
                    for (const auto& row : rep.rows)
                        if (row.d == d && row.r == r && row.q == q && row.func == fname &&
                            row.status == "ok" && row.m >= cfg.fit_min_m)
                            series.push_back({row.m, row.e_m});
                    bench_fit_entry entry;
                    entry.func = fname;
                    entry.d = d;
                    entry.r = r;
                    entry.q = q;
                    try {
                        entry.fit = fit_rate(series, cfg.fit_polylog);
                        entry.valid = true;
                    } catch (const std::exception&) {
                        entry.valid = false;
                    }
                    rep.fits.push_back(entry);
                }
    return rep;
}

inline void write_report_csv(const bench_report& rep, std::ostream& os) {
    os << "d,r,m,q,func,n_multiset,n_distinct,samples_used,e_m,status\n";
    for (const auto& row : rep.rows) {
        os << row.d << ',' << row.r << ',' << row.m << ',' << format_real(row.q) << ','
           << row.func << ',' << row.n_multiset << ',' << row.n_distinct << ','
           << row.samples_used << ',' << format_real(row.e_m) << ','
           << (row.status == "ok" ? "ok" : "error") << '\n';
    }
}

inline nlohmann::ordered_json report_json(const bench_report& rep) {
    nlohmann::ordered_json j;
    j["config"] = {{"dims", rep.config.dims},
                   {"orders", rep.config.orders},
                   {"levels", {{"lo", rep.config.level_lo}, {"hi", rep.config.level_hi}}},
                   {"q_values", [&] {
                        std::vector<std::string> qs;
                        for (double q : rep.config.q_values) qs.push_back(format_real(q));
                        return qs;
                    }()},
                   {"functions", rep.config.functions},
                   {"quadrature", {{"g", rep.config.gauss}, {"qmc_n", rep.config.qmc_n}}},
                   {"seed", rep.config.seed}};
    j["environment"] = rep.environment;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : rep.rows) {
        nlohmann::ordered_json r;
        r["d"] = row.d;
        r["r"] = row.r;
        r["m"] = row.m;
        r["q"] = format_real(row.q);
        r["func"] = row.func;
        r["n_multiset"] = row.n_multiset;
        r["n_distinct"] = row.n_distinct;
        r["samples_used"] = row.samples_used;
        r["e_m"] = row.e_m;
        r["status"] = row.status;
        j["rows"].push_back(r);
    }
    j["fits"] = nlohmann::ordered_json::array();
    for (const auto& f : rep.fits) {
        if (!f.valid) continue;
        nlohmann::ordered_json e;
        e["func"] = f.func;
        e["d"] = f.d;
        e["r"] = f.r;
        e["q"] = format_real(f.q);
        e["slope"] = f.fit.slope;
        e["polylog_coeff"] = f.fit.polylog_coeff;
        e["intercept"] = f.fit.intercept;
        e["residual"] = f.fit.residual;
        e["points"] = f.fit.points;
        j["fits"].push_back(e);
    }
    return j;
}

// gnuplot-ready blocks: one (func, d, r, q) series per block
inline void write_rates_dat(const bench_report& rep, std::ostream& os) {
    for (int d : rep.config.dims)
        for (int r : rep.config.orders)
            for (double q : rep.config.q_values)
                for (const auto& fname : rep.config.functions) {
                    os << "# func=" << fname << " d=" << d << " r=" << r
                       << " q=" << format_real(q) << "\n";
                    for (const auto& row : rep.rows)
                        if (row.d == d && row.r == r && row.q == q && row.func == fname &&
                            row.status == "ok")
                            os << row.m << ' ' << format_real(row.e_m) << '\n';
                    os << "\n\n";
                }
}

}  // namespace ssr::bench
