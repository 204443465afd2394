#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "ssr/common.hpp"
#include "ssr/recovery.hpp"

namespace ssr::besov {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// (alpha, p, theta, d, r); the window 1/p < alpha < r is what the
// norm-equivalence statements need, so it is checked up front.
struct besov_params {
    double alpha = 1.0;
    double p = 2.0;
    double theta = 2.0;
    int dim = 1;
    int order = 2;

    besov_params(double a, double p_, double th, int d, int r)
        : alpha(a), p(p_), theta(th), dim(d), order(r) {
        if (!(alpha > 0.0)) throw std::invalid_argument("besov_params: alpha must be > 0");
        if (!(p > 0.0) || !(theta > 0.0))
            throw std::invalid_argument("besov_params: p, theta must be in (0, inf]");
        if (d < 1 || r < 1) throw std::invalid_argument("besov_params: bad dimension or order");
        double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
        if (!(inv_p < alpha && alpha < double(r)))
            throw std::invalid_argument("besov_params: need 1/p < alpha < r");
    }

    double inv_p() const { return std::isinf(p) ? 0.0 : 1.0 / p; }
};

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

// Nodes and weights on [0,1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2 * j - 1) * t * p1 - (j - 1) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            double dp = (n == 1) ? 1.0 : n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        double p0 = 1.0, p1 = t;
        for (int j = 2; j <= n; ++j) {
            double p2 = ((2 * j - 1) * t * p1 - (j - 1) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        double dp = (n == 1) ? 1.0 : n * (t * p1 - p0) / (t * t - 1.0);
        x[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (t + 1.0);
        w[static_cast<std::size_t>(n - 1 - i)] = (n == 1) ? 1.0 : 1.0 / ((1.0 - t * t) * dp * dp);
    }
}

inline double halton_radical_inverse(long long i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

inline std::vector<double> halton_point(long long i, int d) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (d > 12) throw std::invalid_argument("halton_point: d too large");
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = halton_radical_inverse(i + 1, primes[j]);
    return x;
}

// Cells aligned to per-axis dyadic knots, Gauss-Legendre inside each cell;
// exact for piecewise polynomials of per-axis degree <= 2g-1 on aligned
// cells when the exponent is an even integer. Halton sampling as the
// high-dimension fallback.
struct quadrature_rule {
    index_vec cell_levels;  // per-axis dyadic level of the cell grid
    int gauss = 8;
    bool report_delta = true;
    bool qmc = false;
    long long qmc_n = 1LL << 17;

    static quadrature_rule dyadic(int d, int level, int g = 8) {
        quadrature_rule r;
        r.cell_levels.assign(static_cast<std::size_t>(d), level);
        r.gauss = g;
        return r;
    }

    // bundled rule for a budget-m recovery: cells at level m + 2, QMC for d >= 4
    static quadrature_rule for_budget(int d, int m, int g = 8) {
        quadrature_rule r = dyadic(d, m + 2, g);
        if (d >= 4) r.qmc = true;
        return r;
    }
};

struct lq_result {
    double value = 0.0;
    double doubling_delta = 0.0;  // relative change under resolution doubling
};

namespace detail {

inline double tensor_lq_sum(const eval_fn& g, double q, const quadrature_rule& rule, int gauss) {
    int d = static_cast<int>(rule.cell_levels.size());
    std::vector<double> gx, gw;
    gauss_legendre(gauss, gx, gw);
    std::vector<std::vector<double>> px(static_cast<std::size_t>(d)), pw(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        long long cells = 1LL << rule.cell_levels[static_cast<std::size_t>(i)];
        double h = 1.0 / double(cells);
        for (long long c = 0; c < cells; ++c)
            for (int n = 0; n < gauss; ++n) {
                px[static_cast<std::size_t>(i)].push_back((double(c) + gx[static_cast<std::size_t>(n)]) * h);
                pw[static_cast<std::size_t>(i)].push_back(gw[static_cast<std::size_t>(n)] * h);
            }
    }
    index_vec dims(d);
    for (int i = 0; i < d; ++i) dims[i] = static_cast<int>(px[static_cast<std::size_t>(i)].size());
    index_vec idx(d, 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    kahan_sum acc;
    do {
        double w = 1.0;
        for (int i = 0; i < d; ++i) {
            x[static_cast<std::size_t>(i)] = px[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[i])];
            w *= pw[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[i])];
        }
        double v = g(x);
        if (!std::isfinite(v)) throw tainted_sample_error("lq_norm: non-finite integrand value");
        acc.add(w * std::pow(std::abs(v), q));
    } while (ssr::detail::advance(idx, dims));
    return acc.value();
}

inline double grid_max(const eval_fn& g, const index_vec& levels) {
    int d = static_cast<int>(levels.size());
    index_vec dims(d);
    for (int i = 0; i < d; ++i) dims[i] = (1 << levels[static_cast<std::size_t>(i)]) + 1;
    index_vec idx(d, 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    double best = 0.0;
    do {
        for (int i = 0; i < d; ++i)
            x[static_cast<std::size_t>(i)] = std::ldexp(double(idx[i]), -levels[static_cast<std::size_t>(i)]);
        double v = std::abs(g(x));
        if (!std::isfinite(v)) throw tainted_sample_error("lq_norm: non-finite value");
        best = std::max(best, v);
    } while (ssr::detail::advance(idx, dims));
    return best;
}

}  // namespace detail

inline lq_result lq_norm(const eval_fn& g, double q, const quadrature_rule& rule) {
    if (!(q > 0.0)) throw std::invalid_argument("lq_norm: q must be in (0, inf]");
    lq_result out;
    if (rule.qmc) {
        int d = static_cast<int>(rule.cell_levels.size());
        long long n = rule.qmc_n;
        kahan_sum sum, sum_half;
        double mx = 0.0, mx_half = 0.0;
        std::vector<double> x;
        for (long long i = 0; i < n; ++i) {
            x = halton_point(i, d);
            double v = g(x);
            if (!std::isfinite(v)) throw tainted_sample_error("lq_norm: non-finite value");
            double a = std::abs(v);
            if (std::isinf(q)) {
                mx = std::max(mx, a);
                if (i < n / 2) mx_half = std::max(mx_half, a);
            } else {
                double t = std::pow(a, q);
                sum.add(t);
                if (i < n / 2) sum_half.add(t);
            }
        }
        if (std::isinf(q)) {
            out.value = mx;
            out.doubling_delta = std::abs(mx - mx_half) / std::max(mx, 1e-300);
        } else {
            out.value = std::pow(sum.value() / double(n), 1.0 / q);
            double half = std::pow(sum_half.value() / double(n / 2), 1.0 / q);
            out.doubling_delta = std::abs(out.value - half) / std::max(out.value, 1e-300);
        }
        return out;
    }
    if (std::isinf(q)) {
        index_vec fine = rule.cell_levels;
        for (auto& l : fine) ++l;
        double base = detail::grid_max(g, rule.cell_levels);
        double refined = detail::grid_max(g, fine);
        out.value = refined;
        out.doubling_delta = std::abs(refined - base) / std::max(refined, 1e-300);
        return out;
    }
    double s1 = detail::tensor_lq_sum(g, q, rule, rule.gauss);
    out.value = std::pow(s1, 1.0 / q);
    if (rule.report_delta) {
        double s2 = detail::tensor_lq_sum(g, q, rule, 2 * rule.gauss);
        double v2 = std::pow(s2, 1.0 / q);
        out.doubling_delta = std::abs(out.value - v2) / std::max(std::abs(v2), 1e-300);
        out.value = v2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Discrete norms
// ---------------------------------------------------------------------------

namespace detail {

inline double lp_of(std::span<const double> v, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (double a : v) m = std::max(m, std::abs(a));
        return m;
    }
    kahan_sum s;
    for (double a : v) s.add(std::pow(std::abs(a), p));
    return std::pow(s.value(), 1.0 / p);
}

inline double ltheta(std::span<const double> terms, double theta) {
    if (std::isinf(theta)) {
        double m = 0.0;
        for (double t : terms) m = std::max(m, t);
        return m;
    }
    kahan_sum s;
    for (double t : terms) s.add(std::pow(t, theta));
    return std::pow(s.value(), 1.0 / theta);
}

}  // namespace detail

// B_3(f) over the truncation Delta(m):
// ( sum_k ( 2^{(alpha - 1/p)|k|_1} ||{c^r_{k,s}}||_{p,k} )^theta )^{1/theta}
inline double discrete_b3_norm(const recovery::coefficient_table& t, const besov_params& bp) {
    if (t.dim() != bp.dim || t.order() != bp.order)
        throw std::invalid_argument("discrete_b3_norm: parameter/table mismatch");
    std::vector<double> terms;
    terms.reserve(t.blocks().size());
    for (const auto& b : t.blocks()) {
        int k1 = 0;
        for (int ki : b.k) k1 += ki;
        terms.push_back(std::pow(2.0, (bp.alpha - bp.inv_p()) * k1) * detail::lp_of(b.c, bp.p));
    }
    return detail::ltheta(terms, bp.theta);
}

// Per-level B_3 contributions 2^{(alpha - 1/p)|k|_1} ||{c_{k,s}}||_{p,k}.
inline std::vector<std::pair<index_vec, double>> b3_ladder(const recovery::coefficient_table& t,
                                                           const besov_params& bp) {
    std::vector<std::pair<index_vec, double>> out;
    for (const auto& b : t.blocks()) {
        int k1 = 0;
        for (int ki : b.k) k1 += ki;
        out.push_back({b.k, std::pow(2.0, (bp.alpha - bp.inv_p()) * k1) * detail::lp_of(b.c, bp.p)});
    }
    return out;
}

// Variant with the scalar-level weight 2^{(alpha - d/p)k}, k = |k|_1,
// grouping all blocks of equal total level; emitted for comparison only.
inline double discrete_b3_norm_scalar(const recovery::coefficient_table& t,
                                      const besov_params& bp) {
    std::vector<std::vector<double>> by_level(static_cast<std::size_t>(t.budget()) + 1);
    for (const auto& b : t.blocks()) {
        int k1 = 0;
        for (int ki : b.k) k1 += ki;
        auto& dst = by_level[static_cast<std::size_t>(k1)];
        dst.insert(dst.end(), b.c.begin(), b.c.end());
    }
    std::vector<double> terms;
    for (std::size_t l = 0; l < by_level.size(); ++l)
        terms.push_back(std::pow(2.0, (bp.alpha - bp.dim * bp.inv_p()) * double(l)) *
                        detail::lp_of(by_level[l], bp.p));
    return detail::ltheta(terms, bp.theta);
}

// B_2(f) over Delta(m): l_theta of 2^{alpha |k|_1} ||q_k(f)||_p, the level
// norms computed by quadrature on cells aligned to each level's own knots.
struct b2_result {
    double value = 0.0;
    bool resolution_warning = false;
    struct level_term {
        index_vec k;
        double lp_norm = 0.0;
        double term = 0.0;
    };
    std::vector<level_term> levels;
};

inline b2_result b2_norm_via_quadrature(const recovery::coefficient_table& t,
                                        const besov_params& bp, int gauss = 8,
                                        bool check_resolution = true) {
    b2_result out;
    std::vector<double> terms;
    for (const auto& b : t.blocks()) {
        auto g = recovery::level_component(t, b.k);
        quadrature_rule rule;
        rule.cell_levels.resize(b.k.size());
        for (std::size_t i = 0; i < b.k.size(); ++i) rule.cell_levels[i] = b.k[i] + 2;
        rule.gauss = gauss;
        rule.report_delta = check_resolution;
        if (bp.dim >= 4) rule.qmc = true;
        auto lr = lq_norm([&g](std::span<const double> x) { return g.value(x); }, bp.p, rule);
        if (check_resolution && lr.doubling_delta > 0.01) out.resolution_warning = true;
        int k1 = 0;
        for (int ki : b.k) k1 += ki;
        double term = std::pow(2.0, bp.alpha * k1) * lr.value;
        out.levels.push_back({b.k, lr.value, term});
        terms.push_back(term);
    }
    out.value = detail::ltheta(terms, bp.theta);
    return out;
}

// ---------------------------------------------------------------------------
// Mixed modulus of smoothness (estimator)
// ---------------------------------------------------------------------------

// Lower estimate of omega_l^e(f, t)_p: the sup over h is scanned on a
// geometric ladder h_i = t_i * 2^{-u/4} and the x-norm is taken over
// I^d(h,e) = {x : x_i, x_i + l h_i in [0,1]}.
inline double modulus_estimate(const eval_fn& f, int l, const std::vector<int>& axes_e,
                               std::vector<double> t, double p, int budget = 32) {
    if (l < 1) throw std::invalid_argument("modulus_estimate: l must be >= 1");
    int d = static_cast<int>(t.size());
    if (axes_e.empty()) throw std::invalid_argument("modulus_estimate: empty axis set");
    for (int ax : axes_e)
        if (ax < 0 || ax >= d) throw std::invalid_argument("modulus_estimate: bad axis");
    int ne = static_cast<int>(axes_e.size());
    std::vector<long long> binom(static_cast<std::size_t>(l) + 1);
    for (int j = 0; j <= l; ++j) binom[static_cast<std::size_t>(j)] = binomial(l, j);

    const int x_res = 32;  // x samples per axis (33 points)
    double best = 0.0;
    index_vec ladder(ne, 0);
    index_vec ladder_dims(ne, budget);
    std::vector<double> h(static_cast<std::size_t>(d), 0.0);
    do {
        for (int i = 0; i < ne; ++i)
            h[static_cast<std::size_t>(axes_e[static_cast<std::size_t>(i)])] =
                t[static_cast<std::size_t>(axes_e[static_cast<std::size_t>(i)])] *
                std::pow(2.0, -0.25 * ladder[i]);
        // domain box: x_i in [0, 1 - l h_i] on e-axes, [0,1] elsewhere
        std::vector<double> hi(static_cast<std::size_t>(d), 1.0);
        bool feasible = true;
        for (int ax : axes_e) {
            hi[static_cast<std::size_t>(ax)] = 1.0 - l * h[static_cast<std::size_t>(ax)];
            if (hi[static_cast<std::size_t>(ax)] < 0.0) feasible = false;
        }
        if (!feasible) continue;
        // mixed difference at x: sum over j in {0..l}^e of prod (-1)^{l-j_i} C(l,j_i) f(x + j h)
        auto diff_at = [&](const std::vector<double>& x0) {
            index_vec j(ne, 0);
            index_vec jd(ne, l + 1);
            std::vector<double> xx(x0);
            double acc = 0.0;
            do {
                double c = 1.0;
                for (int i = 0; i < ne; ++i) {
                    int ji = j[i];
                    double sign = ((l - ji) % 2 == 0) ? 1.0 : -1.0;
                    c *= sign * double(binom[static_cast<std::size_t>(ji)]);
                    xx[static_cast<std::size_t>(axes_e[static_cast<std::size_t>(i)])] =
                        x0[static_cast<std::size_t>(axes_e[static_cast<std::size_t>(i)])] +
                        ji * h[static_cast<std::size_t>(axes_e[static_cast<std::size_t>(i)])];
                }
                acc += c * f(xx);
            } while (ssr::detail::advance(j, jd));
            return acc;
        };
        index_vec xi(d, 0);
        index_vec xdims(d, x_res + 1);
        std::vector<double> x0(static_cast<std::size_t>(d));
        if (std::isinf(p)) {
            double m = 0.0;
            do {
                for (int i = 0; i < d; ++i)
                    x0[static_cast<std::size_t>(i)] = hi[static_cast<std::size_t>(i)] * xi[i] / double(x_res);
                m = std::max(m, std::abs(diff_at(x0)));
            } while (ssr::detail::advance(xi, xdims));
            best = std::max(best, m);
        } else {
            // trapezoid-weighted sum over the box
            kahan_sum s;
            double cellw = 1.0;
            for (int i = 0; i < d; ++i) cellw *= hi[static_cast<std::size_t>(i)] / double(x_res);
            do {
                double w = cellw;
                for (int i = 0; i < d; ++i)
                    if (xi[i] == 0 || xi[i] == x_res) w *= 0.5;
                for (int i = 0; i < d; ++i)
                    x0[static_cast<std::size_t>(i)] = hi[static_cast<std::size_t>(i)] * xi[i] / double(x_res);
                s.add(w * std::pow(std::abs(diff_at(x0)), p));
            } while (ssr::detail::advance(xi, xdims));
            best = std::max(best, std::pow(s.value(), 1.0 / p));
        }
    } while (ssr::detail::advance(ladder, ladder_dims));
    return best;
}

// ---------------------------------------------------------------------------
// Appendix inequality probes
// ---------------------------------------------------------------------------

// || sum g_k ||_q / ( sum_k || 2^{(1/p - 1/q)|k|_1} g_k ||_p^q )^{1/q}
inline double embedding_ratio(const std::vector<recovery::spline_level>& levels, double p,
                              double q, int cell_level_pad = 2, int gauss = 8) {
    if (levels.empty()) throw std::invalid_argument("embedding_ratio: no levels");
    if (!(0.0 < p && p < q && std::isfinite(q)))
        throw std::invalid_argument("embedding_ratio: need 0 < p < q < inf");
    int d = static_cast<int>(levels.front().k.size());
    index_vec kmax(d, 0);
    for (const auto& g : levels)
        for (int i = 0; i < d; ++i) kmax[i] = std::max(kmax[i], g.k[i]);
    quadrature_rule rule;
    rule.cell_levels.resize(d);
    for (int i = 0; i < d; ++i) rule.cell_levels[i] = kmax[i] + cell_level_pad;
    rule.gauss = gauss;
    rule.report_delta = false;
    auto sum_fn = [&levels](std::span<const double> x) {
        double acc = 0.0;
        for (const auto& g : levels) acc += g.value(x);
        return acc;
    };
    double num = lq_norm(sum_fn, q, rule).value;
    kahan_sum den_acc;
    for (const auto& g : levels) {
        quadrature_rule lrule;
        lrule.cell_levels.resize(d);
        for (int i = 0; i < d; ++i) lrule.cell_levels[i] = g.k[i] + cell_level_pad;
        lrule.gauss = gauss;
        lrule.report_delta = false;
        double lp = lq_norm([&g](std::span<const double> x) { return g.value(x); }, p, lrule).value;
        int k1 = 0;
        for (int ki : g.k) k1 += ki;
        den_acc.add(std::pow(std::pow(2.0, (1.0 / p - 1.0 / q) * k1) * lp, q));
    }
    double den = std::pow(den_acc.value(), 1.0 / q);
    return num / den;
}

// Nikol'skii direction: ||g||_q * 2^{-|(1/p - 1/q) k|_1} / ||g||_p for a
// single-level g in Sigma_r^d(k), p <= q.
inline double nikolskii_ratio(const recovery::spline_level& g, double p, double q,
                              int cell_level_pad = 2, int gauss = 8) {
    int d = static_cast<int>(g.k.size());
    quadrature_rule rule;
    rule.cell_levels.resize(d);
    for (int i = 0; i < d; ++i) rule.cell_levels[i] = g.k[i] + cell_level_pad;
    rule.gauss = gauss;
    rule.report_delta = false;
    auto fn = [&g](std::span<const double> x) { return g.value(x); };
    double nq = lq_norm(fn, q, rule).value;
    double np = lq_norm(fn, p, rule).value;
    int k1 = 0;
    for (int ki : g.k) k1 += ki;
    double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
    return nq * std::pow(2.0, -(inv_p - inv_q) * k1) / np;
}

}  // namespace ssr::besov
