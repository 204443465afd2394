#pragma once

#include <map>
#include <span>
#include <vector>

#include "ssr/boundary.hpp"
#include "ssr/bspline.hpp"
#include "ssr/common.hpp"
#include "ssr/grid.hpp"
#include "ssr/mask.hpp"

namespace ssr::quasi {

// Sparse weight vector over grid-node indices lo .. lo + w.size() - 1.
template <class S>
struct weight_row {
    int lo = 0;
    std::vector<S> w;

    int hi() const { return lo + static_cast<int>(w.size()) - 1; }
    bool empty() const { return w.empty(); }
};

namespace detail {

template <class S>
struct row_builder {
    std::map<int, S> acc;

    void add(int j, const S& v) {
        auto [it, inserted] = acc.emplace(j, v);
        if (!inserted) it->second += v;
    }

    weight_row<S> finish() const {
        weight_row<S> r;
        if (acc.empty()) return r;
        r.lo = acc.begin()->first;
        int hi = acc.rbegin()->first;
        r.w.assign(static_cast<std::size_t>(hi - r.lo + 1), S{});
        for (const auto& [j, v] : acc) r.w[static_cast<std::size_t>(j - r.lo)] = v;
        return r;
    }
};

template <class S>
S mask_weight(const mask& m, int j);
template <>
inline rational mask_weight<rational>(const mask& m, int j) { return m.exact_weight(j); }
template <>
inline double mask_weight<double>(const mask& m, int j) { return m.weight(j); }

template <class S>
S scalar_half_pow(int e);  // 2^{-e}
template <>
inline rational scalar_half_pow<rational>(int e) { return rational(1, 1LL << e); }
template <>
inline double scalar_half_pow<double>(int e) { return std::ldexp(1.0, -e); }

// Lagrange basis value L_nu(i) over integer nodes, all in grid units.
template <class S>
S lagrange_at(const std::vector<int>& nodes, int nu, int i) {
    S v{1};
    for (std::size_t u = 0; u < nodes.size(); ++u) {
        if (static_cast<int>(u) == nu) continue;
        v *= S(i - nodes[u]) / S(nodes[nu] - nodes[u]);
    }
    return v;
}

}  // namespace detail

// Per-level functional tables: every a_{k,s} and c^r_{k,s} written out as a
// finite weight vector over the level-k grid nodes j in [0, 2^k]. Values of
// the extension f_k outside [0,1] are folded back onto the r' end nodes via
// exact Lagrange weights, so a functional never references anything but
// in-domain samples.
template <class S>
struct level_table {
    int order = 2;
    int k = 0;
    int a_lo = 0, c_lo = 0;
    std::vector<weight_row<S>> a_rows;  // s in J(k)
    std::vector<weight_row<S>> c_rows;  // s in J_r(k)

    const weight_row<S>& a_row(int s) const { return a_rows[static_cast<std::size_t>(s - a_lo)]; }
    const weight_row<S>& c_row(int s) const { return c_rows[static_cast<std::size_t>(s - c_lo)]; }
};

template <class S>
std::vector<weight_row<S>> build_a_rows(const mask& m, int k) {
    const int r = m.order;
    const long long n = 1LL << k;
    const int rp = std::min(r, static_cast<int>(n) + 1);
    std::vector<int> left_nodes(rp), right_nodes(rp);
    for (int i = 0; i < rp; ++i) {
        left_nodes[i] = i;
        right_nodes[i] = static_cast<int>(n) - rp + 1 + i;
    }
    std::vector<weight_row<S>> rows;
    for (int s = grid::j_lo(r, k); s <= grid::j_hi(r, k); ++s) {
        detail::row_builder<S> b;
        for (int t = -m.mu; t <= m.mu; ++t) {
            S lam = detail::mask_weight<S>(m, t);
            if (weight_zero(lam)) continue;
            int i = s - t;
            if (i >= 0 && i <= n) {
                b.add(i, lam);
            } else {
                const auto& nodes = (i < 0) ? left_nodes : right_nodes;
                for (int nu = 0; nu < rp; ++nu)
                    b.add(nodes[nu], lam * detail::lagrange_at<S>(nodes, nu, i));
            }
        }
        rows.push_back(b.finish());
    }
    return rows;
}

// c-rows at level k from the a-rows at levels k and k-1 via the two-scale
// relation. A level-(k-1) node i contributes at level-k node 2i.
template <class S>
std::vector<weight_row<S>> build_c_rows(const mask& m, int k,
                                        const std::vector<weight_row<S>>& a_k,
                                        const std::vector<weight_row<S>>& a_km1) {
    const int r = m.order;
    const bool even = (r % 2 == 0);
    const S factor = detail::scalar_half_pow<S>(r - 1);
    std::vector<weight_row<S>> rows;

    auto add_scaled_doubled = [](detail::row_builder<S>& b, const weight_row<S>& src, const S& c) {
        for (std::size_t u = 0; u < src.w.size(); ++u) {
            if (weight_zero(src.w[u])) continue;
            b.add(2 * (src.lo + static_cast<int>(u)), c * src.w[u]);
        }
    };

    for (int s = grid::jr_lo(r, k); s <= grid::jr_hi(r, k); ++s) {
        detail::row_builder<S> b;
        if (even) {
            const auto& ar = a_k[static_cast<std::size_t>(s - grid::j_lo(r, k))];
            for (std::size_t u = 0; u < ar.w.size(); ++u)
                if (!weight_zero(ar.w[u])) b.add(ar.lo + static_cast<int>(u), ar.w[u]);
            if (k > 0) {
                // C_r(k,s) = {(m,j): 2m + j - r/2 = s}
                for (int j = 0; j <= r; ++j) {
                    int twice_m = s + r / 2 - j;
                    if (twice_m % 2 != 0) continue;
                    int mm = twice_m / 2;
                    if (mm < grid::j_lo(r, k - 1) || mm > grid::j_hi(r, k - 1)) continue;
                    S c = factor * S(static_cast<long long>(-binomial(r, j)));
                    add_scaled_doubled(b, a_km1[static_cast<std::size_t>(mm - grid::j_lo(r, k - 1))], c);
                }
            }
        } else {
            if (s % 2 == 0) {
                // even shift: plain level-k functional a_{k,s/2}
                const auto& ar = a_k[static_cast<std::size_t>(s / 2 - grid::j_lo(r, k))];
                for (std::size_t u = 0; u < ar.w.size(); ++u)
                    if (!weight_zero(ar.w[u])) b.add(ar.lo + static_cast<int>(u), ar.w[u]);
            } else if (k > 0) {
                // odd shift: refinement image of level k-1, C_r(k,s) = {(m,j): 4m + 2j - r = s}
                for (int j = 0; j <= r; ++j) {
                    int four_m = s + r - 2 * j;
                    if (four_m % 4 != 0) continue;
                    int mm = four_m / 4;
                    if (mm < grid::j_lo(r, k - 1) || mm > grid::j_hi(r, k - 1)) continue;
                    S c = factor * S(static_cast<long long>(-binomial(r, j)));
                    add_scaled_doubled(b, a_km1[static_cast<std::size_t>(mm - grid::j_lo(r, k - 1))], c);
                }
            }
            // odd shift at k = 0: no coarser level, row stays empty
        }
        rows.push_back(b.finish());
    }
    return rows;
}

template <class S>
std::vector<level_table<S>> build_level_tables(const mask& m, int up_to_level) {
    std::vector<level_table<S>> out(static_cast<std::size_t>(up_to_level) + 1);
    for (int k = 0; k <= up_to_level; ++k) {
        auto& t = out[static_cast<std::size_t>(k)];
        t.order = m.order;
        t.k = k;
        t.a_lo = grid::j_lo(m.order, k);
        t.c_lo = grid::jr_lo(m.order, k);
        t.a_rows = build_a_rows<S>(m, k);
        t.c_rows = build_c_rows<S>(m, k, t.a_rows,
                                   k > 0 ? out[static_cast<std::size_t>(k - 1)].a_rows
                                         : std::vector<weight_row<S>>{});
    }
    return out;
}

// Double-precision tables; exact rational construction when the mask allows,
// converted once at the end.
inline std::vector<level_table<double>> build_tables(const mask& m, int up_to_level) {
    if (!m.has_exact()) return build_level_tables<double>(m, up_to_level);
    auto exact = build_level_tables<rational>(m, up_to_level);
    std::vector<level_table<double>> out(exact.size());
    auto convert = [](const std::vector<weight_row<rational>>& rows) {
        std::vector<weight_row<double>> d(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            d[i].lo = rows[i].lo;
            d[i].w.resize(rows[i].w.size());
            for (std::size_t u = 0; u < rows[i].w.size(); ++u)
                d[i].w[u] = rows[i].w[u].to_double();
        }
        return d;
    };
    for (std::size_t i = 0; i < exact.size(); ++i) {
        out[i].order = exact[i].order;
        out[i].k = exact[i].k;
        out[i].a_lo = exact[i].a_lo;
        out[i].c_lo = exact[i].c_lo;
        out[i].a_rows = convert(exact[i].a_rows);
        out[i].c_rows = convert(exact[i].c_rows);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Univariate coefficient functionals applied to a concrete f
// ---------------------------------------------------------------------------

struct univariate_coefficients {
    int k = 0;
    int lo = 0;
    std::vector<double> values;

    double at(int s) const { return values[static_cast<std::size_t>(s - lo)]; }
    int hi() const { return lo + static_cast<int>(values.size()) - 1; }
};

inline std::vector<double> node_values(const eval_fn1& f, int k) {
    long long n = 1LL << k;
    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (long long j = 0; j <= n; ++j) v[static_cast<std::size_t>(j)] = f(std::ldexp(double(j), -k));
    return v;
}

inline std::vector<double> apply_rows(const std::vector<weight_row<double>>& rows,
                                      std::span<const double> nodes) {
    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double acc = 0.0;
        for (std::size_t u = 0; u < rows[i].w.size(); ++u)
            acc += rows[i].w[u] * nodes[static_cast<std::size_t>(rows[i].lo) + u];
        out[i] = acc;
    }
    return out;
}

// a_{k,s}(f) = sum_{|j| <= mu} lambda(j) f_k(2^{-k}(s - j)), s in J(k)
inline univariate_coefficients a_coeffs(const eval_fn1& f, const mask& m, int k) {
    auto tables = build_tables(m, k);
    auto nodes = node_values(f, k);
    univariate_coefficients out;
    out.k = k;
    out.lo = grid::j_lo(m.order, k);
    out.values = apply_rows(tables[static_cast<std::size_t>(k)].a_rows, nodes);
    return out;
}

// c^r_{k,s}(f), s in J_r(k)
inline univariate_coefficients c_coeffs(const eval_fn1& f, const mask& m, int k) {
    auto tables = build_tables(m, k);
    auto nodes = node_values(f, k);
    univariate_coefficients out;
    out.k = k;
    out.lo = grid::jr_lo(m.order, k);
    out.values = apply_rows(tables[static_cast<std::size_t>(k)].c_rows, nodes);
    return out;
}

// sum_s coeff(s) M_{k,s}(x) or M^r via half_shift; used by the univariate
// operators Q_k and q_k.
inline double spline_sum_value(int order, int level, int lo, std::span<const double> coeff,
                               bool half_shift, double x) {
    kahan_sum acc;
    for (std::size_t i = 0; i < coeff.size(); ++i) {
        if (coeff[i] == 0.0) continue;
        int s = lo + static_cast<int>(i);
        double mv = bspline::eval_dilated_unit(order, level, s, half_shift, x);
        if (mv != 0.0) acc.add(coeff[i] * mv);
    }
    return acc.value();
}

// Q_k(f, x) on [0,1]
inline double q_operator_value(const univariate_coefficients& a, int order, double x) {
    return spline_sum_value(order, a.k, a.lo, a.values, false, x);
}

// q_k(f, x) = Q_k - Q_{k-1} through the c-functionals
inline double q_component_value(const univariate_coefficients& c, int order, double x) {
    return spline_sum_value(order, c.k, c.lo, c.values, order % 2 != 0, x);
}

}  // namespace ssr::quasi
