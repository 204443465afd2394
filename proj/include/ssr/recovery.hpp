#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "ssr/bspline.hpp"
#include "ssr/common.hpp"
#include "ssr/grid.hpp"
#include "ssr/quasi.hpp"

namespace ssr::recovery {

// ---------------------------------------------------------------------------
// Coefficient tables over Delta(m)
// ---------------------------------------------------------------------------

// One block per level multi-index k: the tensor c^r_{k,s}(f), s in J_r^d(k),
// stored row-major with axis 0 slowest.
struct coefficient_block {
    index_vec k;
    index_vec lo;    // per-axis first shift of J_r(k_i)
    index_vec dims;  // per-axis |J_r(k_i)|
    std::vector<double> c;

    long long size() const { return static_cast<long long>(c.size()); }
};

class coefficient_table {
public:
    coefficient_table() = default;
    coefficient_table(int dim, int order, int budget, quasi::mask m)
        : dim_(dim), order_(order), budget_(budget), mask_(std::move(m)) {}

    int dim() const { return dim_; }
    int order() const { return order_; }
    int budget() const { return budget_; }
    const quasi::mask& mask_used() const { return mask_; }

    std::vector<coefficient_block>& blocks() { return blocks_; }
    const std::vector<coefficient_block>& blocks() const { return blocks_; }

    const coefficient_block& block(const index_vec& k) const {
        for (const auto& b : blocks_)
            if (b.k == k) return b;
        throw std::invalid_argument("coefficient_table: level outside Delta(m)");
    }

    double coefficient(const index_vec& k, const index_vec& s) const {
        const auto& b = block(k);
        std::size_t idx = 0;
        for (int i = 0; i < dim_; ++i) {
            if (s[i] < b.lo[i] || s[i] >= b.lo[i] + b.dims[i]) return 0.0;
            idx = idx * b.dims[i] + static_cast<std::size_t>(s[i] - b.lo[i]);
        }
        return b.c[idx];
    }

private:
    int dim_ = 1;
    int order_ = 2;
    int budget_ = 0;
    quasi::mask mask_;
    std::vector<coefficient_block> blocks_;
};

namespace detail {

using ssr::detail::tensor;

// out[..., s, ...] = sum_j rows[s].w[j] * in[..., j, ...]
inline tensor contract_axis(const tensor& in, int ax,
                            const std::vector<quasi::weight_row<double>>& rows) {
    index_vec odims = in.dims;
    odims[ax] = static_cast<int>(rows.size());
    tensor out(odims);
    std::size_t inner = 1;
    for (std::size_t i = ax + 1; i < in.dims.size(); ++i) inner *= in.dims[i];
    std::size_t outer = 1;
    for (int i = 0; i < ax; ++i) outer *= in.dims[i];
    const std::size_t in_ax = in.dims[ax];
    const std::size_t out_ax = rows.size();
    for (std::size_t o = 0; o < outer; ++o) {
        const double* ib = in.v.data() + o * in_ax * inner;
        double* ob = out.v.data() + o * out_ax * inner;
        for (std::size_t s = 0; s < out_ax; ++s) {
            const auto& row = rows[s];
            double* orow = ob + s * inner;
            for (std::size_t u = 0; u < row.w.size(); ++u) {
                double w = row.w[u];
                if (w == 0.0) continue;
                const double* irow = ib + static_cast<std::size_t>(row.lo + static_cast<int>(u)) * inner;
                for (std::size_t t = 0; t < inner; ++t) orow[t] += w * irow[t];
            }
        }
    }
    return out;
}

// f on the node tensor prod_i {0..2^{k_i}}, all evaluations routed through
// the cache.
inline tensor gather_nodes(const eval_fn& f, const index_vec& k, grid::eval_cache& cache) {
    int d = static_cast<int>(k.size());
    index_vec dims(d);
    for (int i = 0; i < d; ++i) dims[i] = (1 << k[i]) + 1;
    tensor t(dims);
    index_vec j(d, 0);
    std::size_t pos = 0;
    do {
        auto p = grid::make_point(k, j);
        t.v[pos++] = cache.get_or_eval(p, [&](const grid::dyadic_point& q) {
            auto x = q.values();
            return f(std::span<const double>(x));
        });
    } while (ssr::detail::advance(j, dims));
    return t;
}

}  // namespace detail

// Coefficients for all k in Delta(m). Blocks are independent and are built in
// parallel; the result does not depend on the worker count.
inline coefficient_table build_coefficients(const eval_fn& f, int d, int r,
                                            const quasi::mask& m, int budget,
                                            grid::eval_cache& cache) {
    if (m.order != r) throw std::invalid_argument("build_coefficients: mask order mismatch");
    if (budget < 0) throw std::invalid_argument("build_coefficients: budget must be >= 0");
    coefficient_table table(d, r, budget, m);
    auto levels = grid::enumerate_levels(d, budget);
    auto uni = quasi::build_tables(m, budget);
    table.blocks().resize(levels.size());
    std::exception_ptr first_error;
    std::mutex err_mu;
    parallel_for(static_cast<int>(levels.size()), [&](int bi) {
        try {
            const index_vec& k = levels[static_cast<std::size_t>(bi)];
            auto t = detail::gather_nodes(f, k, cache);
            for (int ax = 0; ax < d; ++ax)
                t = detail::contract_axis(t, ax, uni[static_cast<std::size_t>(k[ax])].c_rows);
            coefficient_block b;
            b.k = k;
            b.lo.resize(d);
            b.dims = t.dims;
            for (int i = 0; i < d; ++i) b.lo[i] = grid::jr_lo(r, k[i]);
            b.c = std::move(t.v);
            table.blocks()[static_cast<std::size_t>(bi)] = std::move(b);
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);
    return table;
}

// ---------------------------------------------------------------------------
// Single-level spline combinations g = sum_s a_s M^r_{k,s}
// ---------------------------------------------------------------------------

struct spline_level {
    int order = 2;
    bool half_shift = false;
    index_vec k;
    index_vec lo, dims;
    std::vector<double> coef;

    double value(std::span<const double> x) const {
        int d = static_cast<int>(k.size());
        // per-axis active windows
        std::vector<std::vector<std::pair<int, double>>> act(d);
        for (int i = 0; i < d; ++i) {
            double u = std::ldexp(x[i], k[i]);
            int s_first, s_last;
            if (!half_shift) {
                s_first = static_cast<int>(std::floor(u - order / 2.0)) ;
                s_last = s_first + order + 1;
            } else {
                s_first = static_cast<int>(std::floor(2.0 * u - order));
                s_last = s_first + 2 * order + 1;
            }
            s_first = std::max(s_first, lo[i]);
            s_last = std::min(s_last, lo[i] + dims[i] - 1);
            for (int s = s_first; s <= s_last; ++s) {
                double mv = bspline::eval_dilated_unit(order, k[i], s, half_shift, x[i]);
                if (mv != 0.0) act[i].push_back({s - lo[i], mv});
            }
            if (act[i].empty()) return 0.0;
        }
        kahan_sum acc;
        index_vec pick(d, 0);
        while (true) {
            double prod = 1.0;
            std::size_t idx = 0;
            for (int i = 0; i < d; ++i) {
                prod *= act[i][static_cast<std::size_t>(pick[i])].second;
                idx = idx * dims[i] + static_cast<std::size_t>(act[i][static_cast<std::size_t>(pick[i])].first);
            }
            acc.add(prod * coef[idx]);
            int ax = d - 1;
            while (ax >= 0 && ++pick[ax] >= static_cast<int>(act[ax].size())) pick[ax--] = 0;
            if (ax < 0) break;
        }
        return acc.value();
    }
};

// q_k(f) as a spline_level
inline spline_level level_component(const coefficient_table& t, const index_vec& k) {
    const auto& b = t.block(k);
    spline_level g;
    g.order = t.order();
    g.half_shift = (t.order() % 2 != 0);
    g.k = b.k;
    g.lo = b.lo;
    g.dims = b.dims;
    g.coef = b.c;
    return g;
}

// Mixed Q_k(f) = sum_s a_{k,s}(f) M_{k,s} (integer translates for every r)
inline spline_level build_q_operator(const eval_fn& f, int d, int r, const quasi::mask& m,
                                     const index_vec& k, grid::eval_cache& cache) {
    int kmax = 0;
    for (int v : k) kmax = std::max(kmax, v);
    auto uni = quasi::build_tables(m, kmax);
    auto t = detail::gather_nodes(f, k, cache);
    for (int ax = 0; ax < d; ++ax)
        t = detail::contract_axis(t, ax, uni[static_cast<std::size_t>(k[ax])].a_rows);
    spline_level g;
    g.order = r;
    g.half_shift = false;
    g.k = k;
    g.lo.resize(d);
    g.dims = t.dims;
    for (int i = 0; i < d; ++i) g.lo[i] = grid::j_lo(r, k[i]);
    g.coef = std::move(t.v);
    return g;
}

// ---------------------------------------------------------------------------
// The sampling operator R_m
// ---------------------------------------------------------------------------

class recovery_operator {
public:
    explicit recovery_operator(coefficient_table t) : table_(std::move(t)) {}

    const coefficient_table& table() const { return table_; }
    int dim() const { return table_.dim(); }
    int order() const { return table_.order(); }
    int budget() const { return table_.budget(); }

    // R_m(f)(x); deterministic (k,s) order with compensated accumulation.
    double value(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim())
            throw std::invalid_argument("recovery: dimension mismatch");
        for (double xi : x)
            if (!(xi >= 0.0 && xi <= 1.0))
                throw std::domain_error("recovery: point outside [0,1]^d");
        const int r = order();
        const bool half = (r % 2 != 0);
        kahan_sum acc;
        std::vector<std::vector<std::pair<int, double>>> act(dim());
        for (const auto& b : table_.blocks()) {
            bool empty = false;
            for (int i = 0; i < dim(); ++i) {
                act[i].clear();
                double u = std::ldexp(x[i], b.k[i]);
                int s_first = half ? static_cast<int>(std::floor(2.0 * u - r))
                                   : static_cast<int>(std::floor(u - r / 2.0));
                int s_last = s_first + (half ? 2 * r + 1 : r + 1);
                s_first = std::max(s_first, b.lo[i]);
                s_last = std::min(s_last, b.lo[i] + b.dims[i] - 1);
                for (int s = s_first; s <= s_last; ++s) {
                    double mv = bspline::eval_dilated_unit(r, b.k[i], s, half, x[i]);
                    if (mv != 0.0) act[i].push_back({s - b.lo[i], mv});
                }
                if (act[i].empty()) {
                    empty = true;
                    break;
                }
            }
            if (empty) continue;
            index_vec pick(dim(), 0);
            while (true) {
                double prod = 1.0;
                std::size_t idx = 0;
                for (int i = 0; i < dim(); ++i) {
                    prod *= act[i][static_cast<std::size_t>(pick[i])].second;
                    idx = idx * b.dims[i] +
                          static_cast<std::size_t>(act[i][static_cast<std::size_t>(pick[i])].first);
                }
                acc.add(prod * b.c[idx]);
                int ax = dim() - 1;
                while (ax >= 0 && ++pick[ax] >= static_cast<int>(act[ax].size())) pick[ax--] = 0;
                if (ax < 0) break;
            }
        }
        return acc.value();
    }

    double level_value(const index_vec& k, std::span<const double> x) const {
        return level_component(table_, k).value(x);
    }

    // Adds R_m(f) on the tensor grid axes[0] x ... x axes[d-1] into out
    // (row-major, axis 0 slowest). Fast paths for d = 1, 2; point fallback
    // otherwise.
    void accumulate_on_grid(const std::vector<std::vector<double>>& axes,
                            std::vector<double>& out) const;

private:
    struct axis_eval {
        int width = 0;
        std::vector<int> first;    // index into block axis range (s - lo), clamped
        std::vector<int> count;
        std::vector<double> vals;  // vals[t * width + u]
    };

    axis_eval eval_axis(const std::vector<double>& coords, int level, int lo, int dim_sz) const;

    coefficient_table table_;
};

inline recovery_operator::axis_eval recovery_operator::eval_axis(const std::vector<double>& coords,
                                                                 int level, int lo,
                                                                 int dim_sz) const {
    const int r = order();
    const bool half = (r % 2 != 0);
    axis_eval ae;
    ae.width = half ? 2 * r + 1 : r + 1;
    std::size_t n = coords.size();
    ae.first.resize(n);
    ae.count.resize(n);
    ae.vals.assign(n * static_cast<std::size_t>(ae.width), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double u = std::ldexp(coords[t], level);
        int s_first = half ? static_cast<int>(std::floor(2.0 * u - r))
                           : static_cast<int>(std::floor(u - r / 2.0));
        int s_last = s_first + ae.width;
        s_first = std::max(s_first, lo);
        s_last = std::min(s_last, lo + dim_sz - 1);
        ae.first[t] = std::max(0, s_first - lo);
        int c = 0;
        for (int s = s_first; s <= s_last && c < ae.width; ++s, ++c)
            ae.vals[t * static_cast<std::size_t>(ae.width) + static_cast<std::size_t>(c)] =
                bspline::eval_dilated_unit(r, level, s, half, coords[t]);
        ae.count[t] = std::max(0, c);
    }
    return ae;
}

inline void recovery_operator::accumulate_on_grid(const std::vector<std::vector<double>>& axes,
                                                  std::vector<double>& out) const {
    const int d = dim();
    if (static_cast<int>(axes.size()) != d)
        throw std::invalid_argument("accumulate_on_grid: axes/dimension mismatch");
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    if (out.size() != total) throw std::invalid_argument("accumulate_on_grid: bad output size");

    if (d == 1) {
        for (const auto& b : table_.blocks()) {
            axis_eval ae = eval_axis(axes[0], b.k[0], b.lo[0], b.dims[0]);
            for (std::size_t t = 0; t < axes[0].size(); ++t) {
                double acc = 0.0;
                for (int u = 0; u < ae.count[t]; ++u)
                    acc += ae.vals[t * ae.width + u] * b.c[static_cast<std::size_t>(ae.first[t] + u)];
                out[t] += acc;
            }
        }
        return;
    }
    if (d == 2) {
        const std::size_t n1 = axes[0].size(), n2 = axes[1].size();
        std::vector<double> mid;
        for (const auto& b : table_.blocks()) {
            axis_eval a1 = eval_axis(axes[0], b.k[0], b.lo[0], b.dims[0]);
            axis_eval a2 = eval_axis(axes[1], b.k[1], b.lo[1], b.dims[1]);
            const std::size_t j1 = b.dims[0], j2 = b.dims[1];
            mid.assign(j1 * n2, 0.0);
            for (std::size_t s1 = 0; s1 < j1; ++s1) {
                const double* crow = b.c.data() + s1 * j2;
                double* mrow = mid.data() + s1 * n2;
                for (std::size_t t2 = 0; t2 < n2; ++t2) {
                    double acc = 0.0;
                    const double* v = a2.vals.data() + t2 * static_cast<std::size_t>(a2.width);
                    for (int u = 0; u < a2.count[t2]; ++u)
                        acc += v[u] * crow[static_cast<std::size_t>(a2.first[t2] + u)];
                    mrow[t2] = acc;
                }
            }
            for (std::size_t t1 = 0; t1 < n1; ++t1) {
                double* orow = out.data() + t1 * n2;
                const double* v = a1.vals.data() + t1 * static_cast<std::size_t>(a1.width);
                for (int u = 0; u < a1.count[t1]; ++u) {
                    double w = v[u];
                    if (w == 0.0) continue;
                    const double* mrow = mid.data() + static_cast<std::size_t>(a1.first[t1] + u) * n2;
                    for (std::size_t t2 = 0; t2 < n2; ++t2) orow[t2] += w * mrow[t2];
                }
            }
        }
        return;
    }
    // generic fallback
    index_vec dims(d);
    for (int i = 0; i < d; ++i) dims[i] = static_cast<int>(axes[i].size());
    index_vec idx(d, 0);
    std::vector<double> x(d);
    std::size_t pos = 0;
    do {
        for (int i = 0; i < d; ++i) x[i] = axes[i][static_cast<std::size_t>(idx[i])];
        out[pos++] += value(x);
    } while (ssr::detail::advance(idx, dims));
}

// ---------------------------------------------------------------------------
// Sampling form: R_m(f) = sum_{k,j} f(2^{-k} j) psi_{k,j}
// ---------------------------------------------------------------------------

// Univariate psi tables per scalar level: for a grid node j in [0, 2^l],
// psi_{l,j} = sum_s gamma_{l,j}(s) M^r_{l,s}. gamma is the transpose of the
// c-functional table, so the two pipelines are algebraically identical and
// must agree numerically.
struct psi_weights {
    int dim = 1;
    int order = 2;
    int budget = 0;
    std::vector<std::vector<quasi::weight_row<double>>> levels;  // [l][j] -> row over s

    // largest number of B-splines any psi_{l,j} touches
    int max_support(int level) const {
        int worst = 0;
        for (const auto& row : levels[static_cast<std::size_t>(level)]) {
            int nnz = 0;
            for (double w : row.w)
                if (w != 0.0) ++nnz;
            worst = std::max(worst, nnz);
        }
        return worst;
    }
};

inline psi_weights build_psi_weights(int d, int r, const quasi::mask& m, int budget) {
    auto uni = quasi::build_tables(m, budget);
    psi_weights psi;
    psi.dim = d;
    psi.order = r;
    psi.budget = budget;
    psi.levels.resize(static_cast<std::size_t>(budget) + 1);
    for (int l = 0; l <= budget; ++l) {
        long long n = 1LL << l;
        std::vector<quasi::detail::row_builder<double>> builders(static_cast<std::size_t>(n) + 1);
        const auto& tab = uni[static_cast<std::size_t>(l)];
        for (std::size_t si = 0; si < tab.c_rows.size(); ++si) {
            const auto& row = tab.c_rows[si];
            int s = tab.c_lo + static_cast<int>(si);
            for (std::size_t u = 0; u < row.w.size(); ++u) {
                if (row.w[u] == 0.0) continue;
                builders[static_cast<std::size_t>(row.lo + static_cast<int>(u))].add(s, row.w[u]);
            }
        }
        auto& lv = psi.levels[static_cast<std::size_t>(l)];
        lv.resize(builders.size());
        for (std::size_t j = 0; j < builders.size(); ++j) lv[j] = builders[j].finish();
    }
    return psi;
}

// psi_{l,j}(x)
inline double psi_value(const psi_weights& psi, int level, int j, double x) {
    const auto& row = psi.levels[static_cast<std::size_t>(level)][static_cast<std::size_t>(j)];
    const bool half = (psi.order % 2 != 0);
    double acc = 0.0;
    for (std::size_t t = 0; t < row.w.size(); ++t) {
        if (row.w[t] == 0.0) continue;
        int s = row.lo + static_cast<int>(t);
        double mv = bspline::eval_dilated_unit(psi.order, level, s, half, x);
        if (mv != 0.0) acc += row.w[t] * mv;
    }
    return acc;
}

// Evaluates the sampling form at x, grouping by grid node j; this exercises
// a different summation route than recovery_operator::value.
inline double sampling_value(const psi_weights& psi, const eval_fn& f,
                             std::span<const double> x, grid::eval_cache& cache) {
    const int d = psi.dim;
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("sampling_value: dimension mismatch");
    kahan_sum acc;
    auto levels = grid::enumerate_levels(d, psi.budget);
    const bool half = (psi.order % 2 != 0);
    const int reach = (half ? psi.order : psi.order / 2) + 1;
    for (const auto& k : levels) {
        // active node windows per axis: psi_{l,j}(x) = 0 unless some spline
        // in its row covers x
        std::vector<std::vector<std::pair<int, double>>> act(d);
        bool empty = false;
        for (int i = 0; i < d; ++i) {
            long long n = 1LL << k[i];
            const auto& lv = psi.levels[static_cast<std::size_t>(k[i])];
            int span_w = 0;
            for (const auto& row : lv) span_w = std::max(span_w, static_cast<int>(row.w.size()));
            double u = std::ldexp(x[i], k[i]);
            int j_lo = std::max(0, static_cast<int>(std::floor(u)) - (span_w + reach));
            int j_hi = std::min(static_cast<int>(n), static_cast<int>(std::ceil(u)) + span_w + reach);
            for (int j = j_lo; j <= j_hi; ++j) {
                double pv = psi_value(psi, k[i], j, x[i]);
                if (pv != 0.0) act[i].push_back({j, pv});
            }
            if (act[i].empty()) {
                empty = true;
                break;
            }
        }
        if (empty) continue;
        index_vec pick(d, 0);
        index_vec j(d);
        while (true) {
            double prod = 1.0;
            for (int i = 0; i < d; ++i) {
                prod *= act[i][static_cast<std::size_t>(pick[i])].second;
                j[i] = act[i][static_cast<std::size_t>(pick[i])].first;
            }
            auto p = grid::make_point(k, j);
            double fv = cache.get_or_eval(p, [&](const grid::dyadic_point& q) {
                auto xv = q.values();
                return f(std::span<const double>(xv));
            });
            acc.add(prod * fv);
            int ax = d - 1;
            while (ax >= 0 && ++pick[ax] >= static_cast<int>(act[ax].size())) pick[ax--] = 0;
            if (ax < 0) break;
        }
    }
    return acc.value();
}

}  // namespace ssr::recovery
