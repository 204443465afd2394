#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ssr/bspline.hpp"
#include "ssr/common.hpp"
#include "ssr/grid.hpp"
#include "ssr/recovery.hpp"

namespace ssr::faber {

// ---------------------------------------------------------------------------
// Bases
// ---------------------------------------------------------------------------

// N_{k,s}: dyadic step functions, half-open cells except the last, which is
// closed so that sum_s N_{k,s} = 1 on all of [0,1].
inline double n_eval(int k, int s, double x) {
    double u = std::ldexp(x, k) - s;
    if (s == (1 << k) - 1) return (u >= 0.0 && u <= 1.0) ? 1.0 : 0.0;
    return (u >= 0.0 && u < 1.0) ? 1.0 : 0.0;
}

inline int z_count(int r, int k) {
    if (k == 0) return (r == 2) ? 2 : 1;
    return 1 << (k - 1);
}

// phi^r_{k,s}
inline double phi(int r, int k, int s, double x) {
    if (r == 1) {
        if (k == 0) return n_eval(0, 0, x);
        return n_eval(k, 2 * s + 1, x);
    }
    if (r == 2) {
        if (k == 0) return bspline::eval_dilated(2, 0, s, false, x);
        return bspline::eval_dilated(2, k, 2 * s + 1, false, x);
    }
    throw std::invalid_argument("phi: r must be 1 or 2");
}

// lambda^r_{k,s} as a weight vector over the level-k nodes j in [0, 2^k]
inline quasi::weight_row<double> lambda_row(int r, int k, int s) {
    quasi::weight_row<double> row;
    if (r == 1) {
        if (k == 0) {
            row.lo = 0;
            row.w = {1.0};
        } else {
            row.lo = 2 * s;
            row.w = {-1.0, 1.0};  // forward difference at 2^{-k+1} s
        }
    } else if (r == 2) {
        if (k == 0) {
            row.lo = s;  // f(0), f(1)
            row.w = {1.0};
        } else {
            row.lo = 2 * s;
            row.w = {-0.5, 1.0, -0.5};  // -1/2 second difference
        }
    } else {
        throw std::invalid_argument("lambda_row: r must be 1 or 2");
    }
    return row;
}

inline std::vector<quasi::weight_row<double>> lambda_rows(int r, int k) {
    std::vector<quasi::weight_row<double>> rows;
    int n = z_count(r, k);
    rows.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) rows.push_back(lambda_row(r, k, s));
    return rows;
}

// ---------------------------------------------------------------------------
// Piecewise-constant interpolation operators (univariate)
// ---------------------------------------------------------------------------

// Pi_k(f) = sum_{s < 2^k} f(2^{-k}s) N_{k,s}; Pi_{-1} = 0
inline double pi_operator_value(const eval_fn1& f, int k, double x) {
    if (k < 0) return 0.0;
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("pi_k: x outside [0,1]");
    long long n = 1LL << k;
    long long s = static_cast<long long>(std::floor(std::ldexp(x, k)));
    if (s >= n) s = n - 1;  // closed last cell
    return f(std::ldexp(double(s), -k));
}

// pi_k = Pi_k - Pi_{k-1}
inline double pi_component_value(const eval_fn1& f, int k, double x) {
    return pi_operator_value(f, k, x) - (k > 0 ? pi_operator_value(f, k - 1, x) : 0.0);
}

// ---------------------------------------------------------------------------
// d-variate coefficients and the interpolant R^r_m
// ---------------------------------------------------------------------------

struct faber_block {
    index_vec k;
    index_vec dims;  // z_count per axis
    std::vector<double> c;
};

struct faber_coefficients {
    int dim = 1;
    int order = 2;
    int budget = 0;
    std::vector<faber_block> blocks;

    const faber_block& block(const index_vec& k) const {
        for (const auto& b : blocks)
            if (b.k == k) return b;
        throw std::invalid_argument("faber_coefficients: level outside Delta(m)");
    }

    double coefficient(const index_vec& k, const index_vec& s) const {
        const auto& b = block(k);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < b.dims.size(); ++i) {
            if (s[i] < 0 || s[i] >= b.dims[i]) return 0.0;
            idx = idx * b.dims[i] + static_cast<std::size_t>(s[i]);
        }
        return b.c[idx];
    }
};

inline faber_coefficients faber_coeffs(const eval_fn& f, int r, int d, int m,
                                       grid::eval_cache& cache) {
    if (r != 1 && r != 2) throw std::invalid_argument("faber_coeffs: r must be 1 or 2");
    faber_coefficients out;
    out.dim = d;
    out.order = r;
    out.budget = m;
    auto levels = grid::enumerate_levels(d, m);
    out.blocks.resize(levels.size());
    parallel_for(static_cast<int>(levels.size()), [&](int bi) {
        const index_vec& k = levels[static_cast<std::size_t>(bi)];
        auto t = recovery::detail::gather_nodes(f, k, cache);
        for (int ax = 0; ax < d; ++ax)
            t = recovery::detail::contract_axis(t, ax, lambda_rows(r, k[ax]));
        faber_block b;
        b.k = k;
        b.dims = t.dims;
        b.c = std::move(t.v);
        out.blocks[static_cast<std::size_t>(bi)] = std::move(b);
    });
    return out;
}

// R^r_m(f)(x) = sum_{k in Delta(m)} sum_{s} lambda^r_{k,s}(f) phi^r_{k,s}(x)
class faber_recovery {
public:
    explicit faber_recovery(faber_coefficients c) : coef_(std::move(c)) {}

    const faber_coefficients& coefficients() const { return coef_; }

    double value(std::span<const double> x) const {
        const int d = coef_.dim;
        const int r = coef_.order;
        if (static_cast<int>(x.size()) != d)
            throw std::invalid_argument("faber_recovery: dimension mismatch");
        kahan_sum acc;
        std::vector<std::vector<std::pair<int, double>>> act(d);
        for (const auto& b : coef_.blocks) {
            bool empty = false;
            for (int i = 0; i < d; ++i) {
                act[i].clear();
                int n = b.dims[i];
                int center = (b.k[i] == 0)
                                 ? 0
                                 : static_cast<int>(std::floor(std::ldexp(x[i], b.k[i] - 1)));
                for (int s = std::max(0, center - 1); s <= std::min(n - 1, center + 1); ++s) {
                    double pv = phi(r, b.k[i], s, x[i]);
                    if (pv != 0.0) act[i].push_back({s, pv});
                }
                if (act[i].empty()) {
                    empty = true;
                    break;
                }
            }
            if (empty) continue;
            index_vec pick(d, 0);
            while (true) {
                double prod = 1.0;
                std::size_t idx = 0;
                for (int i = 0; i < d; ++i) {
                    prod *= act[i][static_cast<std::size_t>(pick[i])].second;
                    idx = idx * b.dims[i] +
                          static_cast<std::size_t>(act[i][static_cast<std::size_t>(pick[i])].first);
                }
                acc.add(prod * b.c[idx]);
                int ax = d - 1;
                while (ax >= 0 && ++pick[ax] >= static_cast<int>(act[ax].size())) pick[ax--] = 0;
                if (ax < 0) break;
            }
        }
        return acc.value();
    }

private:
    faber_coefficients coef_;
};

// ---------------------------------------------------------------------------
// Sampling form psi^r
// ---------------------------------------------------------------------------

// Univariate psi^r_{k,s} written over the phi basis: list of (t, coeff)
// meaning sum_t coeff * phi^r_{k,t}. Index s runs over I_r(k): [0, 2^k - 1]
// for r = 1, [0, 2^k] for r = 2.
struct psi_faber_entry {
    std::vector<std::pair<int, double>> terms;
};

inline psi_faber_entry psi_faber_univariate(int r, int k, int s) {
    psi_faber_entry e;
    if (r == 1) {
        if (k == 0) {
            e.terms = {{0, 1.0}};
        } else if (s % 2 == 1) {
            e.terms = {{(s - 1) / 2, 1.0}};
        } else {
            e.terms = {{s / 2, -1.0}};
        }
    } else if (r == 2) {
        if (k == 0) {
            e.terms = {{s, 1.0}};
        } else if (s == 0) {
            e.terms = {{0, -0.5}};
        } else if (s == (1 << k)) {
            e.terms = {{(1 << (k - 1)) - 1, -0.5}};
        } else if (s % 2 == 1) {
            e.terms = {{(s - 1) / 2, 1.0}};
        } else {
            e.terms = {{s / 2, -0.5}, {s / 2 - 1, -0.5}};
        }
    } else {
        throw std::invalid_argument("psi_faber_univariate: r must be 1 or 2");
    }
    return e;
}

inline double psi_faber_value(int r, int k, int s, double x) {
    auto e = psi_faber_univariate(r, k, s);
    double acc = 0.0;
    for (const auto& [t, c] : e.terms) acc += c * phi(r, k, t, x);
    return acc;
}

inline long long i_r_count(int r, int k) { return (r == 1) ? (1LL << k) : (1LL << k) + 1; }

// sum_{k in Delta(m)} sum_{j in I_r^d(k)} f(2^{-k} j) psi^r_{k,j}(x)
inline double faber_sampling_value(int r, int d, int m, const eval_fn& f,
                                   std::span<const double> x, grid::eval_cache& cache) {
    kahan_sum acc;
    for (const auto& k : grid::enumerate_levels(d, m)) {
        std::vector<std::vector<std::pair<int, double>>> act(d);
        bool empty = false;
        for (int i = 0; i < d; ++i) {
            long long n = i_r_count(r, k[i]);
            long long center = static_cast<long long>(std::floor(std::ldexp(x[i], k[i])));
            long long lo = std::max(0LL, center - 4);
            long long hi = std::min(n - 1, center + 4);
            for (long long j = lo; j <= hi; ++j) {
                double pv = psi_faber_value(r, k[i], static_cast<int>(j), x[i]);
                if (pv != 0.0) act[i].push_back({static_cast<int>(j), pv});
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

// ---------------------------------------------------------------------------
// Lower-bound witnesses
// ---------------------------------------------------------------------------

// Functions supported on Faber levels with |k|_1 = m + 1, so R^2_m
// annihilates them exactly. The coefficient value is chosen so the discrete
// norm B* equals 1.
struct witness {
    int which = 1;
    int dim = 1;
    int budget = 0;  // the m it is built against
    double alpha = 1.0, p = 2.0, theta = 2.0;
    double coeff = 1.0;
    std::vector<index_vec> levels;
    bool all_shifts = true;             // g1/g2: all s in Z_2^d(k)
    std::vector<index_vec> single_shift;  // g3/g4: one s per level

    long long support_size() const {
        long long n = 0;
        for (const auto& k : levels) {
            if (all_shifts) {
                long long c = 1;
                for (int ki : k) c *= static_cast<long long>(z_count(2, ki));
                n += c;
            } else {
                n += 1;
            }
        }
        return n;
    }

    double lambda_coefficient(const index_vec& k, const index_vec& s) const {
        for (std::size_t li = 0; li < levels.size(); ++li) {
            if (levels[li] != k) continue;
            if (all_shifts) {
                for (std::size_t i = 0; i < k.size(); ++i)
                    if (s[i] < 0 || s[i] >= z_count(2, k[i])) return 0.0;
                return coeff;
            }
            return (s == single_shift[li]) ? coeff : 0.0;
        }
        return 0.0;
    }

    double value(std::span<const double> x) const {
        kahan_sum acc;
        for (std::size_t li = 0; li < levels.size(); ++li) {
            const auto& k = levels[li];
            double prod = 1.0;
            for (std::size_t i = 0; i < k.size() && prod != 0.0; ++i) {
                if (all_shifts) {
                    // exactly one bump of the level covers x (two touch with
                    // value zero at dyadic breaks)
                    int n = z_count(2, k[i]);
                    int center = static_cast<int>(std::floor(std::ldexp(x[i], k[i] - 1)));
                    double v = 0.0;
                    for (int s = std::max(0, center - 1); s <= std::min(n - 1, center + 1); ++s)
                        v += phi(2, k[i], s, x[i]);
                    prod *= v;
                } else {
                    prod *= phi(2, k[i], single_shift[li][static_cast<std::size_t>(i)], x[i]);
                }
            }
            acc.add(prod);
        }
        return coeff * acc.value();
    }
};

namespace detail {

inline std::vector<index_vec> gamma_levels(int d, int m, int min_coord) {
    // {k : |k|_1 = m + 1, k_i >= min_coord}
    std::vector<index_vec> out;
    int rem = m + 1 - d * min_coord;
    if (rem < 0) return out;
    for (auto base : grid::enumerate_levels(d, rem)) {
        int sum = 0;
        for (int v : base) sum += v;
        if (sum != rem) continue;
        index_vec k(base);
        for (auto& v : k) v += min_coord;
        out.push_back(k);
    }
    return out;
}

}  // namespace detail

inline witness make_witness(int which, int d, int m, double alpha, double p, double theta) {
    if (which < 1 || which > 4) throw std::invalid_argument("make_witness: case must be g1..g4");
    if (which <= 2 && m < 1) throw std::invalid_argument("make_witness: g1/g2 need m >= 1");
    if (which >= 3 && m < 2) throw std::invalid_argument("make_witness: g3/g4 need m >= 2");
    witness w;
    w.which = which;
    w.dim = d;
    w.budget = m;
    w.alpha = alpha;
    w.p = p;
    w.theta = theta;
    int min_coord = (which >= 3) ? 2 : 1;
    auto gamma = detail::gamma_levels(d, m, min_coord);
    if (gamma.empty())
        throw std::invalid_argument("make_witness: no admissible level for these d, m");
    if (which == 1 || which == 3) {
        w.levels = {gamma.front()};
    } else {
        w.levels = gamma;
    }
    w.all_shifts = (which <= 2);
    if (!w.all_shifts) {
        for (const auto& k : w.levels) {
            index_vec s(d);
            for (int i = 0; i < d; ++i)
                s[i] = (k[i] > 2) ? (1 << (k[i] - 1)) - 2 : 0;  // s(k)_i = sum_{j=1}^{k_i-2} 2^j
            w.single_shift.push_back(s);
        }
    }
    // normalize the discrete norm B* to 1
    double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    std::vector<double> terms;
    for (const auto& k : w.levels) {
        int k1 = 0;
        for (int ki : k) k1 += ki;
        double cnt = 1.0;
        if (w.all_shifts)
            for (int ki : k) cnt *= static_cast<double>(z_count(2, ki));
        double term = std::pow(2.0, (alpha - inv_p) * k1) * std::pow(cnt, inv_p);
        terms.push_back(term);
    }
    double bstar;
    if (std::isinf(theta)) {
        bstar = 0.0;
        for (double t : terms) bstar = std::max(bstar, t);
    } else {
        double s = 0.0;
        for (double t : terms) s += std::pow(t, theta);
        bstar = std::pow(s, 1.0 / theta);
    }
    w.coeff = 1.0 / bstar;
    return w;
}

}  // namespace ssr::faber
