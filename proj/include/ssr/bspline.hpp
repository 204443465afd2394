#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "ssr/common.hpp"

namespace ssr::bspline {

// Centered cardinal B-spline of order r: support [-r/2, r/2], knots at
// -r/2, -r/2+1, ..., r/2, polynomial of degree r-1 between knots. The
// pieces are expanded once at construction from the truncated-power form,
// with exact integer numerators over (r-1)!.
//
// For r = 1 the support is taken right-open, [-1/2, 1/2), so that integer
// translates tile the line without double counting.
class centered_bspline {
public:
    explicit centered_bspline(int order) : order_(order) {
        if (order < 1) throw std::invalid_argument("centered_bspline: order must be >= 1");
        int deg = order - 1;
        double fact = 1.0;
        for (int i = 2; i <= deg; ++i) fact *= i;
        pieces_.assign(static_cast<std::size_t>(order) * order, 0.0);
        for (int piece = 0; piece < order; ++piece) {
            for (int nu = 0; nu <= deg; ++nu) {
                long long acc = 0;
                for (int j = 0; j <= piece; ++j) {
                    long long pw = 1;
                    for (int e = 0; e < deg - nu; ++e) pw *= (piece - j);
                    long long term = binomial(order, j) * binomial(deg, nu) * pw;
                    acc += (j % 2 == 0) ? term : -term;
                }
                pieces_[static_cast<std::size_t>(piece) * order + nu] =
                    static_cast<double>(acc) / fact;
            }
        }
    }

    int order() const { return order_; }
    double support_radius() const { return order_ / 2.0; }

    // M(x)
    double operator()(double x) const {
        double u = x + order_ / 2.0;
        if (u < 0.0 || u >= order_) return 0.0;
        int piece = static_cast<int>(u);
        if (piece >= order_) return 0.0;  // guards u == order_ after rounding
        double t = u - piece;
        const double* c = &pieces_[static_cast<std::size_t>(piece) * order_];
        double value = c[order_ - 1];
        for (int nu = order_ - 2; nu >= 0; --nu) value = value * t + c[nu];
        return value;
    }

private:
    int order_;
    std::vector<double> pieces_;  // pieces_[piece * order + nu]
};

// Shared evaluators, one per order.
inline const centered_bspline& centered(int order) {
    if (order < 1) throw std::invalid_argument("centered: order must be >= 1");
    static std::mutex mu;
    static std::vector<std::unique_ptr<centered_bspline>> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (order >= static_cast<int>(cache.size())) cache.resize(order + 1);
    if (!cache[order]) cache[order] = std::make_unique<centered_bspline>(order);
    return *cache[order];
}

inline double eval_centered(int order, double x) { return centered(order)(x); }

// M_{k,s}(x) = M(2^k x - s) for integer translates, M*_{k,s}(x) = M(2^k x - s/2)
// for the half-integer family used with odd orders.
struct dilated_bspline {
    int order = 2;
    int level = 0;
    int shift = 0;
    bool half_shift = false;

    double operator()(double x) const {
        double u = std::ldexp(x, level) - (half_shift ? 0.5 * shift : double(shift));
        return eval_centered(order, u);
    }
};

inline double eval_dilated(int order, int level, int shift, bool half_shift, double x) {
    double u = std::ldexp(x, level) - (half_shift ? 0.5 * shift : double(shift));
    return eval_centered(order, u);
}

// M^r_{k,s}: integer translates for even r, half-integer translates for odd r.
inline double eval_mr(int order, int level, int shift, double x) {
    return eval_dilated(order, level, shift, order % 2 != 0, x);
}

// Dilated evaluation restricted to [0,1]. Identical to eval_dilated except
// at x = 1 for r = 1, where the box is closed on the right (left limit), so
// the dilated system tiles all of [0,1] like the N_{k,s} step functions do.
inline double eval_dilated_unit(int order, int level, int shift, bool half_shift, double x) {
    double u = std::ldexp(x, level) - (half_shift ? 0.5 * shift : double(shift));
    if (order == 1 && x == 1.0) return (u > -0.5 && u <= 0.5) ? 1.0 : 0.0;
    return eval_centered(order, u);
}

// Mixed d-variate B-spline: product of univariate factors.
struct mixed_bspline {
    int order = 2;
    index_vec level;
    index_vec shift;
    bool half_shift = false;

    int dim() const { return static_cast<int>(level.size()); }

    double operator()(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim())
            throw std::invalid_argument("mixed_bspline: dimension mismatch");
        double value = 1.0;
        for (int i = 0; i < dim(); ++i) {
            value *= eval_dilated_unit(order, level[i], shift[i], half_shift, x[i]);
            if (value == 0.0) return 0.0;
        }
        return value;
    }
};

// M(x) - 2^{-r+1} sum_j C(r,j) M(2x - j + r/2); identically zero in exact
// arithmetic by the two-scale relation.
inline double refinement_residual(int order, double x) {
    if (order < 1) throw std::invalid_argument("refinement_residual: order must be >= 1");
    const centered_bspline& m = centered(order);
    double rhs = 0.0;
    for (int j = 0; j <= order; ++j)
        rhs += static_cast<double>(binomial(order, j)) * m(2.0 * x - j + order / 2.0);
    return m(x) - std::ldexp(rhs, 1 - order);
}

}  // namespace ssr::bspline
