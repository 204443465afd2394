#pragma once

#include <cmath>
#include <vector>

#include "ssr/common.hpp"

namespace ssr::quasi {

// Newton-form interpolation data on given nodes.
struct newton_poly {
    std::vector<double> nodes;
    std::vector<double> dd;  // leading divided differences

    static newton_poly fit(std::vector<double> nodes, std::vector<double> values) {
        newton_poly p;
        p.nodes = std::move(nodes);
        p.dd = std::move(values);
        for (std::size_t j = 1; j < p.dd.size(); ++j)
            for (std::size_t i = p.dd.size() - 1; i >= j; --i)
                p.dd[i] = (p.dd[i] - p.dd[i - 1]) / (p.nodes[i] - p.nodes[i - j]);
        return p;
    }

    double operator()(double x) const {
        double v = dd.back();
        for (std::size_t i = dd.size() - 1; i-- > 0;) v = v * (x - nodes[i]) + dd[i];
        return v;
    }
};

// Extension of f from [0,1] to the line: the Lagrange polynomial U_k through
// the left end nodes for x < 0, f itself on [0,1], and V_k through the right
// end nodes for x > 1. When 2^k + 1 < r the interpolation degree drops to
// r' = min(r, 2^k + 1) so that only in-domain nodes are ever sampled.
class boundary_extension {
public:
    boundary_extension(eval_fn1 f, int order, int level)
        : f_(std::move(f)), level_(level), rp_(std::min(order, (1 << level) + 1)) {
        if (level < 0) throw std::invalid_argument("boundary_extension: level must be >= 0");
        double h = std::ldexp(1.0, -level);
        long long n = 1LL << level;
        std::vector<double> lx(rp_), lv(rp_), rx(rp_), rv(rp_);
        for (int i = 0; i < rp_; ++i) {
            lx[i] = i * h;
            lv[i] = f_(lx[i]);
            rx[i] = (n - rp_ + 1 + i) * h;
            rv[i] = f_(rx[i]);
        }
        left_ = newton_poly::fit(std::move(lx), std::move(lv));
        right_ = newton_poly::fit(std::move(rx), std::move(rv));
    }

    int effective_degree() const { return rp_ - 1; }

    double operator()(double x) const {
        if (x < 0.0) return left_(x);
        if (x > 1.0) return right_(x);
        return f_(x);
    }

private:
    eval_fn1 f_;
    int level_;
    int rp_;
    newton_poly left_, right_;
};

inline boundary_extension extend(eval_fn1 f, int order, int level) {
    return boundary_extension(std::move(f), order, level);
}

}  // namespace ssr::quasi
