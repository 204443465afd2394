#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssr/bspline.hpp"
#include "ssr/common.hpp"
#include "ssr/rational.hpp"

#include <json.hpp>

namespace ssr::quasi {

// Finite even weight sequence lambda(j), |j| <= mu, defining the coefficient
// functional Lambda(f,s) = sum_j lambda(j) f(s-j). Builtin masks carry exact
// rational weights; masks loaded from config keep doubles only.
struct mask {
    int order = 2;
    int mu = 0;
    std::vector<double> weights;      // index j + mu
    std::vector<rational> exact;      // same layout, empty unless exactly known

    double weight(int j) const { return weights[static_cast<std::size_t>(j + mu)]; }
    bool has_exact() const { return !exact.empty(); }
    rational exact_weight(int j) const { return exact[static_cast<std::size_t>(j + mu)]; }

    double norm() const {
        double n = 0.0;
        for (double w : weights) n += std::abs(w);
        return n;
    }
};

inline int min_mu(int order) { return (order - 1) / 2; }

inline void check_mask(int order, int mu, std::span<const double> w) {
    if (order < 1) throw std::invalid_argument("mask: order must be >= 1");
    if (mu < min_mu(order)) throw std::invalid_argument("mask: mu must be >= r/2 - 1");
    if (static_cast<int>(w.size()) != 2 * mu + 1)
        throw std::invalid_argument("mask: need 2*mu + 1 weights");
    for (int j = 1; j <= mu; ++j)
        if (w[static_cast<std::size_t>(mu + j)] != w[static_cast<std::size_t>(mu - j)])
            throw std::invalid_argument("mask: weights must be even, lambda(-j) == lambda(j)");
}

inline mask make_mask(int order, int mu, std::span<const double> w) {
    check_mask(order, mu, w);
    mask m;
    m.order = order;
    m.mu = mu;
    m.weights.assign(w.begin(), w.end());
    return m;
}

inline mask make_exact_mask(int order, int mu, std::vector<rational> w) {
    mask m;
    m.order = order;
    m.mu = mu;
    m.exact = std::move(w);
    m.weights.resize(m.exact.size());
    for (std::size_t i = 0; i < m.exact.size(); ++i) m.weights[i] = m.exact[i].to_double();
    check_mask(order, mu, m.weights);
    return m;
}

// The four reference masks: nodal for r = 1, 2; the classical quadric and
// cubic three-point masks for r = 3, 4.
inline mask builtin_mask(int order) {
    switch (order) {
        case 1:
        case 2:
            return make_exact_mask(order, 0, {rational(1)});
        case 3:
            return make_exact_mask(3, 1, {rational(-1, 8), rational(10, 8), rational(-1, 8)});
        case 4:
            return make_exact_mask(4, 1, {rational(-1, 6), rational(8, 6), rational(-1, 6)});
        default:
            throw std::invalid_argument("builtin_mask: no builtin for order " +
                                        std::to_string(order));
    }
}

// Config format: {"order": r, "mu": mu, "weights": [lambda(-mu) .. lambda(mu)]}
inline mask mask_from_json(const nlohmann::json& j) {
    int order = j.at("order").get<int>();
    int mu = j.at("mu").get<int>();
    std::vector<double> w = j.at("weights").get<std::vector<double>>();
    return make_mask(order, mu, w);
}

inline mask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mask: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return mask_from_json(j);
}

// Polynomial-reproduction report: max |Q(x^nu) - x^nu| on a dense grid for
// each degree nu < r, where Q(f,x) = sum_s Lambda(f,s) M(x-s) on the line.
struct mask_report {
    std::vector<double> max_error;  // per degree 0 .. r-1
    double tolerance = 1e-10;

    bool pass() const {
        for (double e : max_error)
            if (!(e <= tolerance)) return false;
        return true;
    }
};

inline mask_report validate_mask(const mask& m) {
    const auto& M = bspline::centered(m.order);
    mask_report rep;
    rep.max_error.assign(m.order, 0.0);
    const int grid_points = 1601;
    const double x_lo = -4.0, x_hi = 4.0;
    for (int g = 0; g <= grid_points; ++g) {
        double x = x_lo + (x_hi - x_lo) * g / grid_points;
        int s_lo = static_cast<int>(std::floor(x - m.order / 2.0));
        int s_hi = static_cast<int>(std::ceil(x + m.order / 2.0));
        for (int nu = 0; nu < m.order; ++nu) {
            kahan_sum q;
            for (int s = s_lo; s <= s_hi; ++s) {
                double mv = M(x - s);
                if (mv == 0.0) continue;
                double lam = 0.0;
                for (int j = -m.mu; j <= m.mu; ++j) lam += m.weight(j) * ipow(double(s - j), nu);
                q.add(lam * mv);
            }
            double err = std::abs(q.value() - ipow(x, nu));
            rep.max_error[nu] = std::max(rep.max_error[nu], err);
        }
    }
    return rep;
}

}  // namespace ssr::quasi
