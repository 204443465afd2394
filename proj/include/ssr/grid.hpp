#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ssr/common.hpp"

namespace ssr::grid {

// ---------------------------------------------------------------------------
// Level sets Delta(m) = { k in Z_+^d : |k|_1 <= m }
// ---------------------------------------------------------------------------

inline long long level_set_size(int d, int m) { return binomial(m + d, d); }

// Lexicographic enumeration; deterministic.
inline std::vector<index_vec> enumerate_levels(int d, int m) {
    if (d < 1) throw std::invalid_argument("enumerate_levels: d must be >= 1");
    if (m < 0) throw std::invalid_argument("enumerate_levels: m must be >= 0");
    std::vector<index_vec> out;
    out.reserve(static_cast<std::size_t>(level_set_size(d, m)));
    index_vec k(d, 0);
    std::function<void(int, int)> rec = [&](int ax, int rem) {
        if (ax == d) {
            out.push_back(k);
            return;
        }
        for (int v = 0; v <= rem; ++v) {
            k[ax] = v;
            rec(ax + 1, rem - v);
        }
        k[ax] = 0;
    };
    rec(0, m);
    return out;
}

// ---------------------------------------------------------------------------
// Canonical dyadic points
// ---------------------------------------------------------------------------

// t * 2^{-level} with t odd, or (0,0) / (1,0) for the endpoints. Integer
// comparisons only; the float value is produced exactly at evaluation time.
struct dyadic_coord {
    int level = 0;
    long long num = 0;

    friend bool operator==(const dyadic_coord& a, const dyadic_coord& b) {
        return a.level == b.level && a.num == b.num;
    }
};

inline dyadic_coord canonical(int level, long long num) {
    if (level < 0 || num < 0 || num > (1LL << level))
        throw std::invalid_argument("canonical: point outside [0,1]");
    while (level > 0 && num % 2 == 0) {
        num /= 2;
        --level;
    }
    return {level, num};
}

inline double coord_value(const dyadic_coord& c) { return std::ldexp(double(c.num), -c.level); }

struct dyadic_point {
    std::vector<dyadic_coord> coords;

    friend bool operator==(const dyadic_point& a, const dyadic_point& b) {
        return a.coords == b.coords;
    }

    std::vector<double> values() const {
        std::vector<double> x(coords.size());
        for (std::size_t i = 0; i < coords.size(); ++i) x[i] = coord_value(coords[i]);
        return x;
    }

    std::string describe() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < coords.size(); ++i) {
            if (i) os << ", ";
            os << coords[i].num << "*2^-" << coords[i].level;
        }
        os << ")";
        return os.str();
    }
};

inline dyadic_point make_point(const index_vec& k, const index_vec& s) {
    dyadic_point p;
    p.coords.resize(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) p.coords[i] = canonical(k[i], s[i]);
    return p;
}

struct dyadic_point_hash {
    std::size_t operator()(const dyadic_point& p) const {
        std::size_t h = 0x9e3779b97f4a7c15ULL;
        for (const auto& c : p.coords) {
            h ^= std::hash<long long>()((static_cast<long long>(c.level) << 48) ^ c.num) +
                 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// Grid cardinalities
// ---------------------------------------------------------------------------

// r_variant = 2: I^d(k) with 0 <= s_i <= 2^{k_i}; r_variant = 1: left nodes
// only, 0 <= s_i <= 2^{k_i}-1.
struct grid_cardinality_result {
    long long multiset_count = 0;
    long long distinct_count = 0;
};

inline grid_cardinality_result grid_cardinality(int d, int m, int r_variant) {
    if (r_variant != 1 && r_variant != 2)
        throw std::invalid_argument("grid_cardinality: r_variant must be 1 or 2");
    grid_cardinality_result out;
    for (const auto& k : enumerate_levels(d, m)) {
        long long multi = 1, fresh = 1;
        for (int i = 0; i < d; ++i) {
            long long n = 1LL << k[i];
            multi *= (r_variant == 2) ? n + 1 : n;
            // new canonical coordinates appearing exactly at level k_i
            long long c;
            if (k[i] == 0)
                c = (r_variant == 2) ? 2 : 1;
            else
                c = 1LL << (k[i] - 1);
            fresh *= c;
        }
        out.multiset_count += multi;
        out.distinct_count += fresh;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deduplicating evaluation cache (single-flight)
// ---------------------------------------------------------------------------

// At most one evaluation of f per canonical point, also under concurrent
// requests: the first requester installs a future and computes, everyone
// else waits on it.
class eval_cache {
public:
    template <class F>
    double get_or_eval(const dyadic_point& p, F&& f) {
        std::shared_future<double> fut;
        std::promise<double> prom;
        bool owner = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = map_.find(p);
            if (it == map_.end()) {
                fut = prom.get_future().share();
                map_.emplace(p, fut);
                owner = true;
                ++misses_;
            } else {
                fut = it->second;
                ++hits_;
            }
        }
        if (owner) {
            try {
                double v = f(p);
                if (!std::isfinite(v))
                    throw tainted_sample_error("non-finite sample at " + p.describe());
                prom.set_value(v);
            } catch (...) {
                prom.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

    long long hits() const { return hits_.load(); }
    long long misses() const { return misses_.load(); }
    long long distinct_points() const {
        std::lock_guard<std::mutex> lock(mu_);
        return static_cast<long long>(map_.size());
    }

private:
    mutable std::mutex mu_;
    std::unordered_map<dyadic_point, std::shared_future<double>, dyadic_point_hash> map_;
    std::atomic<long long> hits_{0};
    std::atomic<long long> misses_{0};
};

// Values in request order; each distinct canonical point evaluated once per
// cache lifetime.
inline std::vector<double> sample(const eval_fn& f, const std::vector<dyadic_point>& points,
                                  eval_cache& cache) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points)
        out.push_back(cache.get_or_eval(p, [&](const dyadic_point& q) {
            auto x = q.values();
            return f(std::span<const double>(x));
        }));
    return out;
}

// ---------------------------------------------------------------------------
// Spline shift ranges
// ---------------------------------------------------------------------------

// J(k): integer-translate shifts with -r/2 < s < 2^k + r/2.
inline int j_lo(int r, int /*k*/) { return -((r - 1) / 2); }
inline int j_hi(int r, int k) { return (1 << k) + (r - 1) / 2; }

// J_r(k): shifts of M^r_{k,s} that do not vanish identically on [0,1];
// equals J(k) for even r, the half-integer range for odd r.
inline int jr_lo(int r, int k) { return (r % 2 == 0) ? j_lo(r, k) : -r + 1; }
inline int jr_hi(int r, int k) { return (r % 2 == 0) ? j_hi(r, k) : (1 << (k + 1)) + r - 1; }

struct index_set_j {
    int order = 2;
    index_vec k;
    index_vec lo, hi;  // inclusive per-axis bounds

    long long size() const {
        long long n = 1;
        for (std::size_t i = 0; i < lo.size(); ++i) n *= hi[i] - lo[i] + 1;
        return n;
    }
    bool contains(const index_vec& s) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (s[i] < lo[i] || s[i] > hi[i]) return false;
        return true;
    }
};

inline index_set_j make_index_set_j(int r, const index_vec& k) {
    index_set_j js;
    js.order = r;
    js.k = k;
    js.lo.resize(k.size());
    js.hi.resize(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        js.lo[i] = jr_lo(r, k[i]);
        js.hi[i] = jr_hi(r, k[i]);
    }
    return js;
}

}  // namespace ssr::grid
