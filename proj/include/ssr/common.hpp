#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ssr {

// Multi-index over axes; size() is the dimension d.
using index_vec = std::vector<int>;

// A function value came back non-finite; carries the offending point.
class tainted_sample_error : public std::runtime_error {
public:
    explicit tainted_sample_error(const std::string& what) : std::runtime_error(what) {}
};

inline long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long long b = 1;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
}

inline double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

// Compensated accumulation; summation order is fixed by the caller.
class kahan_sum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

using eval_fn = std::function<double(std::span<const double>)>;
using eval_fn1 = std::function<double(double)>;

inline int worker_count() {
    if (const char* env = std::getenv("SSR_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

// Static partition; results must be written to disjoint slots so the
// outcome is identical for any worker count.
template <class F>
void parallel_for(int n, F&& body) {
    int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

namespace detail {

// Dense row-major tensor, axis 0 slowest.
struct tensor {
    index_vec dims;
    std::vector<double> v;

    tensor() = default;
    explicit tensor(index_vec d) : dims(std::move(d)), v(count(dims), 0.0) {}

    static std::size_t count(const index_vec& d) {
        std::size_t n = 1;
        for (int x : d) n *= static_cast<std::size_t>(x);
        return n;
    }
};

// Odometer over a dims-shaped index; returns false when exhausted.
inline bool advance(index_vec& idx, const index_vec& dims) {
    for (int ax = static_cast<int>(dims.size()) - 1; ax >= 0; --ax) {
        if (++idx[ax] < dims[ax]) return true;
        idx[ax] = 0;
    }
    return false;
}

}  // namespace detail

}  // namespace ssr
