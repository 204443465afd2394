#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace ssr {

// Exact rational arithmetic for mask/functional weights. All quantities in
// the quasi-interpolant tables are small fractions (mask weights, Lagrange
// end-point weights, refinement factors), so int64 never comes close to
// overflowing.
struct rational {
    long long num = 0;
    long long den = 1;

    rational() = default;
    rational(long long n) : num(n), den(1) {}
    rational(long long n, long long d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw std::invalid_argument("rational: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend rational operator+(const rational& a, const rational& b) {
        return rational(a.num * b.den + b.num * a.den, a.den * b.den);
    }
    friend rational operator-(const rational& a, const rational& b) {
        return rational(a.num * b.den - b.num * a.den, a.den * b.den);
    }
    friend rational operator*(const rational& a, const rational& b) {
        return rational(a.num * b.num, a.den * b.den);
    }
    friend rational operator/(const rational& a, const rational& b) {
        return rational(a.num * b.den, a.den * b.num);
    }
    rational& operator+=(const rational& o) { return *this = *this + o; }
    rational& operator-=(const rational& o) { return *this = *this - o; }
    rational& operator*=(const rational& o) { return *this = *this * o; }
    friend bool operator==(const rational& a, const rational& b) {
        return a.num == b.num && a.den == b.den;
    }
    bool is_zero() const { return num == 0; }
};

inline double weight_value(const rational& r) { return r.to_double(); }
inline double weight_value(double r) { return r; }
inline bool weight_zero(const rational& r) { return r.num == 0; }
inline bool weight_zero(double r) { return r == 0.0; }

}  // namespace ssr
