#pragma once

#include <array>
#include <cmath>

namespace icgkit::detail {

// Forward-mode dual number with N tangent directions.
template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit promotion of constants

    static Dual variable(double value, int slot) {
        Dual x(value);
        x.d[slot] = 1.0;
        return x;
    }

    // Chain rule for a scalar function with value f and derivative df at v.
    Dual chain(double f, double df) const {
        Dual r(f);
        for (int i = 0; i < N; ++i) r.d[i] = df * d[i];
        return r;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        const double q = v * inv;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
        v = q;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
    friend Dual operator-(const Dual& a) { return a.chain(-a.v, -1.0); }

    friend Dual operator*(double k, const Dual& a) { return a.chain(k * a.v, k); }
    friend Dual operator*(const Dual& a, double k) { return a.chain(k * a.v, k); }
    friend Dual operator+(const Dual& a, double k) { return a.chain(a.v + k, 1.0); }
    friend Dual operator+(double k, const Dual& a) { return a.chain(a.v + k, 1.0); }
    friend Dual operator-(const Dual& a, double k) { return a.chain(a.v - k, 1.0); }
    friend Dual operator-(double k, const Dual& a) { return a.chain(k - a.v, -1.0); }
};

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
    return x.v;
}

template <int N>
Dual<N> exp(const Dual<N>& x) {
    const double e = std::exp(x.v);
    return x.chain(e, e);
}
template <int N>
Dual<N> sqrt(const Dual<N>& x) {
    const double s = std::sqrt(x.v);
    return x.chain(s, 0.5 / s);
}
template <int N>
Dual<N> cos(const Dual<N>& x) {
    return x.chain(std::cos(x.v), -std::sin(x.v));
}
template <int N>
Dual<N> sin(const Dual<N>& x) {
    return x.chain(std::sin(x.v), std::cos(x.v));
}

using std::cos;
using std::exp;
using std::sin;
using std::sqrt;

}  // namespace icgkit::detail
