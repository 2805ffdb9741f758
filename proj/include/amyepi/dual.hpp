#pragma once

#include <cmath>

namespace amyepi {

// Forward-mode dual number: value plus one directional derivative.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}
    constexpr Dual(double value, double deriv) : v(value), d(deriv) {}

    Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
    Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
    Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
    Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

inline Dual exp(const Dual& a) { double e = std::exp(a.v); return {e, e * a.d}; }
inline Dual expm1(const Dual& a) { return {std::expm1(a.v), std::exp(a.v) * a.d}; }
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline Dual sqrt(const Dual& a) { double s = std::sqrt(a.v); return {s, a.d / (2.0 * s)}; }
inline Dual abs(const Dual& a) { return a.v < 0 ? -a : a; }
inline Dual pow(const Dual& a, double p) {
    double pv = std::pow(a.v, p);
    return {pv, a.v == 0.0 ? 0.0 : p * pv / a.v * a.d};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

} // namespace amyepi
