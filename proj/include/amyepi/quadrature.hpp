#pragma once

// Gauss-Legendre rules, collapsed (Duffy) triangle rules and polygon rules
// built on a centroid fan.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace amyepi::quad {

using Vec2 = Eigen::Vector2d;

struct Rule1D {
    std::vector<double> x, w;  // on [0, 1]
};

/// n-point Gauss-Legendre on [0, 1]; exact for degree 2n - 1.
inline Rule1D gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
        }
        r.x[n - 1 - i] = 0.5 * (z + 1.0);
        r.w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);  // 2/((1-z^2)p'^2) scaled by 1/2
    }
    return r;
}

inline const Rule1D& gauss_legendre_cached(int n) {
    static std::map<int, Rule1D> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
    return it->second;
}

struct Rule2D {
    std::vector<Vec2> x;
    std::vector<double> w;

    std::size_t size() const { return w.size(); }
    double total_weight() const {
        double s = 0.0;
        for (double v : w) s += v;
        return s;
    }
};

/// Collapsed tensor rule on triangle (a, b, c), exact for total degree `order`.
/// All weights are positive.
inline void append_triangle(Rule2D& rule, const Vec2& a, const Vec2& b, const Vec2& c, int order) {
    if (order < 0) throw std::invalid_argument("triangle rule: order must be >= 0");
    const int n = (order + 3) / 2;  // ceil((order + 2) / 2)
    const Rule1D& g = gauss_legendre_cached(n);
    const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    const double jac = std::abs(det);
    for (int i = 0; i < n; ++i) {
        const double s = g.x[i];
        for (int j = 0; j < n; ++j) {
            const double t = g.x[j] * (1.0 - s);
            rule.x.push_back(a + s * (b - a) + t * (c - a));
            rule.w.push_back(g.w[i] * g.w[j] * (1.0 - s) * jac);
        }
    }
}

inline Rule2D triangle_rule(const Vec2& a, const Vec2& b, const Vec2& c, int order) {
    Rule2D r;
    append_triangle(r, a, b, c, order);
    return r;
}

/// Fan triangulation from the area centroid. Requires the polygon to be
/// star-shaped with respect to its centroid; otherwise throws.
inline Rule2D polygon_rule(const std::vector<Vec2>& poly, int order) {
    if (order < 1) throw std::invalid_argument("polygon_rule: order must be >= 1");
    const std::size_t n = poly.size();
    if (n < 3) throw std::invalid_argument("polygon_rule: polygon needs >= 3 vertices");
    double a2 = 0.0;
    Vec2 c = Vec2::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        const double cr = p.x() * q.y() - q.x() * p.y();
        a2 += cr;
        c += (p + q) * cr;
    }
    if (!(std::abs(a2) > 0.0)) throw std::invalid_argument("polygon_rule: degenerate polygon");
    c /= 3.0 * a2;
    const double orient = a2 > 0.0 ? 1.0 : -1.0;
    Rule2D r;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        const double det = orient * ((p - c).x() * (q - c).y() - (p - c).y() * (q - c).x());
        if (det <= 1e-14 * std::abs(a2))
            throw std::invalid_argument("polygon_rule: polygon is not star-shaped about its centroid");
        append_triangle(r, c, p, q, order);
    }
    return r;
}

struct SegmentRule {
    std::vector<Vec2> x;
    std::vector<double> w;  // sums to the segment length
};

/// Gauss-Legendre on segment [a, b], exact for degree `order`.
inline SegmentRule segment_rule(const Vec2& a, const Vec2& b, int order) {
    const int n = std::max(1, (order + 2) / 2);
    const Rule1D& g = gauss_legendre_cached(n);
    const double len = (b - a).norm();
    SegmentRule r;
    for (int i = 0; i < n; ++i) {
        r.x.push_back(a + g.x[i] * (b - a));
        r.w.push_back(g.w[i] * len);
    }
    return r;
}

} // namespace amyepi::quad
