#pragma once

// Scaled monomial bases on polygons, optionally orthonormalized against the
// element mass matrix. Functions are ordered by total degree so the first
// dim_p(q) functions span P^q for every q <= p.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amyepi/quadrature.hpp"

namespace amyepi::dg {

using Vec2 = Eigen::Vector2d;

inline int dim_p(int p) { return (p + 1) * (p + 2) / 2; }

/// Exponent pairs (a, b) of x^a y^b ordered by total degree, then by descending a.
inline std::vector<std::pair<int, int>> monomial_exponents(int p) {
    std::vector<std::pair<int, int>> e;
    for (int d = 0; d <= p; ++d)
        for (int a = d; a >= 0; --a) e.emplace_back(a, d - a);
    return e;
}

class LocalBasis {
public:
    LocalBasis() = default;

    /// Monomials in ((x - cx)/sx, (y - cy)/sy), with (cx, cy) the bounding-box
    /// centre and (sx, sy) its half-widths.
    LocalBasis(const std::vector<Vec2>& poly, int p) : p_(p), exps_(monomial_exponents(p)) {
        if (p < 1 || p > 15) throw std::invalid_argument("local basis: degree must lie in [1, 15]");
        Vec2 lo = poly.front(), hi = poly.front();
        for (const Vec2& v : poly) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        centre_ = 0.5 * (lo + hi);
        scale_ = 0.5 * (hi - lo);
        if (!(scale_.x() > 0.0 && scale_.y() > 0.0)) throw std::invalid_argument("local basis: degenerate element");
        transform_ = Eigen::MatrixXd::Identity(size(), size());
    }

    int degree() const { return p_; }
    int size() const { return static_cast<int>(exps_.size()); }
    bool orthonormal() const { return orthonormal_; }

    /// Replaces phi by L^{-1} phi where G = L L^T is the Gram matrix on `rule`.
    /// Returns the condition number of G.
    double orthonormalize(const quad::Rule2D& rule) {
        const Eigen::MatrixXd g = gram(rule);
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success) throw std::runtime_error("local basis: Gram matrix not positive definite");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
        const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
        const Eigen::MatrixXd lower = llt.matrixL();
        transform_ = lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(size(), size())) * transform_;
        orthonormal_ = true;
        return cond;
    }

    /// Gram matrix of the current basis on `rule`.
    Eigen::MatrixXd gram(const quad::Rule2D& rule) const {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(size(), size());
        Eigen::VectorXd v(size());
        for (std::size_t q = 0; q < rule.size(); ++q) {
            eval(rule.x[q], v);
            g.noalias() += rule.w[q] * v * v.transpose();
        }
        return g;
    }

    void eval(const Vec2& x, Eigen::Ref<Eigen::VectorXd> out) const {
        Eigen::VectorXd raw(size());
        raw_eval(x, raw, nullptr);
        out.noalias() = transform_ * raw;
    }

    /// Values (size) and gradients (size x 2) at x.
    void eval_grad(const Vec2& x, Eigen::Ref<Eigen::VectorXd> val, Eigen::Ref<Eigen::MatrixXd> grad) const {
        Eigen::VectorXd raw(size());
        Eigen::MatrixXd graw(size(), 2);
        raw_eval(x, raw, &graw);
        val.noalias() = transform_ * raw;
        grad.noalias() = transform_ * graw;
    }

    Eigen::VectorXd values(const Vec2& x) const {
        Eigen::VectorXd v(size());
        eval(x, v);
        return v;
    }

    const Eigen::MatrixXd& transform() const { return transform_; }

private:
    void raw_eval(const Vec2& x, Eigen::VectorXd& v, Eigen::MatrixXd* g) const {
        const double s = (x.x() - centre_.x()) / scale_.x();
        const double t = (x.y() - centre_.y()) / scale_.y();
        double ps[16], pt[16];
        ps[0] = pt[0] = 1.0;
        for (int k = 1; k <= p_; ++k) {
            ps[k] = ps[k - 1] * s;
            pt[k] = pt[k - 1] * t;
        }
        for (int i = 0; i < size(); ++i) {
            const auto [a, b] = exps_[i];
            v[i] = ps[a] * pt[b];
            if (g) {
                (*g)(i, 0) = a > 0 ? a * ps[a - 1] * pt[b] / scale_.x() : 0.0;
                (*g)(i, 1) = b > 0 ? b * ps[a] * pt[b - 1] / scale_.y() : 0.0;
            }
        }
    }

    int p_ = 1;
    std::vector<std::pair<int, int>> exps_;
    Vec2 centre_ = Vec2::Zero(), scale_ = Vec2::Ones();
    Eigen::MatrixXd transform_;
    bool orthonormal_ = false;
};

} // namespace amyepi::dg
