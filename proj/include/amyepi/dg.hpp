#pragma once

// Symmetric interior-penalty DG on polygonal meshes: per-element bases and
// quadrature, mass and stiffness assembly, L2 projection, and a jump-based
// degree refinement rule.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/SparseExtra>

#include "amyepi/basis.hpp"
#include "amyepi/mesh.hpp"
#include "amyepi/quadrature.hpp"

namespace amyepi::dg {

using Tensor = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;
using mesh::PolyMesh;

/// Per-element conductivity tensor, mS/cm.
struct ConductivityField {
    std::vector<Tensor> sigma;

    static ConductivityField uniform(int n, const Tensor& s) { return {std::vector<Tensor>(n, s)}; }
    static ConductivityField isotropic(int n, double s) { return uniform(n, s * Tensor::Identity()); }

    /// Spectral norm of the element tensor (largest eigenvalue for SPD input).
    double norm(int e) const {
        Eigen::SelfAdjointEigenSolver<Tensor> es(sigma[e], Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }

    void validate(int n) const {
        if (static_cast<int>(sigma.size()) != n) throw std::invalid_argument("conductivity: one tensor per element");
        for (const Tensor& s : sigma) {
            if (std::abs(s(0, 1) - s(1, 0)) > 1e-12 * s.norm()) throw std::invalid_argument("conductivity: not symmetric");
            Eigen::SelfAdjointEigenSolver<Tensor> es(s, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-14 || !(s.trace() > 0.0))
                throw std::invalid_argument("conductivity: tensor must be PSD with positive trace");
        }
    }
};

// --------------------------------------------------------------------------
// Penalty

inline double penalty_interior(double eta0, double sigma_plus, double sigma_minus, int p_plus, int p_minus,
                               double h_plus, double h_minus) {
    const double s_avg = 0.5 * (sigma_plus + sigma_minus);
    const double p2_avg = 0.5 * (p_plus * p_plus + p_minus * p_minus);
    const double h_harm = 2.0 * h_plus * h_minus / (h_plus + h_minus);
    return eta0 * s_avg * p2_avg / h_harm;
}

inline double penalty_boundary(double eta0, double sigma, int p, double h) { return eta0 * sigma * p * p / h; }

// --------------------------------------------------------------------------
// System

enum class Boundary { neumann, dirichlet };

struct DgOptions {
    double eta0 = 10.0;
    bool orthonormalize = true;
    int quad_degree = 0;   // degree used to choose quadrature order; 0 = max element degree
    int extra_order = 0;   // added to the volume and face quadrature orders
    Boundary boundary = Boundary::neumann;  // dirichlet only for manufactured-solution tests
    bool stability_probe = true;
};

struct ElementData {
    LocalBasis basis;
    quad::Rule2D rule;
    Eigen::MatrixXd phi;  // nodes x basis functions
    double gram_condition = 1.0;
};

struct StabilityReport {
    bool checked = false;
    bool coercive = true;
    int negative_pivots = 0;
};

struct DgSystem {
    PolyMesh mesh;
    ConductivityField conductivity;
    DgOptions options;

    std::vector<int> offset;       // element -> first dof, size ne + 1
    std::vector<int> node_offset;  // element -> first quadrature node, size ne + 1
    std::vector<ElementData> elements;
    std::vector<double> eta;       // per face (0 on Neumann boundary faces)
    SpMat M, A;
    StabilityReport stability;

    int num_elements() const { return mesh.num_elements(); }
    int n_dofs() const { return offset.back(); }
    int n_nodes() const { return node_offset.back(); }
    int dim(int e) const { return offset[e + 1] - offset[e]; }
    int volume_order() const;

    /// u at every quadrature node.
    Eigen::VectorXd node_values(const Eigen::VectorXd& U) const {
        Eigen::VectorXd out(n_nodes());
        for (int e = 0; e < num_elements(); ++e)
            out.segment(node_offset[e], elements[e].rule.size()).noalias() =
                elements[e].phi * U.segment(offset[e], dim(e));
        return out;
    }

    /// Load vector [(g, phi_i)] from values of g at the quadrature nodes.
    Eigen::VectorXd load_nodal(const Eigen::VectorXd& g) const {
        Eigen::VectorXd b(n_dofs());
        for (int e = 0; e < num_elements(); ++e) {
            const auto& ed = elements[e];
            const Eigen::Map<const Eigen::VectorXd> w(ed.rule.w.data(), ed.rule.size());
            b.segment(offset[e], dim(e)).noalias() =
                ed.phi.transpose() * w.cwiseProduct(g.segment(node_offset[e], ed.rule.size()));
        }
        return b;
    }

    Eigen::VectorXd load(const std::function<double(const Vec2&)>& g) const { return load_nodal(sample(g)); }

    Eigen::VectorXd sample(const std::function<double(const Vec2&)>& g) const {
        Eigen::VectorXd v(n_nodes());
        for (int e = 0; e < num_elements(); ++e)
            for (std::size_t q = 0; q < elements[e].rule.size(); ++q) v[node_offset[e] + q] = g(elements[e].rule.x[q]);
        return v;
    }

    /// Element-wise M^{-1} b.
    Eigen::VectorXd solve_mass(const Eigen::VectorXd& b) const {
        Eigen::VectorXd x(n_dofs());
        for (int e = 0; e < num_elements(); ++e) {
            const int n = dim(e);
            if (elements[e].basis.orthonormal()) {
                x.segment(offset[e], n) = b.segment(offset[e], n);
                continue;
            }
            const Eigen::MatrixXd mk = Eigen::MatrixXd(M.block(offset[e], offset[e], n, n));
            x.segment(offset[e], n) = mk.llt().solve(b.segment(offset[e], n));
        }
        return x;
    }

    Eigen::VectorXd project(const std::function<double(const Vec2&)>& g) const { return solve_mass(load(g)); }
    Eigen::VectorXd project_nodal(const Eigen::VectorXd& g) const { return solve_mass(load_nodal(g)); }

    /// Coefficients of the constant function c.
    Eigen::VectorXd constant(double c) const {
        return project([c](const Vec2&) { return c; });
    }

    double evaluate(const Eigen::VectorXd& U, int e, const Vec2& x) const {
        return elements[e].basis.values(x).dot(U.segment(offset[e], dim(e)));
    }

    Eigen::VectorXd cell_averages_nodal(const Eigen::VectorXd& nodal) const {
        Eigen::VectorXd avg(num_elements());
        for (int e = 0; e < num_elements(); ++e) {
            const auto& r = elements[e].rule;
            double s = 0.0, w = 0.0;
            for (std::size_t q = 0; q < r.size(); ++q) s += r.w[q] * nodal[node_offset[e] + q], w += r.w[q];
            avg[e] = s / w;
        }
        return avg;
    }

    Eigen::VectorXd cell_averages(const Eigen::VectorXd& U) const { return cell_averages_nodal(node_values(U)); }

    /// Element owning each quadrature node.
    std::vector<int> node_elements() const {
        std::vector<int> out(n_nodes());
        for (int e = 0; e < num_elements(); ++e)
            std::fill(out.begin() + node_offset[e], out.begin() + node_offset[e + 1], e);
        return out;
    }

    /// L2 norm of the difference between the discrete field and g.
    double l2_error(const Eigen::VectorXd& U, const std::function<double(const Vec2&)>& g) const {
        const Eigen::VectorXd uh = node_values(U);
        double s = 0.0;
        for (int e = 0; e < num_elements(); ++e)
            for (std::size_t q = 0; q < elements[e].rule.size(); ++q) {
                const double d = uh[node_offset[e] + q] - g(elements[e].rule.x[q]);
                s += elements[e].rule.w[q] * d * d;
            }
        return std::sqrt(s);
    }
};

namespace detail {

inline int quad_degree_of(const PolyMesh& m, const DgOptions& o) {
    if (o.quad_degree > 0) return o.quad_degree;
    return *std::max_element(m.degree.begin(), m.degree.end());
}

struct SideEval {
    Eigen::VectorXd val;
    Eigen::MatrixXd grad;
};

inline SideEval side_eval(const LocalBasis& b, const Vec2& x) {
    SideEval s{Eigen::VectorXd(b.size()), Eigen::MatrixXd(b.size(), 2)};
    b.eval_grad(x, s.val, s.grad);
    return s;
}

} // namespace detail

inline int DgSystem::volume_order() const { return 2 * detail::quad_degree_of(mesh, options) + options.extra_order; }

/// Inertia check of A + delta*M on the P1 part of the (hierarchical) basis.
inline StabilityReport stability_probe(const DgSystem& sys) {
    StabilityReport r;
    r.checked = true;
    const int ne = sys.num_elements();
    std::vector<int> keep;
    keep.reserve(3 * ne);
    for (int e = 0; e < ne; ++e)
        for (int i = 0; i < 3; ++i) keep.push_back(sys.offset[e] + i);
    std::vector<int> map(sys.n_dofs(), -1);
    for (int i = 0; i < static_cast<int>(keep.size()); ++i) map[keep[i]] = i;

    std::vector<Eigen::Triplet<double>> trip;
    double tr_a = 0.0, tr_m = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        const SpMat& src = pass == 0 ? sys.A : sys.M;
        for (int k = 0; k < src.outerSize(); ++k)
            for (SpMat::InnerIterator it(src, k); it; ++it) {
                const int i = map[it.row()], j = map[it.col()];
                if (i < 0 || j < 0) continue;
                if (i == j) (pass == 0 ? tr_a : tr_m) += it.value();
            }
    }
    const double delta = 1e-9 * tr_a / tr_m;
    for (int pass = 0; pass < 2; ++pass) {
        const SpMat& src = pass == 0 ? sys.A : sys.M;
        const double scale = pass == 0 ? 1.0 : delta;
        for (int k = 0; k < src.outerSize(); ++k)
            for (SpMat::InnerIterator it(src, k); it; ++it) {
                const int i = map[it.row()], j = map[it.col()];
                if (i >= 0 && j >= 0) trip.emplace_back(i, j, scale * it.value());
            }
    }
    SpMat b(static_cast<int>(keep.size()), static_cast<int>(keep.size()));
    b.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<SpMat> ldlt(b);
    if (ldlt.info() != Eigen::Success) {
        r.coercive = false;
        r.negative_pivots = -1;
        return r;
    }
    const Eigen::VectorXd d = ldlt.vectorD();
    r.negative_pivots = static_cast<int>((d.array() <= 0.0).count());
    r.coercive = r.negative_pivots == 0;
    return r;
}

inline DgSystem assemble(const PolyMesh& m, const ConductivityField& sigma, const DgOptions& opts = {}) {
    if (!(opts.eta0 > 0.0)) throw std::invalid_argument("assemble: eta0 must be > 0");
    const int ne = m.num_elements();
    sigma.validate(ne);

    DgSystem sys;
    sys.mesh = m;
    sys.conductivity = sigma;
    sys.options = opts;
    const int pq = detail::quad_degree_of(m, opts);
    if (pq < *std::max_element(m.degree.begin(), m.degree.end()))
        throw std::invalid_argument("assemble: quadrature degree below the largest element degree");
    const int vol_order = 2 * pq + opts.extra_order;
    const int face_order = 2 * pq + opts.extra_order;

    sys.offset.assign(ne + 1, 0);
    sys.node_offset.assign(ne + 1, 0);
    sys.elements.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const auto poly = mesh::element_polygon(m, e);
        ElementData& ed = sys.elements[e];
        ed.basis = LocalBasis(poly, m.degree[e]);
        ed.rule = quad::polygon_rule(poly, vol_order);
        if (opts.orthonormalize) ed.gram_condition = ed.basis.orthonormalize(ed.rule);
        ed.phi.resize(ed.rule.size(), ed.basis.size());
        Eigen::VectorXd v(ed.basis.size());
        for (std::size_t q = 0; q < ed.rule.size(); ++q) {
            ed.basis.eval(ed.rule.x[q], v);
            ed.phi.row(q) = v.transpose();
        }
        sys.offset[e + 1] = sys.offset[e] + ed.basis.size();
        sys.node_offset[e + 1] = sys.node_offset[e] + static_cast<int>(ed.rule.size());
    }

    std::vector<Eigen::Triplet<double>> tm, ta;
    auto add_block = [](std::vector<Eigen::Triplet<double>>& t, int r0, int c0, const Eigen::MatrixXd& b) {
        for (int j = 0; j < b.cols(); ++j)
            for (int i = 0; i < b.rows(); ++i)
                if (b(i, j) != 0.0) t.emplace_back(r0 + i, c0 + j, b(i, j));
    };

    for (int e = 0; e < ne; ++e) {
        const ElementData& ed = sys.elements[e];
        const int n = ed.basis.size();
        Eigen::MatrixXd mk = Eigen::MatrixXd::Zero(n, n), ak = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t q = 0; q < ed.rule.size(); ++q) {
            const auto s = detail::side_eval(ed.basis, ed.rule.x[q]);
            mk.noalias() += ed.rule.w[q] * s.val * s.val.transpose();
            ak.noalias() += ed.rule.w[q] * s.grad * sigma.sigma[e] * s.grad.transpose();
        }
        add_block(tm, sys.offset[e], sys.offset[e], mk);
        add_block(ta, sys.offset[e], sys.offset[e], ak);
    }

    sys.eta.assign(m.num_faces(), 0.0);
    for (int f = 0; f < m.num_faces(); ++f) {
        const mesh::Face& face = m.faces[f];
        const Vec2 n = face.normal;
        const auto rule = quad::segment_rule(m.vertices[face.v0], m.vertices[face.v1], face_order);
        const int kp = face.plus;
        if (!face.interior()) {
            if (opts.boundary == Boundary::neumann) continue;
            const double eta = penalty_boundary(opts.eta0, sigma.norm(kp), m.degree[kp], m.diameter[kp]);
            sys.eta[f] = eta;
            const int np = sys.elements[kp].basis.size();
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(np, np);
            for (std::size_t q = 0; q < rule.x.size(); ++q) {
                const auto s = detail::side_eval(sys.elements[kp].basis, rule.x[q]);
                const Eigen::VectorXd flux = s.grad * (sigma.sigma[kp] * n);
                b.noalias() += rule.w[q] * (eta * s.val * s.val.transpose() - s.val * flux.transpose() -
                                            flux * s.val.transpose());
            }
            add_block(ta, sys.offset[kp], sys.offset[kp], b);
            continue;
        }
        const int km = face.minus;
        const double eta = penalty_interior(opts.eta0, sigma.norm(kp), sigma.norm(km), m.degree[kp], m.degree[km],
                                            m.diameter[kp], m.diameter[km]);
        sys.eta[f] = eta;
        const int side[2] = {kp, km};
        const double sign[2] = {1.0, -1.0};
        Eigen::MatrixXd blk[2][2];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                blk[r][c] = Eigen::MatrixXd::Zero(sys.elements[side[r]].basis.size(), sys.elements[side[c]].basis.size());
        for (std::size_t q = 0; q < rule.x.size(); ++q) {
            detail::SideEval s[2] = {detail::side_eval(sys.elements[kp].basis, rule.x[q]),
                                     detail::side_eval(sys.elements[km].basis, rule.x[q])};
            Eigen::VectorXd flux[2] = {s[0].grad * (sigma.sigma[kp] * n), s[1].grad * (sigma.sigma[km] * n)};
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    blk[r][c].noalias() +=
                        rule.w[q] * (eta * sign[r] * sign[c] * s[r].val * s[c].val.transpose() -
                                     0.5 * sign[r] * s[r].val * flux[c].transpose() -
                                     0.5 * sign[c] * flux[r] * s[c].val.transpose());
        }
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) add_block(ta, sys.offset[side[r]], sys.offset[side[c]], blk[r][c]);
    }

    sys.M.resize(sys.n_dofs(), sys.n_dofs());
    sys.A.resize(sys.n_dofs(), sys.n_dofs());
    sys.M.setFromTriplets(tm.begin(), tm.end());
    sys.A.setFromTriplets(ta.begin(), ta.end());
    sys.M.makeCompressed();
    sys.A.makeCompressed();

    if (opts.stability_probe) {
        sys.stability = stability_probe(sys);
        if (!sys.stability.coercive)
            std::clog << "warning: SIPG operator is not coercive on the P1 probe (eta0 = " << opts.eta0
                      << "); increase eta0\n";
    }
    return sys;
}

/// Boundary contribution of Dirichlet data g for the manufactured-solution harness.
inline Eigen::VectorXd dirichlet_load(const DgSystem& sys, const std::function<double(const Vec2&)>& g) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(sys.n_dofs());
    const auto& m = sys.mesh;
    const int face_order = sys.volume_order();
    for (int f = 0; f < m.num_faces(); ++f) {
        const mesh::Face& face = m.faces[f];
        if (face.interior()) continue;
        const int k = face.plus;
        const auto rule = quad::segment_rule(m.vertices[face.v0], m.vertices[face.v1], face_order);
        const double eta = penalty_boundary(sys.options.eta0, sys.conductivity.norm(k), m.degree[k], m.diameter[k]);
        for (std::size_t q = 0; q < rule.x.size(); ++q) {
            const auto s = detail::side_eval(sys.elements[k].basis, rule.x[q]);
            const Eigen::VectorXd flux = s.grad * (sys.conductivity.sigma[k] * face.normal);
            b.segment(sys.offset[k], s.val.size()) += rule.w[q] * g(rule.x[q]) * (eta * s.val - flux);
        }
    }
    return b;
}

// --------------------------------------------------------------------------
// Degree refinement

struct RefineResult {
    std::vector<int> degree;
    std::vector<double> indicator;  // per element: sum over faces of the squared jump integral
    bool changed = false;           // reassembly required
};

inline std::vector<double> jump_indicator(const DgSystem& sys, const Eigen::VectorXd& U) {
    const auto& m = sys.mesh;
    std::vector<double> ind(m.num_elements(), 0.0);
    for (int f = 0; f < m.num_faces(); ++f) {
        const mesh::Face& face = m.faces[f];
        if (!face.interior()) continue;
        const auto rule = quad::segment_rule(m.vertices[face.v0], m.vertices[face.v1], sys.volume_order());
        double j2 = 0.0;
        for (std::size_t q = 0; q < rule.x.size(); ++q) {
            const double d = sys.evaluate(U, face.plus, rule.x[q]) - sys.evaluate(U, face.minus, rule.x[q]);
            j2 += rule.w[q] * d * d;
        }
        ind[face.plus] += j2;
        ind[face.minus] += j2;
    }
    return ind;
}

/// Raise p where the jump indicator exceeds threshold * median, lower it
/// where it drops below 0.1 * threshold * median (only if the median is positive).
inline RefineResult refine_degrees(const DgSystem& sys, const Eigen::VectorXd& U, double threshold, int p_min = 1,
                                   int p_max = 3) {
    if (p_min < 1 || p_max < p_min) throw std::invalid_argument("refine_degrees: need 1 <= p_min <= p_max");
    RefineResult r;
    r.degree = sys.mesh.degree;
    r.indicator = jump_indicator(sys, U);
    if (!std::isfinite(threshold)) return r;
    std::vector<double> sorted = r.indicator;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double tiny = 1e-24;
    for (int e = 0; e < sys.num_elements(); ++e) {
        const double v = r.indicator[e];
        int p = r.degree[e];
        if (v > std::max(threshold * median, tiny)) p = std::min(p + 1, p_max);
        else if (median > 0.0 && v < 0.1 * threshold * median) p = std::max(p - 1, p_min);
        if (p != r.degree[e]) r.changed = true;
        r.degree[e] = p;
    }
    return r;
}

/// L2 transfer of coefficients between two systems on the same mesh.
inline Eigen::VectorXd transfer(const DgSystem& from, const Eigen::VectorXd& U, const DgSystem& to) {
    if (from.num_elements() != to.num_elements()) throw std::invalid_argument("transfer: meshes differ");
    Eigen::VectorXd g(to.n_nodes());
    for (int e = 0; e < to.num_elements(); ++e)
        for (std::size_t q = 0; q < to.elements[e].rule.size(); ++q)
            g[to.node_offset[e] + q] = from.evaluate(U, e, to.elements[e].rule.x[q]);
    return to.project_nodal(g);
}

/// Coordinate-format (Matrix Market) dump for debugging.
inline void dump_matrix(const std::string& path, const SpMat& a) {
    if (!Eigen::saveMarket(a, path)) throw std::runtime_error("cannot write matrix '" + path + "'");
}

} // namespace amyepi::dg
