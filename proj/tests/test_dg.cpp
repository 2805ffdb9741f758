#include <cmath>
#include <filesystem>

#include <Eigen/SparseCholesky>
#include <gtest/gtest.h>

#include "amyepi/dg.hpp"

using namespace amyepi;
using dg::Vec2;

namespace {

mesh::PolyMesh lesion_mesh(int n, int p) {
    auto m = mesh::generate_locally_refined({0, 0, 1, 1}, n, n, 3,
                                            [](const Vec2& x) { return (x - Vec2(1, 1)).norm() <= 0.3; }, 0.15, 4);
    return mesh::assign_degrees(m, mesh::UniformDegree{p});
}

dg::ConductivityField anisotropic(int n) {
    dg::Tensor s;
    s << 2.0, 0.6, 0.6, 0.9;
    return dg::ConductivityField::uniform(n, s);
}

double mms_error(int n, int p) {
    auto m = mesh::assign_degrees(mesh::generate_structured({0, 0, 1, 1}, n, n, 0.1, 7), mesh::UniformDegree{p});
    dg::DgOptions o;
    o.boundary = dg::Boundary::dirichlet;
    o.extra_order = 2;
    const auto sys = dg::assemble(m, dg::ConductivityField::isotropic(m.num_elements(), 1.0), o);
    const auto exact = [](const Vec2& x) { return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y()); };
    const Eigen::VectorXd b = sys.load([&](const Vec2& x) { return 2 * M_PI * M_PI * exact(x); }) +
                              dg::dirichlet_load(sys, [](const Vec2&) { return 0.0; });
    Eigen::SimplicialLDLT<dg::SpMat> ldlt(sys.A);
    return sys.l2_error(ldlt.solve(b), exact);
}

} // namespace

TEST(DgPenalty, Arithmetic) {
    // avg sigma 1.5, avg p^2 = (1 + 4)/2, harmonic h = 2*0.1*0.3/0.4
    EXPECT_NEAR(dg::penalty_interior(10.0, 1.0, 2.0, 1, 2, 0.1, 0.3), 10.0 * 1.5 * 2.5 / 0.15, 1e-12);
    EXPECT_NEAR(dg::penalty_boundary(10.0, 0.5, 3, 0.2), 10.0 * 0.5 * 9 / 0.2, 1e-12);
}

TEST(DgConductivity, NormAndValidation) {
    const auto f = anisotropic(1);
    // eigenvalues of [[2, .6], [.6, .9]]
    const double tr = 2.9, det = 2.0 * 0.9 - 0.36;
    EXPECT_NEAR(f.norm(0), 0.5 * (tr + std::sqrt(tr * tr - 4 * det)), 1e-14);
    dg::ConductivityField bad;
    dg::Tensor s;
    s << 1.0, 0.5, 0.2, 1.0;
    bad.sigma = {s};
    EXPECT_THROW(bad.validate(1), std::invalid_argument);
    s << -1.0, 0.0, 0.0, 0.5;
    bad.sigma = {s};
    EXPECT_THROW(bad.validate(1), std::invalid_argument);
    EXPECT_THROW(f.validate(2), std::invalid_argument);
}

class DgMatrices : public ::testing::TestWithParam<int> {};

TEST_P(DgMatrices, MassSpdStiffnessSymmetricConstantsInKernel) {
    const int p = GetParam();
    const auto m = lesion_mesh(12, p);
    const auto sys = dg::assemble(m, anisotropic(m.num_elements()));
    EXPECT_TRUE(sys.stability.coercive);
    EXPECT_EQ(sys.n_dofs(), mesh::dof_count(m));

    Eigen::SimplicialLLT<dg::SpMat> llt(sys.M);
    EXPECT_EQ(llt.info(), Eigen::Success);
    const Eigen::MatrixXd md(sys.M);
    EXPECT_NEAR((md - Eigen::MatrixXd::Identity(md.rows(), md.cols())).norm(), 0.0, 1e-10);  // orthonormal basis

    const dg::SpMat at = sys.A.transpose();
    EXPECT_LT((at - sys.A).norm(), 1e-12 * sys.A.norm());
    const Eigen::VectorXd one = sys.constant(1.0);
    EXPECT_LT((sys.A * one).norm(), 1e-10 * sys.A.norm() * one.norm());
    // energy of a non-constant field is positive
    const Eigen::VectorXd x = sys.project([](const Vec2& v) { return v.x() * v.y(); });
    EXPECT_GT(x.dot(sys.A * x), 0.0);
}

INSTANTIATE_TEST_SUITE_P(Degrees, DgMatrices, ::testing::Values(1, 2, 3));

TEST(DgMatrices, RawMonomialBasisGivesSameOperator) {
    const auto m = lesion_mesh(9, 2);
    dg::DgOptions raw;
    raw.orthonormalize = false;
    const auto a = dg::assemble(m, anisotropic(m.num_elements()));
    const auto b = dg::assemble(m, anisotropic(m.num_elements()), raw);
    const auto g = [](const Vec2& x) { return 1.0 + x.x() * x.x() - 0.5 * x.y(); };
    const Eigen::VectorXd ua = a.project(g), ub = b.project(g);
    EXPECT_NEAR(ua.dot(a.A * ua), ub.dot(b.A * ub), 1e-10 * std::abs(ua.dot(a.A * ua)));
    EXPECT_NEAR(a.l2_error(ua, g), 0.0, 1e-12);
    EXPECT_NEAR(b.l2_error(ub, g), 0.0, 1e-12);
}

TEST(DgProjection, ReproducesPolynomialsOfTheElementDegree) {
    for (int p = 1; p <= 3; ++p) {
        const auto m = lesion_mesh(9, p);
        const auto sys = dg::assemble(m, dg::ConductivityField::isotropic(m.num_elements(), 1.0));
        const auto g = [p](const Vec2& x) {
            return std::pow(x.x(), p) - 2.0 * std::pow(x.y(), p) + (p > 1 ? x.x() * x.y() : x.y()) + 3.0;
        };
        const Eigen::VectorXd u = sys.project(g);
        EXPECT_LT(sys.l2_error(u, g), 1e-12);
        const Eigen::VectorXd avg = sys.cell_averages(sys.constant(-67.0));
        EXPECT_LT((avg.array() + 67.0).abs().maxCoeff(), 1e-12);
        for (int e = 0; e < sys.num_elements(); e += 7)
            EXPECT_NEAR(sys.evaluate(u, e, sys.mesh.centroid[e]), g(sys.mesh.centroid[e]), 1e-12);
    }
}

TEST(DgPatch, LinearSolutionReproducedExactly) {
    auto m = mesh::assign_degrees(mesh::generate_structured({0, 0, 1, 1}, 6, 6, 0.2, 3), mesh::UniformDegree{1});
    dg::DgOptions o;
    o.boundary = dg::Boundary::dirichlet;
    const auto sys = dg::assemble(m, anisotropic(m.num_elements()), o);
    const auto g = [](const Vec2& x) { return 1.0 + 2.0 * x.x() - 3.0 * x.y(); };
    Eigen::SimplicialLDLT<dg::SpMat> ldlt(sys.A);
    const Eigen::VectorXd u = ldlt.solve(dg::dirichlet_load(sys, g));
    EXPECT_LT(sys.l2_error(u, g), 1e-10);
}

TEST(DgConvergence, ManufacturedSolutionRateP1) {
    const double e1 = mms_error(8, 1), e2 = mms_error(16, 1);
    EXPECT_GT(std::log2(e1 / e2), 1.7);
}

TEST(DgConvergence, ManufacturedSolutionRateP2) {
    const double e1 = mms_error(4, 2), e2 = mms_error(8, 2);
    EXPECT_GT(std::log2(e1 / e2), 2.7);
}

TEST(DgStability, ProbeFlagsTooSmallPenalty) {
    const auto m = lesion_mesh(9, 2);
    dg::DgOptions o;
    o.eta0 = 1e-3;
    o.stability_probe = false;
    auto sys = dg::assemble(m, anisotropic(m.num_elements()), o);
    const auto r = dg::stability_probe(sys);
    EXPECT_TRUE(r.checked);
    EXPECT_FALSE(r.coercive);
    EXPECT_GT(r.negative_pivots, 0);
}

TEST(DgRefine, JumpIndicatorAndTransfer) {
    const auto m = lesion_mesh(12, 1);
    const auto sys = dg::assemble(m, dg::ConductivityField::isotropic(m.num_elements(), 1.0));
    // a steep front along x = 0.5
    const Eigen::VectorXd u = sys.project([](const Vec2& x) { return std::tanh((x.x() - 0.5) / 0.02); });
    const auto r = dg::refine_degrees(sys, u, 4.0, 1, 3);
    EXPECT_TRUE(r.changed);
    for (int e = 0; e < m.num_elements(); ++e) {
        // coarse blocks are 0.25 wide, so stay clear of the tanh tail
        if (std::abs(m.centroid[e].x() - 0.5) > 0.45) {
            EXPECT_EQ(r.degree[e], 1) << e;
        }
    }
    int raised = 0;
    for (int d : r.degree) raised += d > 1;
    EXPECT_GT(raised, 0);

    // smooth fields: no change; constant: zero indicator
    const auto flat = dg::refine_degrees(sys, sys.constant(2.0), 4.0);
    EXPECT_FALSE(flat.changed);
    for (double v : flat.indicator) EXPECT_LT(v, 1e-20);

    auto m2 = m;
    m2.degree = r.degree;
    dg::DgOptions o;
    o.quad_degree = 3;
    const auto sys2 = dg::assemble(m2, dg::ConductivityField::isotropic(m.num_elements(), 1.0), o);
    const auto lin = [](const Vec2& x) { return 0.3 - x.x() + 2.0 * x.y(); };
    EXPECT_LT(sys2.l2_error(dg::transfer(sys, sys.project(lin), sys2), lin), 1e-12);
    EXPECT_THROW(dg::refine_degrees(sys, u, 4.0, 0, 3), std::invalid_argument);
}

TEST(DgIo, MatrixDump) {
    const auto m = lesion_mesh(6, 1);
    const auto sys = dg::assemble(m, dg::ConductivityField::isotropic(m.num_elements(), 1.0));
    const auto path = std::filesystem::temp_directory_path() / "amyepi_A.mtx";
    dg::dump_matrix(path.string(), sys.A);
    EXPECT_GT(std::filesystem::file_size(path), 100u);
    std::filesystem::remove(path);
}
