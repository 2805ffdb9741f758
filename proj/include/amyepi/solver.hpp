#pragma once

// Monodomain time stepping: Crank-Nicolson diffusion, second-order explicit
// extrapolation of the ionic current, explicit Euler for the ionic states
// stored at element quadrature nodes.
//
//   chi C_m du/dt - div(Sigma grad u) + chi f(u, y) = I_ext,   dy/dt = m(u, y)
//
// Units: cm, ms, mV, mS/cm (Sigma), 1/cm (chi), uF/cm^2, uA/cm^3 (I_ext).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "amyepi/dg.hpp"
#include "amyepi/ionic.hpp"
#include "amyepi/mesh.hpp"

namespace amyepi::solver {

using Vec2 = Eigen::Vector2d;
using ionic::IonicState;

enum class LinearSolver { cg, ldlt };

inline LinearSolver parse_linear_solver(const std::string& s) {
    if (s == "cg") return LinearSolver::cg;
    if (s == "ldlt") return LinearSolver::ldlt;
    throw std::invalid_argument("unknown linear solver '" + s + "'");
}

struct Probe {
    std::string id;
    Vec2 x = Vec2::Zero();
};

struct SimConfig {
    double dt = 0.025;        // ms
    double t_end = 200.0;     // ms
    double chi_m = 100.0;     // 1/cm
    double c_m = 1.0;         // uF/cm^2
    double eta0 = 10.0;
    double rest_potential = -67.0;  // potential at which the initial ionic state is clamped
    std::function<double(const Vec2&, double)> i_ext;  // uA/cm^3, empty = 0
    std::vector<Probe> probes;
    double output_every = 0.25;  // ms, cadence of cell-value frames
    LinearSolver linear_solver = LinearSolver::cg;
    double lin_tol = 1e-9;
    int max_iter = 2000;
    bool ionic = true;  // false: f = 0 and the ionic states are frozen
    int refine_every = 0;  // steps; 0 disables degree refinement
    double refine_threshold = 4.0;
    int p_min = 1, p_max = 3;
    ionic::ModelParams params{};

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("solver: dt must be > 0");
        if (!(t_end >= dt)) throw std::invalid_argument("solver: T must be >= dt");
        if (!(lin_tol > 0.0 && lin_tol < 1.0)) throw std::invalid_argument("solver: tolerance must lie in (0, 1)");
        if (max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
        if (!(chi_m > 0.0) || !(c_m > 0.0)) throw std::invalid_argument("solver: chi_m and C_m must be > 0");
        if (!(output_every > 0.0)) throw std::invalid_argument("solver: output cadence must be > 0");
        if (refine_every < 0 || p_min < 1 || p_max < p_min) throw std::invalid_argument("solver: bad refinement settings");
        params.base.validate();
        params.abeta.validate();
    }
};

struct FieldFrame {
    double t = 0.0;
    long step = 0;
    Eigen::VectorXd U;             // DG coefficients
    std::vector<IonicState> y;     // one per quadrature node
    std::vector<double> probe_u;   // mV
};

class Diverged : public std::runtime_error {
public:
    Diverged(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
    double last_valid_time() const { return t_; }

private:
    double t_;
};

class LinearSolveFailed : public std::runtime_error {
public:
    LinearSolveFailed(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

inline int configure_threads() {
#ifdef _OPENMP
    if (const char* env = std::getenv("AMYEPI_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Per-element ionic parameters derived from a tagged mesh and its regions.
struct Tissue {
    std::vector<double> abeta;  // per element, uM
    std::vector<double> u0;     // per element, mV
};

inline Tissue tissue_from_regions(const mesh::PolyMesh& m, const mesh::RegionSpec& spec) {
    Tissue t;
    for (int e = 0; e < m.num_elements(); ++e) {
        const int r = m.region[e];
        if (r < 0 || r >= static_cast<int>(spec.regions.size()))
            throw std::invalid_argument("initialize: element " + std::to_string(e) + " has no region attributes");
        t.abeta.push_back(spec.regions[r].abeta);
        t.u0.push_back(spec.regions[r].u0);
    }
    return t;
}

/// Ionic update at one node: explicit Euler step of the states, returns f.
/// Depends only on the node's own potential and state.
inline double ionic_node_update(double u, IonicState& y, double dt, const ionic::BaseParams& p,
                                const ionic::AbetaEffects& e) {
    const auto r = ionic::rhs(u, y, p, e);
    y.ca_i += dt * r.rate.ca_i;
    y.k_o += dt * r.rate.k_o;
    y.na_i += dt * r.rate.na_i;
    y.m += dt * r.rate.m;
    y.h += dt * r.rate.h;
    y.n += dt * r.rate.n;
    return r.f;
}

/// Applies ionic_node_update to all nodes; effect[i] indexes `effects` per node.
inline void ionic_update(const Eigen::VectorXd& u, std::vector<IonicState>& y, std::vector<double>& f, double dt,
                         const ionic::BaseParams& p, const std::vector<ionic::AbetaEffects>& effects,
                         const std::vector<int>& effect_of_node) {
    const long n = static_cast<long>(y.size());
    f.resize(n);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) f[i] = ionic_node_update(u[i], y[i], dt, p, effects[effect_of_node[i]]);
}

struct CellFrame {
    double t;
    Eigen::VectorXd u, ca_i, k_o;  // cell averages
};

struct RunResult {
    std::vector<CellFrame> cells;
    std::vector<double> probe_t;
    std::vector<std::vector<double>> probe_u;  // [probe][sample]
    FieldFrame final_frame;
    long steps = 0;
    long linear_iterations = 0;
    int refinements = 0;
    double wall_seconds = 0.0;
};

class Simulation {
public:
    Simulation(const mesh::PolyMesh& m, const Tissue& tissue, const dg::ConductivityField& sigma, SimConfig cfg)
        : cfg_(std::move(cfg)), tissue_(tissue), sigma_(sigma) {
        cfg_.validate();
        configure_threads();
        if (static_cast<int>(tissue.abeta.size()) != m.num_elements() ||
            static_cast<int>(tissue.u0.size()) != m.num_elements())
            throw std::invalid_argument("simulation: tissue arrays do not match the mesh");
        build(m);
    }
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    const dg::DgSystem& system() const { return *sys_; }
    const SimConfig& config() const { return cfg_; }

    /// Frame at t = 0: u projected from the per-element initial values,
    /// ionic states clamped at the rest potential with each element's [Abeta].
    FieldFrame initialize() const {
        FieldFrame fr;
        const auto& s = *sys_;
        Eigen::VectorXd u0(s.n_nodes());
        fr.y.resize(s.n_nodes());
        std::vector<IonicState> rest(effects_.size());
        for (std::size_t k = 0; k < effects_.size(); ++k) {
            ionic::AbetaParams a = cfg_.params.abeta;
            a.abeta = abeta_levels_[k];
            rest[k] = ionic::clamped_rest_state(cfg_.rest_potential, cfg_.params.base, a);
        }
        for (int e = 0; e < s.num_elements(); ++e)
            for (int q = s.node_offset[e]; q < s.node_offset[e + 1]; ++q) {
                u0[q] = tissue_.u0[e];
                fr.y[q] = rest[effect_of_node_[q]];
            }
        fr.U = s.project_nodal(u0);
        fr.probe_u = probe_values(fr.U);
        return fr;
    }

    /// Advances one step. `f_prev` holds f at the nodes from the previous
    /// step (empty on the first step, which then uses I^{-1} = I^0).
    FieldFrame step(const FieldFrame& cur, std::vector<double>& f_prev) {
        const auto& s = *sys_;
        const double dt = cfg_.dt;
        const double t_next = cur.t + dt;
        FieldFrame nx;
        nx.t = t_next;
        nx.step = cur.step + 1;
        nx.y = cur.y;

        std::vector<double> f_now(s.n_nodes(), 0.0);
        if (cfg_.ionic) {
            const Eigen::VectorXd u_nodes = s.node_values(cur.U);
            ionic_update(u_nodes, nx.y, f_now, dt, cfg_.params.base, effects_, effect_of_node_);
        }
        if (f_prev.empty()) f_prev = f_now;
        Eigen::VectorXd f_ext(s.n_nodes());
        for (int i = 0; i < s.n_nodes(); ++i) f_ext[i] = 1.5 * f_now[i] - 0.5 * f_prev[i];

        // Increment form: (chi C M + dt/2 A) dU = -dt A U + loads, so a state in the
        // kernel of A is carried over without roundoff from the large mass term.
        const double chi = cfg_.chi_m;
        Eigen::VectorXd rhs = -dt * (s.A * cur.U) - chi * dt * s.load_nodal(f_ext);
        if (cfg_.i_ext) {
            const double t0 = cur.t;
            rhs += 0.5 * dt *
                   (s.load([&](const Vec2& x) { return cfg_.i_ext(x, t_next); }) +
                    s.load([&](const Vec2& x) { return cfg_.i_ext(x, t0); }));
        }

        Eigen::VectorXd dU;
        if (cfg_.linear_solver == LinearSolver::ldlt) {
            dU = ldlt_->solve(rhs);
        } else {
            // tolerance measured against the full right-hand side, as for the non-incremental system
            const double rn = rhs.norm();
            if (rn == 0.0) {
                dU = Eigen::VectorXd::Zero(rhs.size());
            } else {
                const double full = (rhs + implicit_ * cur.U).norm();
                cg_->setTolerance(std::min(0.5, cfg_.lin_tol * full / rn));
                dU = cg_->solve(rhs);
                iterations_ += cg_->iterations();
                if (cg_->info() != Eigen::Success)
                    throw LinearSolveFailed("linear solver did not converge at t = " + std::to_string(t_next) +
                                                " ms (relative residual " + std::to_string(cg_->error()) + ")",
                                            cg_->error());
                // Galerkin correction along the constant field: the residual left by the
                // iterative solve would otherwise leak into the mean potential
                dU += one_ * (one_.dot(rhs - implicit_ * dU) / one_k_one_);
            }
        }
        nx.U = cur.U + dU;
        if (!nx.U.allFinite()) throw Diverged("non-finite potential at t = " + std::to_string(t_next) + " ms", cur.t);
        for (const IonicState& y : nx.y)
            if (!ionic::is_valid(y))
                throw Diverged("invalid ionic state at t = " + std::to_string(t_next) + " ms", cur.t);
        f_prev = std::move(f_now);
        nx.probe_u = probe_values(nx.U);
        return nx;
    }

    /// Full run with cell frames every `output_every` ms. `on_frame` (optional)
    /// sees every recorded frame.
    RunResult run(const std::function<void(const CellFrame&)>& on_frame = {}) {
        const auto t_start = std::chrono::steady_clock::now();
        RunResult res;
        res.probe_u.assign(cfg_.probes.size(), {});
        FieldFrame fr = initialize();
        auto record_probes = [&](const FieldFrame& f) {
            res.probe_t.push_back(f.t);
            for (std::size_t p = 0; p < f.probe_u.size(); ++p) res.probe_u[p].push_back(f.probe_u[p]);
        };
        auto record_cells = [&](const FieldFrame& f) {
            res.cells.push_back(cell_frame(f));
            if (on_frame) on_frame(res.cells.back());
        };
        record_probes(fr);
        record_cells(fr);
        const long n_steps = std::lround(cfg_.t_end / cfg_.dt);
        const long cadence = std::max(1L, std::lround(cfg_.output_every / cfg_.dt));
        std::vector<double> f_prev;
        iterations_ = 0;
        for (long k = 1; k <= n_steps; ++k) {
            fr = step(fr, f_prev);
            fr.t = k * cfg_.dt;
            record_probes(fr);
            if (k % cadence == 0 || k == n_steps) record_cells(fr);
            if (cfg_.refine_every > 0 && k % cfg_.refine_every == 0 && k < n_steps) {
                if (refine(fr)) ++res.refinements;
            }
        }
        res.steps = n_steps;
        res.linear_iterations = iterations_;
        res.final_frame = std::move(fr);
        res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return res;
    }

    CellFrame cell_frame(const FieldFrame& f) const {
        const auto& s = *sys_;
        Eigen::VectorXd ca(s.n_nodes()), ko(s.n_nodes());
        for (int i = 0; i < s.n_nodes(); ++i) {
            ca[i] = f.y[i].ca_i;
            ko[i] = f.y[i].k_o;
        }
        return {f.t, s.cell_averages(f.U), s.cell_averages_nodal(ca), s.cell_averages_nodal(ko)};
    }

    std::vector<double> probe_values(const Eigen::VectorXd& U) const {
        std::vector<double> out;
        for (std::size_t p = 0; p < cfg_.probes.size(); ++p)
            out.push_back(probe_basis_[p].dot(U.segment(sys_->offset[probe_element_[p]], probe_basis_[p].size())));
        return out;
    }

    const std::vector<int>& probe_elements() const { return probe_element_; }

    /// Applies the jump-indicator rule; returns true when degrees changed.
    bool refine(FieldFrame& fr) {
        const auto r = dg::refine_degrees(*sys_, fr.U, cfg_.refine_threshold, cfg_.p_min, cfg_.p_max);
        if (!r.changed) return false;
        mesh::PolyMesh m = sys_->mesh;
        m.degree = r.degree;
        auto old = sys_;
        build(m);
        fr.U = dg::transfer(*old, fr.U, *sys_);
        return true;
    }

private:
    void build(const mesh::PolyMesh& m) {
        dg::DgOptions o;
        o.eta0 = cfg_.eta0;
        // with refinement the node set must not move, so quadrature follows p_max
        if (cfg_.refine_every > 0) o.quad_degree = std::max(cfg_.p_max, *std::max_element(m.degree.begin(), m.degree.end()));
        sys_ = std::make_shared<dg::DgSystem>(dg::assemble(m, sigma_, o));
        const auto& s = *sys_;

        abeta_levels_.clear();
        effects_.clear();
        std::vector<int> level_of_element(m.num_elements());
        for (int e = 0; e < m.num_elements(); ++e) {
            const double a = tissue_.abeta[e];
            auto it = std::find(abeta_levels_.begin(), abeta_levels_.end(), a);
            if (it == abeta_levels_.end()) {
                abeta_levels_.push_back(a);
                ionic::AbetaParams ap = cfg_.params.abeta;
                ap.abeta = a;
                ap.validate();
                effects_.push_back(ionic::effects(ap, cfg_.params.base));
                it = abeta_levels_.end() - 1;
            }
            level_of_element[e] = static_cast<int>(it - abeta_levels_.begin());
        }
        effect_of_node_.assign(s.n_nodes(), 0);
        for (int e = 0; e < m.num_elements(); ++e)
            for (int q = s.node_offset[e]; q < s.node_offset[e + 1]; ++q) effect_of_node_[q] = level_of_element[e];

        const double mc = cfg_.chi_m * cfg_.c_m;
        const dg::SpMat implicit = mc * s.M + 0.5 * cfg_.dt * s.A;
        if (cfg_.linear_solver == LinearSolver::ldlt) {
            ldlt_ = std::make_unique<Eigen::SimplicialLDLT<dg::SpMat>>(implicit);
            if (ldlt_->info() != Eigen::Success) throw LinearSolveFailed("LDLT factorization failed", NAN);
        } else {
            implicit_ = implicit;
            one_ = s.constant(1.0);
            one_k_one_ = one_.dot(implicit_ * one_);
            cg_ = std::make_unique<Eigen::ConjugateGradient<dg::SpMat, Eigen::Lower | Eigen::Upper>>();
            cg_->setTolerance(cfg_.lin_tol);
            cg_->setMaxIterations(cfg_.max_iter);
            cg_->compute(implicit_);
        }

        probe_element_.clear();
        probe_basis_.clear();
        for (const Probe& p : cfg_.probes) {
            const int e = mesh::locate(s.mesh, p.x);
            if (e < 0) throw std::invalid_argument("probe '" + p.id + "' lies outside the mesh");
            probe_element_.push_back(e);
            probe_basis_.push_back(s.elements[e].basis.values(p.x));
        }
    }

    SimConfig cfg_;
    Tissue tissue_;
    dg::ConductivityField sigma_;
    std::shared_ptr<dg::DgSystem> sys_;
    std::vector<double> abeta_levels_;
    std::vector<ionic::AbetaEffects> effects_;
    std::vector<int> effect_of_node_;
    dg::SpMat implicit_;
    Eigen::VectorXd one_;
    double one_k_one_ = 1.0;
    std::unique_ptr<Eigen::SimplicialLDLT<dg::SpMat>> ldlt_;
    std::unique_ptr<Eigen::ConjugateGradient<dg::SpMat, Eigen::Lower | Eigen::Upper>> cg_;
    std::vector<int> probe_element_;
    std::vector<Eigen::VectorXd> probe_basis_;
    long iterations_ = 0;
};

} // namespace amyepi::solver
