// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "amyepi/analysis.hpp"
#include "amyepi/io.hpp"
#include "amyepi/setup.hpp"

using namespace amyepi;
namespace fs = std::filesystem;
using Vec2 = Eigen::Vector2d;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << title << "  [" << detail
              << "]" << std::endl;
    if (!ok) ++failures;
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream o;
    o << std::setprecision(prec) << v;
    return o.str();
}

const fs::path kPresets = AMYEPI_PRESET_DIR;
const fs::path kOut = fs::current_path() / "acceptance_out";

int cli(const std::string& args) {
    const std::string cmd = std::string(AMYEPI_CLI) + " " + args + " --preset-dir " + kPresets.string() +
                            " --quiet > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

config::Config preset(const std::string& name) { return config::Config::load((kPresets / "desk" / (name + ".ini")).string()); }

// Probe traces from probes.csv (t,probe_id,u).
std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> read_probes(const fs::path& p) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> out;
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string t, id, u;
        std::getline(ss, t, ',');
        std::getline(ss, id, ',');
        std::getline(ss, u, ',');
        out[id].first.push_back(std::stod(t));
        out[id].second.push_back(std::stod(u));
    }
    return out;
}

double first_crossing(const std::vector<double>& t, const std::vector<double>& u, double from, double to) {
    for (std::size_t k = 1; k < t.size(); ++k)
        if (t[k] >= from && t[k] <= to && u[k - 1] < 0.0 && u[k] >= 0.0) return t[k];
    return std::numeric_limits<double>::infinity();
}

double region_mean(const analysis::CellSeries& s, const mesh::PolyMesh& m, int region, double t) {
    std::size_t k = 0;
    for (std::size_t i = 1; i < s.frames(); ++i)
        if (std::abs(s.t[i] - t) < std::abs(s.t[k] - t)) k = i;
    double a = 0.0, v = 0.0;
    for (int e = 0; e < m.num_elements(); ++e)
        if (m.region[e] == region) a += m.area[e], v += m.area[e] * s.values[k][e];
    return v / a;
}

int region_index(const mesh::PolyMesh& m, const std::string& name) {
    for (std::size_t r = 0; r < m.region_names.size(); ++r)
        if (m.region_names[r] == name) return static_cast<int>(r);
    throw std::runtime_error("no region '" + name + "'");
}

// ---------------------------------------------------------------------------

void c1() {
    ionic::AbetaParams a;
    auto s = [&](double v) {
        a.abeta = v;
        return ionic::bk_scaling(a);
    };
    const double s0 = s(0), s1 = s(1), s5 = s(5);
    const bool ok = std::abs(s0 - 1.0) <= 1e-3 && std::abs(s1 - 0.9123) <= 1e-3 && std::abs(s5 - 0.7920) <= 1e-3;
    report(1, "BK scaling", ok, "S(0)=" + fmt(s0) + " S(1)=" + fmt(s1) + " S(5)=" + fmt(s5));
}

void c2() {
    ionic::BaseParams p;
    ionic::AbetaParams a0, ai;
    ai.abeta = ai.k_i;
    const double r = ionic::pmca_flux(0.2, ai, p) / ionic::pmca_flux(0.2, a0, p);
    report(2, "PMCA clearance halved at k_I", std::abs(r - 0.5) <= 1e-5,
           "ratio=" + fmt(r, 10) + " (k_PMCA*k_I = " + fmt(a0.k_pmca * a0.k_i, 8) + " ms vs tau_Ca " + fmt(p.tau_ca) + ")");
}

void c3() {
    ionic::AbetaParams a;
    a.abeta = 10.0;
    const double jm = ionic::pore_flux_max(a), j30 = ionic::abeta_pore_flux(30.0, a);
    report(3, "Pore flux", jm == 5.0 && j30 == jm / 2, "J_max(10)=" + fmt(jm, 17) + " J(30 mV)=" + fmt(j30, 17));
}

void c4() {
    ionic::AbetaParams a;
    auto sh = [&](double v) {
        a.abeta = v;
        return ionic::vgcc_shift(a);
    };
    const double s0 = sh(0), sinf = sh(1e12), s01 = sh(0.1);
    const bool ok = s0 == 0.0 && std::abs(sinf - 25.0) < 1e-3 && std::abs(s01 - 15.0) < 0.05;
    report(4, "VGCC shift", ok,
           "shift(0)=" + fmt(s0) + " shift(inf)=" + fmt(sinf) + " shift(0.1)=" + fmt(s01, 4) +
               " mV with printed k_VGCC (stated ~20 mV)");
}

void c5() {
    ionic::BaseParams p;
    ionic::AbetaParams a0;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uu(-100, 50), ca(0, 3), ko(3, 12), na(12, 28), g(0, 1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ionic::IonicState y{ca(rng), ko(rng), na(rng), g(rng), g(rng), g(rng)};
        const double u = uu(rng);
        const auto m = ionic::rhs(u, y, p, a0);
        const auto b = ionic::baseline::rhs(u, y, p);
        auto rel = [](double x, double z) { return std::abs(x - z) / std::max(1e-300, std::max(std::abs(x), std::abs(z))); };
        for (int k = 0; k < ionic::IonicState::size; ++k) worst = std::max(worst, rel(m.rate[k], b.rate[k]));
        worst = std::max(worst, rel(m.f, b.f));
    }
    report(5, "Baseline reduction at [Abeta]=0", worst < 1e-12, "max relative difference " + fmt(worst, 3));
}

void c6() {
    const auto s = setup::ode_setup(preset("fig2"));
    const auto traces = ode::sweep(s.abeta_values, s.run, s.rest_per_value, s.workers);
    std::vector<double> ca, ko_max, duty;
    int bursts0 = 0;
    std::ostringstream d;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto m = ode::spike_burst_metrics(traces[i], s.spike_threshold, s.burst_gap);
        ca.push_back(ode::time_average(traces[i].t, traces[i].ca_i));
        ko_max.push_back(*std::max_element(traces[i].k_o.begin(), traces[i].k_o.end()));
        duty.push_back(m.duty_cycle);
        if (i == 0) bursts0 = m.burst_count;
        d << "Ab=" << s.abeta_values[i] << ": bursts " << m.burst_count << ", <Ca_i> " << fmt(ca.back(), 4) << ", max K_o "
          << fmt(ko_max.back(), 5) << ", duty " << fmt(duty.back(), 3) << "; ";
    }
    const bool a = bursts0 >= 2;
    const bool b = std::is_sorted(ca.begin(), ca.end());
    const bool c = ko_max.back() < ko_max.front();
    const bool dd = duty.back() > duty.front();
    report(6, "0D qualitative sweep", a && b && c && dd,
           d.str() + "(a)" + (a ? "ok" : "no") + " (b)" + (b ? "ok" : "no") + " (c)" + (c ? "ok" : "no") + " (d)" +
               (dd ? "ok" : "no"));
}

void c7() {
    auto cfg = preset("fig5-attractor");
    cfg.apply_override("ode.abeta_values=0 10");
    const auto s = setup::ode_setup(cfg);
    const auto traces = ode::sweep(s.abeta_values, s.run, s.rest_per_value, s.workers);
    const auto a0 = ode::attractor_export(traces[0], s.burn_in), a10 = ode::attractor_export(traces[1], s.burn_in);
    // physiologic box for (Ca_i, K_o, Na_i) in mM
    const double lo[3] = {0.0, 2.0, 5.0}, hi[3] = {10.0, 20.0, 40.0};
    bool in_box = !a0.points.empty();
    for (int k = 0; k < 3; ++k) in_box = in_box && a0.box.lo[k] >= lo[k] && a0.box.hi[k] <= hi[k];
    // terminal window: the last 5 s
    double mean = 0.0, sq = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < traces[0].size(); ++i)
        if (traces[0].t[i] >= s.run.t_end - 5000.0) mean += traces[0].k_o[i], sq += traces[0].k_o[i] * traces[0].k_o[i], ++n;
    mean /= n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    const bool centroid = a10.centroid[0] > a0.centroid[0];
    report(7, "Attractor", in_box && sd > 0.0 && centroid,
           "box Ca[" + fmt(a0.box.lo[0], 3) + "," + fmt(a0.box.hi[0], 3) + "] K_o[" + fmt(a0.box.lo[1], 3) + "," +
               fmt(a0.box.hi[1], 3) + "] Na_i[" + fmt(a0.box.lo[2], 3) + "," + fmt(a0.box.hi[2], 3) +
               "], terminal std(K_o)=" + fmt(sd, 3) + ", centroid Ca_i " + fmt(a0.centroid[0], 4) + " -> " +
               fmt(a10.centroid[0], 4));
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

void c8() {
    bool ok = true;
    std::ostringstream d;
    {
        auto m = mesh::generate_locally_refined({0, 0, 1, 1}, 27, 27, 3,
                                                [](const Vec2& x) { return (x - Vec2(1, 1)).norm() <= 0.2; }, 0.15, 5);
        for (int p = 1; p <= 3; ++p) {
            m = mesh::assign_degrees(m, mesh::UniformDegree{p});
            dg::Tensor s;
            s << 2.0, 0.6, 0.6, 0.9;
            const auto sys = dg::assemble(m, dg::ConductivityField::uniform(m.num_elements(), s));
            Eigen::SimplicialLLT<dg::SpMat> llt(sys.M);
            const dg::SpMat at = sys.A.transpose();
            const double sym = (at - sys.A).norm() / sys.A.norm();
            const Eigen::VectorXd one = sys.constant(1.0);
            const double ker = (sys.A * one).norm() / (sys.A.norm() * one.norm());
            const bool good = llt.info() == Eigen::Success && sym < 1e-12 && ker < 1e-10;
            ok = ok && good;
            d << "p=" << p << ": M SPD " << (llt.info() == Eigen::Success ? "yes" : "no") << ", asym " << fmt(sym, 2)
              << ", |A1| " << fmt(ker, 2) << "; ";
        }
    }
    const int base[4] = {0, 16, 8, 4};
    for (int p = 1; p <= 3; ++p) {
        double e[3];
        for (int r = 0; r < 3; ++r) e[r] = mms_error(base[p] << r, p);
        d << "p=" << p << " rates";
        for (int r = 0; r < 2; ++r) {
            const double rate = std::log2(e[r] / e[r + 1]);
            ok = ok && std::abs(rate - (p + 1)) <= 0.2;
            d << ' ' << fmt(rate, 4);
        }
        d << "; ";
    }
    report(8, "DG operators and convergence", ok, d.str());
}

void c9() {
    auto cfg = preset("square-ab1");
    auto sc = setup::scenario_2d(cfg, kPresets / "desk");
    sc.sim.ionic = false;
    sc.sim.probes.clear();
    solver::Simulation sim(sc.mesh, sc.tissue, sc.sigma, sc.sim);
    const auto& s = sim.system();
    const Eigen::VectorXd one = s.constant(1.0);
    const double vol = one.dot(s.M * one);
    auto fr = sim.initialize();
    const double m0 = one.dot(s.M * fr.U) / vol;
    double energy = fr.U.dot(s.A * fr.U), drift = 0.0;
    bool monotone = true;
    std::vector<double> f_prev;
    for (int k = 0; k < 1000; ++k) {
        fr = sim.step(fr, f_prev);
        drift = std::max(drift, std::abs(one.dot(s.M * fr.U) / vol - m0) / std::abs(m0));
        const double e = fr.U.dot(s.A * fr.U);
        monotone = monotone && e <= energy * (1.0 + 1e-12);
        energy = e;
    }
    report(9, "Conservation without reaction", drift < 1e-10 && monotone,
           "mean drift " + fmt(drift, 3) + ", energy non-increasing " + (monotone ? "yes" : "no") + ", " +
               std::to_string(sc.mesh.num_elements()) + " elements, CG tol " + fmt(sc.sim.lin_tol));
}

struct Run2d {
    mesh::PolyMesh mesh;
    analysis::CellSeries u, ca;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> probes;
    setup::Scenario2d scenario;
};

Run2d run_preset(const std::string& name, const fs::path& out) {
    fs::remove_all(out);
    const int code = cli("sim2d --preset " + name + " --out " + out.string());
    if (code != 0) throw std::runtime_error("sim2d " + name + " exited with " + std::to_string(code));
    Run2d r;
    r.mesh = mesh::read_mesh((out / "mesh.txt").string());
    r.u = io::read_cell_series((out / "cells_u.csv").string());
    r.ca = io::read_cell_series((out / "cells_ca.csv").string());
    r.probes = read_probes(out / "probes.csv");
    r.scenario = setup::scenario_2d(preset(name), kPresets / "desk");
    return r;
}

const mesh::Shape& shape_of(const Run2d& r, const std::string& region) {
    return r.scenario.regions.regions.at(r.scenario.regions.index_of(region)).shape;
}

void c10() {
    const auto r1 = run_preset("square-ab1", kOut / "square-ab1");
    const auto r10 = run_preset("square-ab10", kOut / "square-ab10");
    std::ostringstream d;

    // (a) every wave starts within 0.25 cm of the onset zone
    const auto maps1 = analysis::activation_maps(r1.u);
    bool a = !maps1.empty();
    double worst = 0.0;
    for (const auto& m : maps1) {
        const double dist = shape_of(r1, "onset").distance(r1.mesh.centroid[m.origin]);
        worst = std::max(worst, dist);
        a = a && dist <= 0.25;
    }
    d << "(a) " << maps1.size() << " waves, max origin distance to onset " << fmt(worst, 3) << " cm; ";

    // (b) a wave after 100 ms starts in the lesion and reaches the near probe first
    const auto waves10 = analysis::detect_waves(r10.u);
    const auto maps10 = analysis::activation_maps(r10.u);
    bool b = false;
    int lesion_waves = 0;
    for (std::size_t i = 0; i < maps10.size(); ++i) {
        const auto& m = maps10[i];
        if (m.t_min <= 100.0 || m.origin < 0) continue;
        if (shape_of(r10, "lesion").distance(r10.mesh.centroid[m.origin]) > 0.0) continue;
        ++lesion_waves;
        const double from = m.t_min - 1.0, to = r10.u.t[waves10[i].last] + 1.0;
        const auto& P = r10.probes;
        const double tn = first_crossing(P.at("near").first, P.at("near").second, from, to);
        const double tm = first_crossing(P.at("mid").first, P.at("mid").second, from, to);
        const double tf = first_crossing(P.at("far").first, P.at("far").second, from, to);
        if (std::isfinite(tn) && tn < tm && tn < tf) b = true;
        d << "(b) wave " << i << " t_min " << fmt(m.t_min, 4) << " in lesion, probes near/mid/far " << fmt(tn, 5) << '/'
          << fmt(tm, 5) << '/' << fmt(tf, 5) << "; ";
    }
    if (lesion_waves == 0) d << "(b) no lesion-initiated wave after 100 ms; ";

    // (c) lesion calcium at 118 ms
    const double l10 = region_mean(r10.ca, r10.mesh, region_index(r10.mesh, "lesion"), 118.0);
    const double h10 = region_mean(r10.ca, r10.mesh, region_index(r10.mesh, "healthy"), 118.0);
    const double l1 = region_mean(r1.ca, r1.mesh, region_index(r1.mesh, "lesion"), 118.0);
    const bool c = l10 >= 3.0 * h10 && l10 > l1;
    d << "(c) Ca_i at 118 ms: lesion 10uM " << fmt(l10, 4) << ", healthy 10uM " << fmt(h10, 4) << ", lesion 1uM "
      << fmt(l1, 4) << " mM";
    report(10, "2D square scenario", a && b && c, d.str());
}

void c11() {
    const auto r = run_preset("two-lesions", kOut / "two-lesions");
    const auto& an = r.scenario.analysis;
    const auto maps = analysis::activation_maps(r.u);
    int n10 = 0, n1 = 0, other = 0;
    std::ostringstream d;
    for (const auto& m : maps) {
        if (m.t_min < an.transient || m.origin < 0) continue;
        const Vec2 c = r.mesh.centroid[m.origin];
        const double d10 = shape_of(r, "lesion10").distance(c), d1 = shape_of(r, "lesion1").distance(c);
        if (d10 <= an.origin_radius && d10 <= d1) ++n10;
        else if (d1 <= an.origin_radius) ++n1;
        else ++other;
        d << fmt(m.t_min, 4) << "ms:" << r.mesh.region_names[r.mesh.region[m.origin]] << ' ';
    }
    report(11, "Two-lesion attribution", n10 > n1,
           "after " + fmt(an.transient) + " ms: 10uM lesion " + std::to_string(n10) + ", 1uM lesion " +
               std::to_string(n1) + ", elsewhere " + std::to_string(other) + " (" + d.str() + ")");
}

void c12() {
    bool ok = true;
    std::ostringstream d;
    // 2D: rerun the 1 uM square preset and compare with the run from criterion 10
    const auto again = kOut / "square-ab1-rerun";
    if (!fs::exists(kOut / "square-ab1" / "cells_u.csv")) run_preset("square-ab1", kOut / "square-ab1");
    fs::remove_all(again);
    ok = ok && cli("sim2d --preset square-ab1 --out " + again.string()) == 0;
    for (const char* f : {"cells_u.csv", "cells_ca.csv", "cells_ko.csv", "probes.csv", "summary.csv", "regions.csv"}) {
        const bool same = fs::exists(again / f) && slurp(kOut / "square-ab1" / f) == slurp(again / f);
        ok = ok && same;
        d << f << (same ? " identical; " : " DIFFERS; ");
    }
    // 0D: two short sweeps
    for (const char* dir : {"fig2-a", "fig2-b"}) {
        fs::remove_all(kOut / dir);
        ok = ok && cli("sim0d --preset fig2 --out " + (kOut / dir).string() + " --override ode.t_end=5000") == 0;
    }
    for (const char* f : {"metrics.csv", "trace_ab0.csv", "trace_ab10.csv", "attractor_ab5.csv"}) {
        const bool same = slurp(kOut / "fig2-a" / f) == slurp(kOut / "fig2-b" / f) && fs::exists(kOut / "fig2-a" / f);
        ok = ok && same;
        d << f << (same ? " identical; " : " DIFFERS; ");
    }
    report(12, "Determinism", ok, d.str());
}

} // namespace

int main(int argc, char** argv) {
    // optional list of criterion numbers to run; default all
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<void (*)()> checks{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12};
    fs::create_directories(kOut);
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        try {
            checks[i]();
        } catch (const std::exception& e) {
            report(id, "exception", false, e.what());
        }
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
