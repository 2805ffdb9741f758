#pragma once

// Builds model parameters, 0D sweeps and 2D scenarios from a Config.
// Relative file paths resolve against the directory of the config file.

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "amyepi/config.hpp"
#include "amyepi/dg.hpp"
#include "amyepi/ingest.hpp"
#include "amyepi/ionic.hpp"
#include "amyepi/mesh.hpp"
#include "amyepi/ode.hpp"
#include "amyepi/raster.hpp"
#include "amyepi/solver.hpp"

namespace amyepi::setup {

using config::Config;
using config::ConfigError;

inline const std::set<std::string>& known_sections() {
    static const std::set<std::string> s{"model", "abeta", "ode", "mesh", "regions", "solver", "output", "ingest", "analysis"};
    return s;
}

// --------------------------------------------------------------------------
// Model parameters

inline ionic::RateFn rate_fn(const Config& c, const std::string& key, ionic::RateFn fallback) {
    const auto w = c.get_words(key);
    if (w.empty()) return fallback;
    if (w.size() != 4) throw ConfigError("field '" + key + "': expected '<linoid|exponential|sigmoid> scale v_half slope'");
    ionic::RateFn r;
    try {
        r.kind = ionic::parse_rate_kind(w[0]);
        r.scale = std::stod(w[1]);
        r.v_half = std::stod(w[2]);
        r.slope = std::stod(w[3]);
    } catch (const std::exception& e) {
        throw ConfigError("field '" + key + "': " + e.what());
    }
    return r;
}

inline ionic::ModelParams model_params(const Config& c) {
    ionic::ModelParams p;
    auto& b = p.base;
    auto d = [&](const char* key, double& v) { v = c.get_double(std::string("model.") + key, v); };
    d("g_nal", b.g_nal), d("g_na", b.g_na), d("g_k", b.g_k), d("g_ahp", b.g_ahp), d("g_kl", b.g_kl);
    d("g_cll", b.g_cll), d("g_ca", b.g_ca), d("tau_ca", b.tau_ca), d("tau", b.tau), d("gamma", b.gamma);
    d("rho", b.rho), d("g_glia", b.g_glia), d("epsilon", b.epsilon), d("k_bath", b.k_bath);
    d("na_o_rest", b.na_o_rest), d("k_i_rest", b.k_i_rest), d("na_i_rest", b.na_i_rest);
    d("volume_ratio", b.volume_ratio), d("cl_i", b.cl_i), d("cl_o", b.cl_o), d("e_ca", b.e_ca);
    d("nernst_factor", b.nernst_factor), d("gate_factor", b.gate_factor), d("c_m", b.c_m), d("chi_m", b.chi_m);
    b.gates.alpha_m = rate_fn(c, "model.alpha_m", b.gates.alpha_m);
    b.gates.beta_m = rate_fn(c, "model.beta_m", b.gates.beta_m);
    b.gates.alpha_h = rate_fn(c, "model.alpha_h", b.gates.alpha_h);
    b.gates.beta_h = rate_fn(c, "model.beta_h", b.gates.beta_h);
    b.gates.alpha_n = rate_fn(c, "model.alpha_n", b.gates.alpha_n);
    b.gates.beta_n = rate_fn(c, "model.beta_n", b.gates.beta_n);

    auto& a = p.abeta;
    auto da = [&](const char* key, double& v) { v = c.get_double(std::string("abeta.") + key, v); };
    da("abeta", a.abeta), da("k_i", a.k_i), da("k_pmca", a.k_pmca), da("j_asy", a.j_asy), da("k_d", a.k_d);
    da("q1", a.q1), da("q2", a.q2), da("u_max", a.u_max), da("alpha", a.alpha), da("k_cak", a.k_cak);
    da("a_bk", a.a_bk), da("b_bk", a.b_bk), da("c_bk", a.c_bk), da("j_sign", a.j_sign), da("flux_to_mM", a.flux_to_mM);
    const std::string dbk = c.get_string("abeta.d_bk", "corrected");
    if (dbk == "corrected") a.d_bk = ionic::AbetaParams::d_bk_corrected;
    else if (dbk == "printed") a.d_bk = ionic::AbetaParams::d_bk_printed;
    else a.d_bk = c.get_double("abeta.d_bk", a.d_bk);
    const std::string kv = c.get_string("abeta.k_vgcc", "printed");
    if (kv == "printed") a.k_vgcc = ionic::AbetaParams::k_vgcc_printed;
    else if (kv == "refit") a.k_vgcc = ionic::AbetaParams::k_vgcc_refit;
    else a.k_vgcc = c.get_double("abeta.k_vgcc", a.k_vgcc);

    try {
        b.validate();
        a.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model parameters: ") + e.what());
    }
    return p;
}

// --------------------------------------------------------------------------
// 0D

struct OdeSetup {
    std::vector<double> abeta_values;
    ode::OdeRun run;
    bool rest_per_value = true;
    double burn_in = 5000.0;
    double spike_threshold = 0.0;
    double burst_gap = 500.0;
    unsigned workers = 1;
};

inline OdeSetup ode_setup(const Config& c) {
    OdeSetup s;
    const auto params = model_params(c);
    s.abeta_values = c.get_doubles("ode.abeta_values", {params.abeta.abeta});
    if (s.abeta_values.empty()) throw ConfigError("field 'ode.abeta_values': the [Abeta] list is empty");
    for (double v : s.abeta_values)
        if (!(v >= 0.0)) throw ConfigError("field 'ode.abeta_values': values must be >= 0");
    const double u0 = c.get_double("ode.u0", -67.0);
    s.run = ode::resting_run(params, c.get_double("ode.rest_potential", u0));
    s.run.u0 = u0;
    s.run.dt = c.get_double("ode.dt", 0.01);
    s.run.t_end = c.get_double("ode.t_end", 60000.0);
    s.run.stride = c.get_int("ode.stride", 100);
    s.run.scheme = ode::parse_scheme(c.get_string("ode.scheme", "rk4"));
    s.rest_per_value = c.get_bool("ode.rest_per_value", true);
    s.burn_in = c.get_double("ode.burn_in", 5000.0);
    s.spike_threshold = c.get_double("ode.spike_threshold", 0.0);
    s.burst_gap = c.get_double("ode.burst_gap", 500.0);
    s.workers = static_cast<unsigned>(std::max(1, c.get_int("ode.workers", 1)));
    try {
        s.run.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[ode]: ") + e.what());
    }
    return s;
}

// --------------------------------------------------------------------------
// 2D

struct RasterPlacement {
    double x0 = 0.0, y0 = 0.0, dx = 1.0, dy = 1.0;
};

class Loader {
public:
    Loader(std::filesystem::path base, RasterPlacement place) : base_(std::move(base)), place_(place) {}

    std::string resolve(const std::string& p) const {
        const std::filesystem::path path(p);
        return (path.is_absolute() ? path : base_ / path).string();
    }

    std::shared_ptr<const ScalarRaster> raster(const std::string& p) {
        const std::string full = resolve(p);
        auto it = cache_.find(full);
        if (it != cache_.end()) return it->second;
        auto r = std::make_shared<const ScalarRaster>(read_raster(full, place_.x0, place_.y0, place_.dx, place_.dy));
        cache_.emplace(full, r);
        return r;
    }

private:
    std::filesystem::path base_;
    RasterPlacement place_;
    std::map<std::string, std::shared_ptr<const ScalarRaster>> cache_;
};

inline mesh::Shape parse_shape(const std::vector<std::string>& w, const std::string& field, Loader& load) {
    auto num = [&](std::size_t i) {
        try {
            return std::stod(w.at(i));
        } catch (const std::exception&) {
            throw ConfigError("field '" + field + "': bad or missing number at position " + std::to_string(i));
        }
    };
    if (w.empty()) throw ConfigError("field '" + field + "': empty shape");
    const std::string& k = w[0];
    if (k == "all" && w.size() == 1) return mesh::Shape::everywhere();
    if (k == "circle" && w.size() == 4) return mesh::Shape::circle(num(1), num(2), num(3));
    if (k == "rect" && w.size() == 5) return mesh::Shape::rectangle(num(1), num(2), num(3), num(4));
    if (k == "halfplane" && w.size() == 4) return mesh::Shape::halfplane(num(1), num(2), num(3));
    if (k == "mask" && w.size() == 3) return mesh::Shape::mask(load.raster(w[1]), num(2));
    throw ConfigError("field '" + field +
                      "': shape must be 'all', 'circle cx cy r', 'rect x0 y0 x1 y1', 'halfplane nx ny c' "
                      "or 'mask <raster> <threshold>'");
}

struct AnalysisSettings {
    double u_cr = 0.0;
    std::vector<double> calcium_times;
    std::string onset_region = "onset";
    std::vector<std::string> lesion_regions;
    double origin_radius = 0.25;  // cm
    double transient = 0.0;       // ms
};

struct Scenario2d {
    mesh::PolyMesh mesh;
    mesh::RegionSpec regions;
    std::vector<int> region_counts;
    solver::Tissue tissue;
    dg::ConductivityField sigma;
    solver::SimConfig sim;
    double vtk_every = 0.0;  // ms; 0 disables VTK frames
    bool write_cells = true;
    AnalysisSettings analysis;
};

inline mesh::Rect parse_rect(const Config& c, const std::string& key, mesh::Rect fallback) {
    const auto v = c.get_doubles(key, {fallback.x0, fallback.y0, fallback.x1, fallback.y1});
    if (v.size() != 4 || !(v[2] > v[0]) || !(v[3] > v[1]))
        throw ConfigError("field '" + key + "': expected 'x0 y0 x1 y1' with x1 > x0, y1 > y0");
    return {v[0], v[1], v[2], v[3]};
}

inline Scenario2d scenario_2d(const Config& c, const std::filesystem::path& base_dir) {
    Scenario2d s;
    const auto params = model_params(c);
    RasterPlacement place;
    {
        const auto o = c.get_doubles("ingest.origin", {0.0, 0.0});
        const auto d = c.get_doubles("ingest.spacing", {1.0, 1.0});
        if (o.size() != 2 || d.size() != 2) throw ConfigError("fields 'ingest.origin'/'ingest.spacing' take two numbers");
        place = {o[0], o[1], d[0], d[1]};
    }
    Loader load(base_dir, place);

    // regions
    const auto names = c.get_words("regions.list");
    if (names.empty()) throw ConfigError("missing required field 'regions.list'");
    for (const auto& n : names) {
        mesh::Region r;
        r.name = n;
        r.shape = parse_shape(c.get_words("regions." + n + ".shape").empty() ? std::vector<std::string>{"all"}
                                                                            : c.get_words("regions." + n + ".shape"),
                              "regions." + n + ".shape", load);
        r.priority = c.get_int("regions." + n + ".priority", 0);
        r.abeta = c.get_double("regions." + n + ".abeta", 0.0);
        r.u0 = c.get_double("regions." + n + ".u0", -67.0);
        if (!(r.abeta >= 0.0)) throw ConfigError("field 'regions." + n + ".abeta' must be >= 0");
        s.regions.regions.push_back(r);
    }

    // mesh
    const std::string gen = c.get_string("mesh.generator", "structured");
    const mesh::Rect dom = parse_rect(c, "mesh.domain", {0.0, 0.0, 1.0, 1.0});
    const int nx = c.get_int("mesh.nx", 32), ny = c.get_int("mesh.ny", 32);
    const double jitter = c.get_double("mesh.jitter", 0.0);
    const auto seed = static_cast<std::uint64_t>(c.get_int("mesh.seed", 1));
    mesh::PolyMesh m;
    try {
        if (gen == "structured") {
            m = mesh::generate_structured(dom, nx, ny, jitter, seed);
        } else if (gen == "refined") {
            const mesh::Shape fine = parse_shape(c.get_words("mesh.refine"), "mesh.refine", load);
            const double margin = c.get_double("mesh.refine_margin", 0.0);
            m = mesh::generate_locally_refined(
                dom, nx, ny, c.get_int("mesh.block", 2),
                [&](const mesh::Vec2& x) { return fine.distance(x) <= margin; }, jitter, seed);
        } else if (gen == "file") {
            m = mesh::read_mesh(load.resolve(c.require_string("mesh.file")));
        } else {
            throw ConfigError("field 'mesh.generator': expected structured, refined or file");
        }
        if (c.has("mesh.mask")) {
            const auto w = c.get_words("mesh.mask");
            const mesh::Shape keep = parse_shape(w.size() == 2 ? std::vector<std::string>{"mask", w[0], w[1]} : w,
                                                 "mesh.mask", load);
            m = mesh::remove_elements(m, [&](const mesh::Vec2& x) { return keep.contains(x); });
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[mesh]: ") + e.what());
    }
    try {
        auto tagged = mesh::tag_regions(m, s.regions);
        m = std::move(tagged.mesh);
        s.region_counts = std::move(tagged.counts);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[regions]: ") + e.what());
    }
    {
        mesh::RegionDegree rule;
        rule.fallback = c.get_int("mesh.degree", 1);
        for (const auto& n : names)
            if (c.has("mesh.degree." + n)) rule.by_region[n] = c.get_int("mesh.degree." + n, rule.fallback);
        m = mesh::assign_degrees(m, rule);
    }
    s.mesh = m;
    s.tissue = solver::tissue_from_regions(m, s.regions);

    // ingest
    if (c.has("ingest.pet")) {
        ingest::PetThresholds th;
        const auto t = c.get_doubles("ingest.pet_thresholds", {th.low, th.high});
        const auto l = c.get_doubles("ingest.pet_levels", {th.low_abeta, th.high_abeta});
        if (t.size() != 2 || l.size() != 2) throw ConfigError("fields 'ingest.pet_thresholds'/'ingest.pet_levels' take two numbers");
        th = {t[0], t[1], l[0], l[1]};
        try {
            s.tissue.abeta = ingest::pet_to_abeta(m, *load.raster(c.get_string("ingest.pet", "")), th);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("[ingest]: ") + e.what());
        }
    }
    const double sigma_iso = c.get_double("solver.sigma_iso", 0.735);
    const double sigma_axn = c.get_double("ingest.sigma_axn", 6.0);
    if (c.has("ingest.direction_cos") || c.has("ingest.direction_sin")) {
        ingest::DirectionField dir;
        auto cs = load.raster(c.require_string("ingest.direction_cos"));
        auto sn = load.raster(c.require_string("ingest.direction_sin"));
        std::shared_ptr<const ScalarRaster> wm;
        if (c.has("ingest.white_matter")) wm = load.raster(c.get_string("ingest.white_matter", ""));
        dir.cos_channel = cs.get();
        dir.sin_channel = sn.get();
        dir.white_matter = wm.get();
        s.sigma = ingest::build_conductivity(m, sigma_iso, sigma_axn, dir);
    } else {
        s.sigma = dg::ConductivityField::isotropic(m.num_elements(), sigma_iso);
    }
    for (int e = 0; e < m.num_elements(); ++e) {
        const std::string key = "regions." + m.region_names[m.region[e]] + ".sigma";
        if (c.has(key)) s.sigma.sigma[e] = c.get_double(key, sigma_iso) * dg::Tensor::Identity();
    }

    // solver
    auto& sim = s.sim;
    sim.params = params;
    sim.chi_m = params.base.chi_m;
    sim.c_m = params.base.c_m;
    sim.dt = c.get_double("solver.dt", 0.025);
    sim.t_end = c.get_double("solver.t_end", 200.0);
    sim.eta0 = c.get_double("solver.eta0", 10.0);
    sim.rest_potential = c.get_double("solver.rest_potential", -67.0);
    sim.output_every = c.get_double("solver.output_every", 0.25);
    sim.linear_solver = solver::parse_linear_solver(c.get_string("solver.linear_solver", "cg"));
    sim.lin_tol = c.get_double("solver.tol", 1e-9);
    sim.max_iter = c.get_int("solver.max_iter", 2000);
    sim.ionic = c.get_bool("solver.ionic", true);
    sim.refine_every = c.get_int("solver.refine_every", 0);
    sim.refine_threshold = c.get_double("solver.refine_threshold", 4.0);
    sim.p_min = c.get_int("solver.p_min", 1);
    sim.p_max = c.get_int("solver.p_max", 3);
    for (const auto& k : c.keys("output")) {
        if (k.rfind("probe.", 0) != 0) continue;
        const auto v = c.get_doubles("output." + k, {});
        if (v.size() != 2) throw ConfigError("field 'output." + k + "': expected 'x y'");
        sim.probes.push_back({k.substr(6), {v[0], v[1]}});
    }
    try {
        sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[solver]: ") + e.what());
    }
    s.vtk_every = c.get_double("output.vtk_every", 0.0);
    s.write_cells = c.get_bool("output.cells", true);

    auto& a = s.analysis;
    a.u_cr = c.get_double("analysis.u_cr", 0.0);
    a.calcium_times = c.get_doubles("analysis.calcium_times", {});
    a.onset_region = c.get_string("analysis.onset_region", "onset");
    a.lesion_regions = c.get_words("analysis.lesion_regions");
    a.origin_radius = c.get_double("analysis.origin_radius", 0.25);
    a.transient = c.get_double("analysis.transient", 0.0);
    return s;
}

} // namespace amyepi::setup
