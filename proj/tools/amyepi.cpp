// amyepi: 0D sweeps, 2D monodomain runs and activation analysis.
//
//   amyepi sim0d      --config c.ini --out dir [--preset name] [--override sec.key=v]...
//   amyepi sim2d      --config c.ini --out dir [--preset name] [--override sec.key=v]...
//   amyepi activation --frames dir --out dir [--config c.ini] [--u-cr mV]
//
// Exit codes: 0 ok, 1 I/O or other failure, 2 config error, 3 numerical divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "amyepi/analysis.hpp"
#include "amyepi/config.hpp"
#include "amyepi/io.hpp"
#include "amyepi/manifest.hpp"
#include "amyepi/mesh.hpp"
#include "amyepi/ode.hpp"
#include "amyepi/setup.hpp"
#include "amyepi/solver.hpp"

#ifndef AMYEPI_PRESET_DIR
#define AMYEPI_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace amyepi;

namespace {

struct Common {
    std::string config_path, out_dir, preset, preset_dir = AMYEPI_PRESET_DIR, frames_dir;
    std::vector<std::string> overrides;
    double u_cr = 0.0;
    bool u_cr_set = false;
    bool quiet = false;
};

struct Loaded {
    config::Config cfg;
    fs::path base_dir = ".";
};

Loaded load_config(const Common& o, bool required) {
    Loaded l;
    if (!o.preset.empty()) {
        fs::path p = o.preset;
        if (p.extension() != ".ini") {
            const bool scaled = o.preset.find('/') != std::string::npos;
            p = fs::path(o.preset_dir) / (scaled ? o.preset + ".ini" : "desk/" + o.preset + ".ini");
        }
        if (!fs::exists(p)) throw config::ConfigError("unknown preset '" + o.preset + "' (looked for " + p.string() + ")");
        l.cfg = config::Config::load(p.string());
        l.base_dir = p.parent_path();
    }
    if (!o.config_path.empty()) {
        const auto c = config::Config::load(o.config_path);
        if (o.preset.empty()) {
            l.cfg = c;
            l.base_dir = fs::path(o.config_path).parent_path();
            if (l.base_dir.empty()) l.base_dir = ".";
        } else {
            l.cfg.merge(c);
        }
    } else if (o.preset.empty() && required) {
        throw config::ConfigError("either --config or --preset is required");
    }
    for (const auto& ov : o.overrides) l.cfg.apply_override(ov);
    return l;
}

std::string run_name(const Common& o) {
    if (!o.preset.empty()) return fs::path(o.preset).stem().string();
    if (!o.config_path.empty()) return fs::path(o.config_path).stem().string();
    return "run";
}

std::string fmt_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void write_snapshot(const fs::path& out, const config::Config& cfg, manifest::RunManifest& man) {
    std::ofstream f(out / "config.ini");
    f << cfg.canonical();
    man.outputs.push_back("config.ini");
}

int cmd_sim0d(const Common& o) {
    auto l = load_config(o, true);
    const auto s = setup::ode_setup(l.cfg);
    l.cfg.check_unused(setup::known_sections());
    fs::create_directories(o.out_dir);
    manifest::RunManifest man;
    man.command = "sim0d";
    man.started = manifest::utc_now();
    man.config_hash = l.cfg.hash();
    man.config_snapshot = l.cfg.canonical();

    const auto traces = ode::sweep(s.abeta_values, s.run, s.rest_per_value, s.workers);
    auto metrics = io::open_out((fs::path(o.out_dir) / "metrics.csv").string());
    metrics << "abeta,spikes,bursts,mean_intra_burst_hz,duty_cycle,mean_ca_i,max_k_o,centroid_ca_i,centroid_k_o,"
               "centroid_na_i\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const std::string tag = fmt_value(s.abeta_values[i]);
        const auto& tr = traces[i];
        io::write_trace_csv((fs::path(o.out_dir) / ("trace_ab" + tag + ".csv")).string(), tr);
        const auto att = ode::attractor_export(tr, s.burn_in);
        io::write_attractor_csv((fs::path(o.out_dir) / ("attractor_ab" + tag + ".csv")).string(), att);
        man.outputs.push_back("trace_ab" + tag + ".csv");
        man.outputs.push_back("attractor_ab" + tag + ".csv");
        const auto m = ode::spike_burst_metrics(tr, s.spike_threshold, s.burst_gap);
        metrics << s.abeta_values[i] << ',' << m.spike_times.size() << ',' << m.burst_count << ','
                << m.mean_intra_burst_frequency << ',' << m.duty_cycle << ',' << ode::time_average(tr.t, tr.ca_i) << ','
                << *std::max_element(tr.k_o.begin(), tr.k_o.end()) << ',' << att.centroid[0] << ','
                << att.centroid[1] << ',' << att.centroid[2] << '\n';
        if (!o.quiet)
            std::cout << "[Abeta] = " << tag << " uM: " << m.spike_times.size() << " spikes, " << m.burst_count
                      << " bursts, duty " << m.duty_cycle << '\n';
    }
    metrics.close();
    man.outputs.push_back("metrics.csv");
    write_snapshot(o.out_dir, l.cfg, man);
    man.finished = manifest::utc_now();
    man.write(o.out_dir);
    return 0;
}

analysis::RunSeries series_of(const std::string& name, const mesh::PolyMesh& m, analysis::CellSeries u,
                              analysis::CellSeries ca, analysis::CellSeries ko) {
    analysis::RunSeries r;
    r.name = name;
    r.u = std::move(u);
    r.ca_i = std::move(ca);
    r.k_o = std::move(ko);
    r.region = m.region;
    r.region_names = m.region_names;
    r.area = m.area;
    return r;
}

int cmd_sim2d(const Common& o) {
    auto l = load_config(o, true);
    auto sc = setup::scenario_2d(l.cfg, l.base_dir);
    l.cfg.check_unused(setup::known_sections());
    const fs::path out(o.out_dir);
    fs::create_directories(out);
    manifest::RunManifest man;
    man.command = "sim2d";
    man.started = manifest::utc_now();
    man.config_hash = l.cfg.hash();
    man.config_snapshot = l.cfg.canonical();

    if (!o.quiet) {
        std::cout << "mesh: " << sc.mesh.num_elements() << " elements, " << mesh::dof_count(sc.mesh) << " dofs\n";
        for (std::size_t r = 0; r < sc.regions.regions.size(); ++r)
            std::cout << "  region " << sc.regions.regions[r].name << ": " << sc.region_counts[r] << " elements\n";
    }
    mesh::write_mesh((out / "mesh.txt").string(), sc.mesh);
    man.outputs.push_back("mesh.txt");
    {
        auto reg = io::open_out((out / "regions.csv").string());
        reg << "region,elements,abeta,u0\n";
        for (std::size_t r = 0; r < sc.regions.regions.size(); ++r)
            reg << sc.regions.regions[r].name << ',' << sc.region_counts[r] << ',' << sc.regions.regions[r].abeta
                << ',' << sc.regions.regions[r].u0 << '\n';
        man.outputs.push_back("regions.csv");
    }

    solver::Simulation sim(sc.mesh, sc.tissue, sc.sigma, sc.sim);
    const auto& mesh_ref = sim.system().mesh;
    if (!sim.system().stability.coercive) std::cerr << "warning: stability probe failed; results may be unreliable\n";
    if (sc.vtk_every > 0.0) fs::create_directories(out / "frames");
    int vtk_count = 0;
    double next_vtk = 0.0;
    auto on_frame = [&](const solver::CellFrame& f) {
        if (sc.vtk_every <= 0.0 || f.t + 1e-9 < next_vtk) return;
        char name[64];
        std::snprintf(name, sizeof name, "frames/frame_%05d.vtk", vtk_count++);
        io::write_vtk((out / name).string(), mesh_ref, {{"u", f.u}, {"ca_i", f.ca_i}, {"k_o", f.k_o}},
                      "t = " + fmt_value(f.t) + " ms");
        man.outputs.push_back(name);
        next_vtk += sc.vtk_every;
    };
    const auto res = sim.run(on_frame);
    if (!o.quiet)
        std::cout << "run: " << res.steps << " steps, " << res.wall_seconds << " s, "
                  << static_cast<double>(res.linear_iterations) / std::max(1L, res.steps) << " CG iterations/step\n";

    std::vector<std::string> ids;
    for (const auto& p : sc.sim.probes) ids.push_back(p.id);
    io::write_probes_csv((out / "probes.csv").string(), ids, res.probe_t, res.probe_u);
    man.outputs.push_back("probes.csv");

    analysis::CellSeries su, sca, sko;
    for (const auto& f : res.cells) {
        su.t.push_back(f.t);
        su.values.push_back(f.u);
        sca.t.push_back(f.t);
        sca.values.push_back(f.ca_i);
        sko.t.push_back(f.t);
        sko.values.push_back(f.k_o);
    }
    if (sc.write_cells) {
        io::write_cell_series((out / "cells_u.csv").string(), su);
        io::write_cell_series((out / "cells_ca.csv").string(), sca);
        io::write_cell_series((out / "cells_ko.csv").string(), sko);
        man.outputs.insert(man.outputs.end(), {"cells_u.csv", "cells_ca.csv", "cells_ko.csv"});
    }
    const auto summary = analysis::summarize(series_of(run_name(o), mesh_ref, su, sca, sko),
                                             sc.analysis.calcium_times, sc.analysis.u_cr);
    {
        auto f = io::open_out((out / "summary.csv").string());
        analysis::write_summary_csv(f, {summary});
        man.outputs.push_back("summary.csv");
    }
    if (!o.quiet)
        for (const auto& w : summary.waves)
            std::cout << "wave " << w.index << ": t_min " << w.t_min << " ms, origin element " << w.origin << " ("
                      << w.origin_region << "), " << w.activated << " activated\n";
    write_snapshot(out, l.cfg, man);
    man.finished = manifest::utc_now();
    man.write(out);
    return 0;
}

int cmd_activation(const Common& o) {
    auto l = load_config(o, false);
    double u_cr = l.cfg.get_double("analysis.u_cr", 0.0);
    if (o.u_cr_set) u_cr = o.u_cr;
    const auto ca_times = l.cfg.get_doubles("analysis.calcium_times", {});
    const fs::path in(o.frames_dir), out(o.out_dir);
    if (!fs::exists(in / "cells_u.csv")) throw std::runtime_error("no cell series in '" + in.string() + "' (cells_u.csv)");
    const auto m = mesh::read_mesh((in / "mesh.txt").string());
    auto su = io::read_cell_series((in / "cells_u.csv").string());
    analysis::CellSeries sca, sko;
    if (fs::exists(in / "cells_ca.csv")) sca = io::read_cell_series((in / "cells_ca.csv").string());
    if (fs::exists(in / "cells_ko.csv")) sko = io::read_cell_series((in / "cells_ko.csv").string());
    if (su.cells() != m.num_elements()) throw std::runtime_error("cell series does not match mesh.txt");

    fs::create_directories(out);
    manifest::RunManifest man;
    man.command = "activation";
    man.started = manifest::utc_now();
    man.config_hash = l.cfg.hash();
    man.config_snapshot = l.cfg.canonical();

    const auto maps = analysis::activation_maps(su, u_cr);
    if (maps.empty()) std::cout << "notice: no waves detected (no cell exceeded 0 mV); no maps written\n";
    {
        auto f = io::open_out((out / "activation.csv").string());
        f << "# u_cr = " << u_cr << '\n';
        analysis::write_activation_csv(f, maps);
        man.outputs.push_back("activation.csv");
    }
    for (const auto& mp : maps) {
        char name[64];
        std::snprintf(name, sizeof name, "activation_wave_%02d.vtk", mp.wave);
        Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(mp.t_hat.data(), mp.t_hat.size());
        io::write_vtk((out / name).string(), m, {{"t_hat", t}},
                      "wave " + std::to_string(mp.wave) + ", t_min = " + fmt_value(mp.t_min) + " ms, u_cr = " +
                          fmt_value(u_cr) + " mV");
        man.outputs.push_back(name);
        if (!o.quiet)
            std::cout << "wave " << mp.wave << ": t_min " << mp.t_min << " ms, origin element " << mp.origin << " ("
                      << m.region_names[m.region[mp.origin]] << "), " << mp.activated() << " activated\n";
    }
    {
        auto r = series_of(run_name(o), m, su, sca, sko);
        if (sca.frames() == 0) r.ca_i = su;
        const auto summary = analysis::summarize(r, sca.frames() ? ca_times : std::vector<double>{}, u_cr);
        auto f = io::open_out((out / "summary.csv").string());
        analysis::write_summary_csv(f, {summary});
        man.outputs.push_back("summary.csv");
    }
    man.finished = manifest::utc_now();
    man.write(out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Amyloid-beta epileptiform activity simulator"};
    app.require_subcommand(1);
    Common o;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", o.config_path, "run configuration (INI)");
        if (config_required) c->check(CLI::ExistingFile);
        sub->add_option("--out", o.out_dir, "output directory")->required();
        sub->add_option("--preset", o.preset, "preset name (desk scale) or paper/<name>");
        sub->add_option("--preset-dir", o.preset_dir, "directory holding desk/ and paper/ presets");
        sub->add_option("--override", o.overrides, "section.key=value (repeatable)");
        sub->add_flag("--quiet", o.quiet, "suppress progress output");
    };
    auto* s0 = app.add_subcommand("sim0d", "0D ionic-model sweeps over [Abeta]");
    add_common(s0, true);
    auto* s2 = app.add_subcommand("sim2d", "2D monodomain run");
    add_common(s2, true);
    auto* sa = app.add_subcommand("activation", "activation-time maps from a sim2d output directory");
    add_common(sa, false);
    sa->add_option("--frames", o.frames_dir, "sim2d output directory")->required();
    sa->add_option("--u-cr", o.u_cr, "activation threshold, mV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    o.u_cr_set = sa->count("--u-cr") > 0;

    try {
        if (s0->parsed()) return cmd_sim0d(o);
        if (s2->parsed()) return cmd_sim2d(o);
        return cmd_activation(o);
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ode::IntegrationDiverged& e) {
        std::cerr << "diverged: " << e.what() << " (last valid t = " << e.last_valid_time() << " ms)\n";
        return 3;
    } catch (const solver::Diverged& e) {
        std::cerr << "diverged: " << e.what() << " (last valid t = " << e.last_valid_time() << " ms)\n";
        return 3;
    } catch (const solver::LinearSolveFailed& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
