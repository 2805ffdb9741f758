#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string output;  // stdout and stderr
};

Result run(const std::string& args) {
    const std::string cmd = std::string(AMYEPI_CLI) + " " + args + " --preset-dir " + AMYEPI_PRESET_DIR + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("amyepi_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string l;
    std::getline(in, l);
    return l;
}

const char* kShort2d = " --override solver.t_end=2 --override output.vtk_every=1 --quiet";

} // namespace

TEST(Cli, Sim0dPresetSmoke) {
    const auto out = scratch("fig2");
    const auto r = run("sim0d --preset fig2 --out " + out.string() +
                       " --override ode.t_end=300 --override ode.burn_in=0 --override ode.abeta_values=0,10 --quiet");
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* f : {"trace_ab0.csv", "trace_ab10.csv", "attractor_ab10.csv", "metrics.csv", "config.ini",
                          "manifest.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(first_line(out / "metrics.csv"),
              "abeta,spikes,bursts,mean_intra_burst_hz,duty_cycle,mean_ca_i,max_k_o,centroid_ca_i,centroid_k_o,"
              "centroid_na_i");
    const auto j = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(j["command"], "sim0d");
    EXPECT_GE(j["outputs"].size(), 5u);
    fs::remove_all(out);
}

TEST(Cli, Sim2dPresetsSmoke) {
    struct Case {
        const char* preset;
        const char* reduce;
    };
    for (const Case& c : {Case{"square-ab10", " --override mesh.nx=54 --override mesh.ny=54"},
                          Case{"two-lesions", " --override mesh.nx=21 --override mesh.ny=12"},
                          Case{"raster-brain", " --override mesh.nx=20 --override mesh.ny=15"},
                          Case{"paper/square-ab1",
                               " --override mesh.nx=54 --override mesh.ny=54 --override solver.dt=0.0125"}}) {
        const auto out = scratch("smoke");
        const auto r = run(std::string("sim2d --preset ") + c.preset + " --out " + out.string() + c.reduce + kShort2d);
        ASSERT_EQ(r.code, 0) << c.preset << "\n" << r.output;
        for (const char* f : {"mesh.txt", "regions.csv", "probes.csv", "cells_u.csv", "cells_ca.csv", "cells_ko.csv",
                              "summary.csv", "config.ini", "manifest.json", "frames/frame_00000.vtk"})
            EXPECT_TRUE(fs::exists(out / f)) << c.preset << ": " << f;
        EXPECT_EQ(first_line(out / "summary.csv"), "run,kind,index,t_ms,origin_element,region,activated,value");
        EXPECT_EQ(first_line(out / "probes.csv"), "t,probe_id,u");
        fs::remove_all(out);
    }
}

TEST(Cli, ConfigErrorsExitTwo) {
    const auto out = scratch("err");
    auto r = run("sim2d --preset square-ab1 --out " + out.string() + " --override solver.tend=3");
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("solver.tend"), std::string::npos) << r.output;
    r = run("sim2d --preset no-such-preset --out " + out.string());
    EXPECT_EQ(r.code, 2) << r.output;
    r = run("sim2d --out " + out.string() + " --bogus-flag");
    EXPECT_EQ(r.code, 2) << r.output;
    r = run("sim2d --preset square-ab1 --out " + out.string() + " --override solver.dt=abc");
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("solver.dt"), std::string::npos) << r.output;
    fs::remove_all(out);
}

TEST(Cli, MissingMeshFileNamesThePath) {
    const auto out = scratch("mesh");
    const auto r = run("sim2d --preset square-ab1 --out " + out.string() +
                       " --override mesh.generator=file --override mesh.file=/nonexistent/brain.mesh --quiet");
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.output.find("/nonexistent/brain.mesh"), std::string::npos) << r.output;
    fs::remove_all(out);
}

TEST(Cli, DivergenceExitsThree) {
    const auto out = scratch("div");
    const auto r = run("sim2d --preset square-ab10 --out " + out.string() +
                       " --override mesh.nx=9 --override mesh.ny=9 --override solver.dt=1 --override solver.t_end=50 --quiet");
    EXPECT_EQ(r.code, 3) << r.output;
    EXPECT_NE(r.output.find("diverged"), std::string::npos) << r.output;
    fs::remove_all(out);
}

TEST(Cli, ActivationOnQuiescentRunAndThresholdOverride) {
    const auto sim = scratch("quiet_sim"), act = scratch("quiet_act");
    auto r = run("sim2d --preset square-ab1 --out " + sim.string() +
                 " --override mesh.nx=27 --override mesh.ny=27 --override regions.onset.u0=-67" + kShort2d);
    ASSERT_EQ(r.code, 0) << r.output;
    r = run("activation --frames " + sim.string() + " --out " + act.string() + " --u-cr -20");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("no waves"), std::string::npos) << r.output;
    EXPECT_EQ(first_line(act / "activation.csv"), "# u_cr = -20");
    EXPECT_FALSE(fs::exists(act / "activation_wave_00.vtk"));
    const std::string body = slurp(act / "activation.csv");
    EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 2);  // comment and header only
    r = run("activation --frames " + (sim / "nothing").string() + " --out " + act.string());
    EXPECT_NE(r.code, 0);
    fs::remove_all(sim);
    fs::remove_all(act);
}

TEST(Cli, ActivationOnActiveRun) {
    const auto sim = scratch("act_sim"), act = scratch("act_out");
    auto r = run("sim2d --preset square-ab1 --out " + sim.string() +
                 " --override mesh.nx=54 --override mesh.ny=54 --override solver.dt=0.0125 --override solver.t_end=12"
                 " --override output.vtk_every=0 --quiet");
    ASSERT_EQ(r.code, 0) << r.output;
    r = run("activation --frames " + sim.string() + " --out " + act.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(first_line(act / "activation.csv"), "# u_cr = 0");
    EXPECT_TRUE(fs::exists(act / "activation_wave_00.vtk"));
    EXPECT_NE(r.output.find("wave 0"), std::string::npos) << r.output;
    fs::remove_all(sim);
    fs::remove_all(act);
}

TEST(Cli, RerunIsByteIdentical) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const std::string args = " --override mesh.nx=54 --override mesh.ny=54 --override solver.t_end=5 --quiet";
    ASSERT_EQ(run("sim2d --preset square-ab10 --out " + a.string() + args).code, 0);
    ASSERT_EQ(run("sim2d --preset square-ab10 --out " + b.string() + args).code, 0);
    for (const char* f : {"cells_u.csv", "cells_ca.csv", "probes.csv", "summary.csv", "mesh.txt", "config.ini"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    fs::remove_all(a);
    fs::remove_all(b);
}
