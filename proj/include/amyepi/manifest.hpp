#pragma once

// Run manifest: config hash and snapshot, code version, timestamps and the
// list of files a run produced (with sizes and content hashes).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "amyepi/config.hpp"

#ifndef AMYEPI_VERSION
#define AMYEPI_VERSION "0.0.0"
#endif

namespace amyepi::manifest {

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream o;
    o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return o.str();
}

inline std::string file_hash(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config::hex64(config::fnv1a(buf.str()));
}

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string config_snapshot;
    std::string version = AMYEPI_VERSION;
    std::string started, finished;
    std::vector<std::string> outputs;  // relative to the output directory

    nlohmann::json to_json(const std::filesystem::path& out_dir) const {
        nlohmann::json j;
        j["command"] = command;
        j["config_hash"] = config_hash;
        j["config_snapshot"] = config_snapshot;
        j["code_version"] = version;
        j["started"] = started;
        j["finished"] = finished;
        j["outputs"] = nlohmann::json::array();
        for (const auto& f : outputs) {
            const auto p = out_dir / f;
            j["outputs"].push_back({{"path", f},
                                    {"bytes", std::filesystem::exists(p) ? std::filesystem::file_size(p) : 0},
                                    {"fnv1a", std::filesystem::exists(p) ? file_hash(p) : ""}});
        }
        return j;
    }

    void write(const std::filesystem::path& out_dir) const {
        std::ofstream out(out_dir / "manifest.json");
        if (!out) throw std::runtime_error("cannot write manifest in '" + out_dir.string() + "'");
        out << to_json(out_dir).dump(2) << '\n';
    }
};

} // namespace amyepi::manifest
