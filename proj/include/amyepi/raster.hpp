#pragma once

// 2D scalar rasters with physical placement, and PGM / CSV-grid I/O.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace amyepi {

/// Row 0 is the bottom row (smallest y). Pixel (i, j) covers
/// [x0 + i dx, x0 + (i+1) dx) x [y0 + j dy, y0 + (j+1) dy).
struct ScalarRaster {
    int width = 0;
    int height = 0;
    double x0 = 0.0, y0 = 0.0;
    double dx = 1.0, dy = 1.0;
    std::vector<double> values;  // row-major, clamped to [0, 1]

    ScalarRaster() = default;
    ScalarRaster(int w, int h, double ox, double oy, double sx, double sy)
        : width(w), height(h), x0(ox), y0(oy), dx(sx), dy(sy), values(static_cast<std::size_t>(w) * h, 0.0) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("raster size must be positive");
        if (!(sx > 0.0) || !(sy > 0.0)) throw std::invalid_argument("raster spacing must be > 0");
    }

    double& at(int i, int j) { return values[static_cast<std::size_t>(j) * width + i]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }

    void clamp() {
        for (double& v : values) v = std::clamp(v, 0.0, 1.0);
    }

    bool covers(double x, double y) const {
        return x >= x0 && y >= y0 && x <= x0 + width * dx && y <= y0 + height * dy;
    }

    /// Nearest-pixel sample; throws std::out_of_range outside the raster.
    double sample(double x, double y) const {
        if (!covers(x, y)) throw std::out_of_range("raster sample outside raster extent");
        const int i = std::min(width - 1, static_cast<int>(std::floor((x - x0) / dx)));
        const int j = std::min(height - 1, static_cast<int>(std::floor((y - y0) / dy)));
        return at(i, j);
    }
};

namespace detail {
inline void skip_pgm_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}
} // namespace detail

/// Reads a P2 or P5 PGM; gray levels are scaled by maxval into [0, 1].
/// The image top row becomes the raster's top (largest y).
inline ScalarRaster read_pgm(const std::string& path, double x0, double y0, double dx, double dy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open raster '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5") throw std::runtime_error("'" + path + "' is not a P2/P5 PGM");
    int w = 0, h = 0, maxval = 0;
    detail::skip_pgm_space(in);
    in >> w;
    detail::skip_pgm_space(in);
    in >> h;
    detail::skip_pgm_space(in);
    in >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("malformed PGM header in '" + path + "'");
    ScalarRaster r(w, h, x0, y0, dx, dy);
    if (magic == "P2") {
        for (int row = 0; row < h; ++row)
            for (int i = 0; i < w; ++i) {
                int g = 0;
                detail::skip_pgm_space(in);
                if (!(in >> g)) throw std::runtime_error("truncated PGM data in '" + path + "'");
                r.at(i, h - 1 - row) = static_cast<double>(g) / maxval;
            }
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = maxval < 256 ? 1 : 2;
        for (int row = 0; row < h; ++row)
            for (int i = 0; i < w; ++i) {
                unsigned char b[2] = {0, 0};
                if (!in.read(reinterpret_cast<char*>(b), bytes))
                    throw std::runtime_error("truncated PGM data in '" + path + "'");
                const int g = bytes == 1 ? b[0] : (b[0] << 8) | b[1];
                r.at(i, h - 1 - row) = static_cast<double>(g) / maxval;
            }
    }
    r.clamp();
    return r;
}

/// Writes an ASCII (P2) PGM with maxval 255.
inline void write_pgm(const std::string& path, const ScalarRaster& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write raster '" + path + "'");
    out << "P2\n" << r.width << ' ' << r.height << "\n255\n";
    for (int row = r.height - 1; row >= 0; --row) {
        for (int i = 0; i < r.width; ++i) {
            const int g = static_cast<int>(std::lround(std::clamp(r.at(i, row), 0.0, 1.0) * 255.0));
            out << g << (i + 1 < r.width ? ' ' : '\n');
        }
    }
}

/// CSV grid: one image row per line, top row first, comma-separated values in [0, 1].
inline ScalarRaster read_csv_grid(const std::string& path, double x0, double y0, double dx, double dy) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open raster '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged CSV raster '" + path + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) throw std::runtime_error("empty CSV raster '" + path + "'");
    ScalarRaster r(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()), x0, y0, dx, dy);
    for (int row = 0; row < r.height; ++row)
        for (int i = 0; i < r.width; ++i) r.at(i, r.height - 1 - row) = rows[row][i];
    r.clamp();
    return r;
}

inline ScalarRaster read_raster(const std::string& path, double x0, double y0, double dx, double dy) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "csv") return read_csv_grid(path, x0, y0, dx, dy);
    return read_pgm(path, x0, y0, dx, dy);
}

} // namespace amyepi
