#pragma once

// CSV and legacy-VTK output, plus reading back cell series for analysis.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amyepi/analysis.hpp"
#include "amyepi/mesh.hpp"
#include "amyepi/ode.hpp"

namespace amyepi::io {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << std::setprecision(10);
    return out;
}

inline void write_trace_csv(const std::string& path, const ode::Trace& tr) {
    auto out = open_out(path);
    out << "t,u,ca_i,k_o,na_i,j_abeta\n";
    for (std::size_t i = 0; i < tr.size(); ++i)
        out << tr.t[i] << ',' << tr.u[i] << ',' << tr.ca_i[i] << ',' << tr.k_o[i] << ',' << tr.na_i[i] << ','
            << tr.j_abeta[i] << '\n';
}

inline void write_attractor_csv(const std::string& path, const ode::Attractor& a) {
    auto out = open_out(path);
    out << "ca_i,k_o,na_i,u\n";
    for (const auto& p : a.points) out << p.ca_i << ',' << p.k_o << ',' << p.na_i << ',' << p.u << '\n';
}

inline void write_probes_csv(const std::string& path, const std::vector<std::string>& ids, const std::vector<double>& t,
                             const std::vector<std::vector<double>>& u) {
    auto out = open_out(path);
    out << "t,probe_id,u\n";
    for (std::size_t k = 0; k < t.size(); ++k)
        for (std::size_t p = 0; p < ids.size(); ++p) out << t[k] << ',' << ids[p] << ',' << u[p][k] << '\n';
}

/// Wide layout: one row per output time, "t,c0,c1,...".
inline void write_cell_series(const std::string& path, const analysis::CellSeries& s) {
    auto out = open_out(path);
    out << 't';
    for (int e = 0; e < s.cells(); ++e) out << ",c" << e;
    out << '\n';
    for (std::size_t k = 0; k < s.frames(); ++k) {
        out << s.t[k];
        for (int e = 0; e < s.cells(); ++e) out << ',' << s.values[k][e];
        out << '\n';
    }
}

inline analysis::CellSeries read_cell_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cell series '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty cell series '" + path + "'");
    const long cells = std::count(line.begin(), line.end(), ',');
    analysis::CellSeries s;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        s.t.push_back(std::stod(cell));
        Eigen::VectorXd v(cells);
        long e = 0;
        while (std::getline(ss, cell, ',')) {
            if (e >= cells) break;
            v[e++] = std::stod(cell);
        }
        if (e != cells) throw std::runtime_error(path + ":" + std::to_string(row) + ": wrong number of columns");
        s.values.push_back(std::move(v));
    }
    s.validate();
    return s;
}

/// Legacy ASCII VTK unstructured grid with polygon cells and cell data.
inline void write_vtk(const std::string& path, const mesh::PolyMesh& m,
                      const std::vector<std::pair<std::string, Eigen::VectorXd>>& cell_fields,
                      const std::string& title = "amyepi") {
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << m.vertices.size() << " double\n";
    for (const auto& v : m.vertices) out << v.x() << ' ' << v.y() << " 0\n";
    std::size_t total = 0;
    for (const auto& e : m.elements) total += e.size() + 1;
    out << "CELLS " << m.elements.size() << ' ' << total << '\n';
    for (const auto& e : m.elements) {
        out << e.size();
        for (int v : e) out << ' ' << v;
        out << '\n';
    }
    out << "CELL_TYPES " << m.elements.size() << '\n';
    for (std::size_t i = 0; i < m.elements.size(); ++i) out << "7\n";
    out << "CELL_DATA " << m.elements.size() << '\n';
    for (const auto& [name, values] : cell_fields) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (int i = 0; i < values.size(); ++i) {
            if (std::isnan(values[i])) out << "nan\n";
            else out << values[i] << '\n';
        }
    }
}

} // namespace amyepi::io
