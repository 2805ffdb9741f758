#pragma once

// Wave detection, activation-time maps and per-run summaries computed from
// cell-averaged time series.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace amyepi::analysis {

/// Cell values at a sequence of output times: values[k][e].
struct CellSeries {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> values;

    std::size_t frames() const { return t.size(); }
    int cells() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }

    void validate() const {
        if (t.size() != values.size()) throw std::invalid_argument("cell series: ragged input");
        for (std::size_t k = 1; k < t.size(); ++k)
            if (!(t[k] > t[k - 1])) throw std::invalid_argument("cell series: times must increase strictly");
        for (const auto& v : values)
            if (v.size() != cells()) throw std::invalid_argument("cell series: cell count changes between frames");
    }
};

/// Frames [first, last] with max_e u > threshold, delimited by sub-threshold frames.
struct Wave {
    std::size_t first = 0, last = 0;
    double t_start = 0.0, t_end = 0.0;  // times of the first and last active frame
};

inline std::vector<Wave> detect_waves(const CellSeries& s, double threshold = 0.0) {
    s.validate();
    std::vector<Wave> waves;
    bool active = false;
    for (std::size_t k = 0; k < s.frames(); ++k) {
        const bool on = s.values[k].size() > 0 && s.values[k].maxCoeff() > threshold;
        if (on && !active) waves.push_back({k, k, s.t[k], s.t[k]});
        if (on) {
            waves.back().last = k;
            waves.back().t_end = s.t[k];
        }
        active = on;
    }
    return waves;
}

struct ActivationMap {
    int wave = 0;
    double u_cr = 0.0;
    double t_min = 0.0;            // earliest crossing in the wave, ms
    std::vector<double> t_hat;     // ms relative to t_min; NaN = never activated
    int origin = -1;               // element with t_hat = 0

    bool defined(int e) const { return !std::isnan(t_hat[e]); }
    int activated() const {
        return static_cast<int>(std::count_if(t_hat.begin(), t_hat.end(), [](double v) { return !std::isnan(v); }));
    }
};

/// First crossing of u_cr per element inside the wave window, linearly
/// interpolated between frames, shifted so that the earliest is zero.
inline ActivationMap activation_map(const CellSeries& s, const Wave& w, double u_cr = 0.0, int wave_index = 0) {
    ActivationMap map;
    map.wave = wave_index;
    map.u_cr = u_cr;
    const int n = s.cells();
    map.t_hat.assign(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> when(n, std::numeric_limits<double>::quiet_NaN());
    const std::size_t k0 = w.first;
    for (int e = 0; e < n; ++e) {
        if (s.values[k0][e] >= u_cr) {
            if (k0 == 0 || s.values[k0 - 1][e] >= u_cr) {
                when[e] = s.t[k0];
            } else {
                const double a = s.values[k0 - 1][e], b = s.values[k0][e];
                when[e] = s.t[k0 - 1] + (u_cr - a) / (b - a) * (s.t[k0] - s.t[k0 - 1]);
            }
            continue;
        }
        for (std::size_t k = k0 + 1; k <= w.last; ++k) {
            const double a = s.values[k - 1][e], b = s.values[k][e];
            if (a < u_cr && b >= u_cr) {
                when[e] = s.t[k - 1] + (u_cr - a) / (b - a) * (s.t[k] - s.t[k - 1]);
                break;
            }
        }
    }
    double t_min = std::numeric_limits<double>::infinity();
    for (int e = 0; e < n; ++e)
        if (!std::isnan(when[e]) && when[e] < t_min) {
            t_min = when[e];
            map.origin = e;
        }
    if (map.origin < 0) return map;
    map.t_min = t_min;
    for (int e = 0; e < n; ++e)
        if (!std::isnan(when[e])) map.t_hat[e] = when[e] - t_min;
    return map;
}

inline std::vector<ActivationMap> activation_maps(const CellSeries& s, double u_cr = 0.0) {
    std::vector<ActivationMap> out;
    const auto waves = detect_waves(s, 0.0);
    for (std::size_t i = 0; i < waves.size(); ++i) out.push_back(activation_map(s, waves[i], u_cr, static_cast<int>(i)));
    return out;
}

inline void write_activation_csv(std::ostream& out, const std::vector<ActivationMap>& maps) {
    out << "element_id,wave,that_ms\n";
    out.precision(10);
    for (const auto& m : maps)
        for (std::size_t e = 0; e < m.t_hat.size(); ++e) {
            out << e << ',' << m.wave << ',';
            if (std::isnan(m.t_hat[e])) out << "nan";
            else out << m.t_hat[e];
            out << '\n';
        }
}

// --------------------------------------------------------------------------
// Run summaries

struct RunSeries {
    std::string name;
    CellSeries u, ca_i, k_o;
    std::vector<int> region;                 // per element
    std::vector<std::string> region_names;
    std::vector<double> area;                // per element, for weighted means
};

struct WaveSummary {
    int index = 0;
    double t_min = 0.0;
    int origin = -1;
    std::string origin_region;
    int activated = 0;
    double k_o_peak = 0.0;  // max cell K_o within the wave window
};

struct RegionCalcium {
    std::string region;
    double t = 0.0;
    double mean = 0.0, max = 0.0;
};

struct RunSummary {
    std::string name;
    std::vector<WaveSummary> waves;
    std::vector<RegionCalcium> calcium;
};

/// Area-weighted mean and max of a cell field over one region at the frame closest to t.
inline RegionCalcium region_stats(const RunSeries& r, const CellSeries& field, int region, double t) {
    if (field.frames() == 0) throw std::invalid_argument("region_stats: empty series");
    std::size_t k = 0;
    for (std::size_t i = 1; i < field.frames(); ++i)
        if (std::abs(field.t[i] - t) < std::abs(field.t[k] - t)) k = i;
    RegionCalcium c;
    c.region = r.region_names.at(region);
    c.t = field.t[k];
    double a = 0.0, s = 0.0;
    c.max = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < field.cells(); ++e) {
        if (r.region[e] != region) continue;
        s += r.area[e] * field.values[k][e];
        a += r.area[e];
        c.max = std::max(c.max, field.values[k][e]);
    }
    c.mean = a > 0.0 ? s / a : std::numeric_limits<double>::quiet_NaN();
    return c;
}

inline RunSummary summarize(const RunSeries& r, const std::vector<double>& calcium_times, double u_cr = 0.0) {
    RunSummary out;
    out.name = r.name;
    const auto waves = detect_waves(r.u, 0.0);
    for (std::size_t i = 0; i < waves.size(); ++i) {
        const auto map = activation_map(r.u, waves[i], u_cr, static_cast<int>(i));
        WaveSummary w;
        w.index = static_cast<int>(i);
        w.t_min = map.t_min;
        w.origin = map.origin;
        w.origin_region = map.origin >= 0 ? r.region_names.at(r.region[map.origin]) : "";
        w.activated = map.activated();
        if (r.k_o.frames() == r.u.frames())
            for (std::size_t k = waves[i].first; k <= waves[i].last; ++k)
                w.k_o_peak = std::max(w.k_o_peak, r.k_o.values[k].maxCoeff());
        out.waves.push_back(w);
    }
    for (double t : calcium_times)
        for (int reg = 0; reg < static_cast<int>(r.region_names.size()); ++reg)
            if (std::count(r.region.begin(), r.region.end(), reg) > 0) out.calcium.push_back(region_stats(r, r.ca_i, reg, t));
    return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
    out.precision(10);
    out << "run,kind,index,t_ms,origin_element,region,activated,value\n";
    for (const auto& r : runs) {
        for (const auto& w : r.waves)
            out << r.name << ",wave," << w.index << ',' << w.t_min << ',' << w.origin << ',' << w.origin_region << ','
                << w.activated << ',' << w.k_o_peak << '\n';
        for (const auto& c : r.calcium) {
            out << r.name << ",ca_mean,," << c.t << ",," << c.region << ",," << c.mean << '\n';
            out << r.name << ",ca_max,," << c.t << ",," << c.region << ",," << c.max << '\n';
        }
    }
}

} // namespace amyepi::analysis
