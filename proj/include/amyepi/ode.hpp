#pragma once

// Space-clamped (0D) integration of the ionic model: C_m du/dt = -f(u, y),
// dy/dt = m(u, y).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "amyepi/ionic.hpp"

namespace amyepi::ode {

enum class Scheme { rk4, euler };

inline Scheme parse_scheme(const std::string& s) {
    if (s == "rk4") return Scheme::rk4;
    if (s == "euler") return Scheme::euler;
    throw std::invalid_argument("unknown 0D scheme '" + s + "'");
}

struct OdeRun {
    ionic::IonicState y0{};
    double u0 = -67.0;   // mV
    double dt = 0.01;    // ms
    double t_end = 60000.0;
    int stride = 100;    // record every `stride` steps
    ionic::ModelParams params{};
    Scheme scheme = Scheme::rk4;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
        if (!(t_end >= dt)) throw std::invalid_argument("t_end must be >= dt");
        if (stride < 1) throw std::invalid_argument("stride must be >= 1");
        if (!ionic::is_valid(y0)) throw std::invalid_argument("initial ionic state is invalid");
        params.base.validate();
        params.abeta.validate();
    }
};

/// Run template whose initial state is the clamped rest state at u0.
inline OdeRun resting_run(const ionic::ModelParams& params, double u0 = -67.0) {
    OdeRun run;
    run.params = params;
    run.u0 = u0;
    run.y0 = ionic::clamped_rest_state(u0, params.base, params.abeta);
    return run;
}

struct Trace {
    std::vector<double> t, u, ca_i, k_o, na_i, j_abeta;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

class IntegrationDiverged : public std::runtime_error {
public:
    IntegrationDiverged(const std::string& what, double last_valid_time)
        : std::runtime_error(what), last_valid_time_(last_valid_time) {}
    double last_valid_time() const { return last_valid_time_; }

private:
    double last_valid_time_;
};

namespace detail {

// (u, Ca_i, K_o, Na_i, m, h, n)
struct Vec7 {
    double v[7];
    Vec7 axpy(double a, const Vec7& x) const {
        Vec7 r;
        for (int i = 0; i < 7; ++i) r.v[i] = v[i] + a * x.v[i];
        return r;
    }
};

inline Vec7 pack(double u, const ionic::IonicState& y) { return {{u, y.ca_i, y.k_o, y.na_i, y.m, y.h, y.n}}; }
inline ionic::IonicState state_of(const Vec7& x) { return {x.v[1], x.v[2], x.v[3], x.v[4], x.v[5], x.v[6]}; }

inline Vec7 derivative(const Vec7& x, const ionic::BaseParams& p, const ionic::AbetaEffects& e) {
    const auto r = ionic::rhs(x.v[0], state_of(x), p, e);
    return {{-r.f / p.c_m, r.rate.ca_i, r.rate.k_o, r.rate.na_i, r.rate.m, r.rate.h, r.rate.n}};
}

inline bool admissible(const Vec7& x) {
    return std::isfinite(x.v[0]) && std::abs(x.v[0]) < 200.0 && ionic::is_valid(state_of(x));
}

} // namespace detail

/// Fixed-step integration; records t = 0 and every `stride` steps thereafter.
inline Trace integrate(const OdeRun& run) {
    run.validate();
    const ionic::BaseParams& p = run.params.base;
    const ionic::AbetaEffects e = ionic::effects(run.params.abeta, p);
    const auto n_steps = static_cast<long>(std::llround(run.t_end / run.dt));

    Trace tr;
    const std::size_t n_rec = static_cast<std::size_t>(n_steps / run.stride) + 1;
    for (auto* c : {&tr.t, &tr.u, &tr.ca_i, &tr.k_o, &tr.na_i, &tr.j_abeta}) c->reserve(n_rec);

    auto record = [&](double t, const detail::Vec7& x) {
        tr.t.push_back(t);
        tr.u.push_back(x.v[0]);
        tr.ca_i.push_back(x.v[1]);
        tr.k_o.push_back(x.v[2]);
        tr.na_i.push_back(x.v[3]);
        tr.j_abeta.push_back(e.pore_max / (1.0 + std::exp((x.v[0] - e.q1) / e.q2)));
    };

    detail::Vec7 x = detail::pack(run.u0, run.y0);
    record(0.0, x);
    const double h = run.dt;
    for (long k = 1; k <= n_steps; ++k) {
        detail::Vec7 next;
        try {
            if (run.scheme == Scheme::rk4) {
                const auto k1 = detail::derivative(x, p, e);
                const auto k2 = detail::derivative(x.axpy(0.5 * h, k1), p, e);
                const auto k3 = detail::derivative(x.axpy(0.5 * h, k2), p, e);
                const auto k4 = detail::derivative(x.axpy(h, k3), p, e);
                next = x;
                for (int i = 0; i < 7; ++i)
                    next.v[i] += h / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
            } else {
                next = x.axpy(h, detail::derivative(x, p, e));
            }
        } catch (const std::domain_error& err) {
            throw IntegrationDiverged(std::string("0D integration diverged: ") + err.what(), (k - 1) * h);
        }
        if (!detail::admissible(next))
            throw IntegrationDiverged("0D integration diverged at t = " + std::to_string(k * h) + " ms",
                                      (k - 1) * h);
        x = next;
        if (k % run.stride == 0) record(k * h, x);
    }
    return tr;
}

/// One trace per [Abeta] value. Every run starts from the template's own
/// initial state unless `rest_per_value` asks for the clamped rest state of
/// each value. Runs are independent and fan out over `workers` threads.
inline std::vector<Trace> sweep(const std::vector<double>& abeta_values, const OdeRun& templ,
                                bool rest_per_value = true, unsigned workers = 1) {
    if (abeta_values.empty()) throw std::invalid_argument("sweep: empty [Abeta] list");
    for (double a : abeta_values)
        if (!(a >= 0.0)) throw std::invalid_argument("sweep: [Abeta] values must be >= 0");

    auto make_run = [&](double a) {
        OdeRun r = templ;
        r.params.abeta.abeta = a;
        if (rest_per_value) r.y0 = ionic::clamped_rest_state(r.u0, r.params.base, r.params.abeta);
        return r;
    };

    std::vector<Trace> out(abeta_values.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < abeta_values.size(); ++i) out[i] = integrate(make_run(abeta_values[i]));
        return out;
    }
    std::vector<std::future<Trace>> jobs;
    for (std::size_t i = 0; i < abeta_values.size(); ++i) {
        if (jobs.size() >= workers) {
            const std::size_t done = i - jobs.size();
            out[done] = jobs.front().get();
            jobs.erase(jobs.begin());
        }
        jobs.push_back(std::async(std::launch::async, [run = make_run(abeta_values[i])] { return integrate(run); }));
    }
    const std::size_t first = abeta_values.size() - jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) out[first + i] = jobs[i].get();
    return out;
}

// --------------------------------------------------------------------------
// Spike and burst characterization

struct Burst {
    double t_start, t_end;  // first and last spike time
    int spikes;
};

struct SpikeMetrics {
    std::vector<double> spike_times;
    std::vector<Burst> bursts;
    int burst_count = 0;
    double mean_intra_burst_frequency = 0.0;  // Hz, over bursts with >= 2 spikes
    double duty_cycle = 0.0;                  // fraction of the trace spent inside bursts
};

/// Spikes are upward crossings of `spike_threshold` (linear interpolation);
/// spikes closer than `burst_gap` ms belong to the same burst.
inline SpikeMetrics spike_burst_metrics(const std::vector<double>& t, const std::vector<double>& u,
                                        double spike_threshold = 0.0, double burst_gap = 500.0) {
    if (t.empty() || t.size() != u.size()) throw std::invalid_argument("spike_burst_metrics: empty or ragged trace");
    SpikeMetrics m;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (u[i - 1] < spike_threshold && u[i] >= spike_threshold) {
            const double s = (spike_threshold - u[i - 1]) / (u[i] - u[i - 1]);
            m.spike_times.push_back(t[i - 1] + s * (t[i] - t[i - 1]));
        }
    }
    for (double s : m.spike_times) {
        if (m.bursts.empty() || s - m.bursts.back().t_end > burst_gap)
            m.bursts.push_back({s, s, 1});
        else {
            m.bursts.back().t_end = s;
            ++m.bursts.back().spikes;
        }
    }
    m.burst_count = static_cast<int>(m.bursts.size());

    double freq_sum = 0.0, active = 0.0;
    int freq_n = 0;
    for (const Burst& b : m.bursts) {
        active += b.t_end - b.t_start;
        if (b.spikes >= 2) {
            freq_sum += 1000.0 * (b.spikes - 1) / (b.t_end - b.t_start);
            ++freq_n;
        }
    }
    if (freq_n > 0) m.mean_intra_burst_frequency = freq_sum / freq_n;
    const double span = t.back() - t.front();
    m.duty_cycle = span > 0.0 ? active / span : 0.0;
    return m;
}

inline SpikeMetrics spike_burst_metrics(const Trace& tr, double spike_threshold = 0.0, double burst_gap = 500.0) {
    if (tr.empty()) throw std::invalid_argument("spike_burst_metrics: empty trace");
    return spike_burst_metrics(tr.t, tr.u, spike_threshold, burst_gap);
}

/// Time average by the trapezoidal rule.
inline double time_average(const std::vector<double>& t, const std::vector<double>& v) {
    if (t.size() < 2) return t.empty() ? 0.0 : v.front();
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    return s / (t.back() - t.front());
}

// --------------------------------------------------------------------------
// Attractor in (Ca_i, K_o, Na_i)

struct AttractorPoint {
    double ca_i, k_o, na_i, u;
};

struct Box3 {
    double lo[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
    double hi[3] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
};

struct Attractor {
    std::vector<AttractorPoint> points;
    Box3 box;
    double centroid[3] = {0.0, 0.0, 0.0};
};

inline Attractor attractor_export(const Trace& tr, double burn_in = 5000.0) {
    Attractor a;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (tr.t[i] < burn_in) continue;
        const AttractorPoint p{tr.ca_i[i], tr.k_o[i], tr.na_i[i], tr.u[i]};
        a.points.push_back(p);
        const double c[3] = {p.ca_i, p.k_o, p.na_i};
        for (int d = 0; d < 3; ++d) {
            a.box.lo[d] = std::min(a.box.lo[d], c[d]);
            a.box.hi[d] = std::max(a.box.hi[d], c[d]);
            a.centroid[d] += c[d];
        }
    }
    if (a.points.empty()) {
        std::clog << "warning: attractor burn-in " << burn_in << " ms leaves no samples\n";
        return a;
    }
    for (double& c : a.centroid) c /= static_cast<double>(a.points.size());
    return a;
}

} // namespace amyepi::ode
