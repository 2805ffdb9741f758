#pragma once

// Barreto-Cressman ionic model extended with amyloid-beta dependent calcium
// and potassium pathways. Units: mV, ms, mM (concentrations), uM ([Abeta]),
// mS/cm^2 (conductances), uA/cm^2 (currents).
//
// Every function is templated on the scalar type so the same code path can be
// evaluated with amyepi::Dual for directional derivatives.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "amyepi/dual.hpp"

namespace amyepi::ionic {

using std::exp;
using std::expm1;
using std::log;
using std::pow;
using std::sqrt;

/// The six ionic unknowns at one point: (Ca_i, K_o, Na_i, m, h, n).
template <class T>
struct State {
    T ca_i{};  // intracellular calcium, mM
    T k_o{};   // extracellular potassium, mM
    T na_i{};  // intracellular sodium, mM
    T m{};
    T h{};
    T n{};

    static constexpr int size = 6;

    T& operator[](int i) { return (&ca_i)[i]; }
    const T& operator[](int i) const { return (&ca_i)[i]; }
};

using IonicState = State<double>;

inline bool is_valid(const IonicState& y) {
    auto unit = [](double g) { return g >= 0.0 && g <= 1.0; };
    return std::isfinite(y.ca_i) && std::isfinite(y.k_o) && std::isfinite(y.na_i) &&
           y.ca_i >= 0.0 && y.k_o > 0.0 && y.na_i > 0.0 && unit(y.m) && unit(y.h) && unit(y.n);
}

// --------------------------------------------------------------------------
// Gating rate functions

enum class RateKind { linoid, exponential, sigmoid };

inline RateKind parse_rate_kind(const std::string& s) {
    if (s == "linoid") return RateKind::linoid;
    if (s == "exponential") return RateKind::exponential;
    if (s == "sigmoid") return RateKind::sigmoid;
    throw std::invalid_argument("unknown rate kind '" + s + "'");
}

inline const char* to_string(RateKind k) {
    switch (k) {
        case RateKind::linoid: return "linoid";
        case RateKind::exponential: return "exponential";
        case RateKind::sigmoid: return "sigmoid";
    }
    return "?";
}

// linoid:      scale * (u - v_half) / (1 - exp(-(u - v_half)/slope))
// exponential: scale * exp(-(u - v_half)/slope)
// sigmoid:     scale / (1 + exp(-(u - v_half)/slope))
struct RateFn {
    RateKind kind = RateKind::exponential;
    double scale = 1.0;
    double v_half = 0.0;
    double slope = 1.0;

    template <class T>
    T operator()(const T& u) const {
        const T x = u - v_half;
        switch (kind) {
            case RateKind::linoid: {
                // removable singularity at u = v_half
                if (std::abs(value_of(x)) < 1e-7 * slope) return scale * slope * (T(1.0) + x / (2.0 * slope));
                return scale * x / (-expm1(-x / slope));
            }
            case RateKind::exponential: return scale * exp(-x / slope);
            case RateKind::sigmoid: return scale / (T(1.0) + exp(-x / slope));
        }
        return T(0.0);
    }
};

struct GatingRates {
    RateFn alpha_m{RateKind::linoid, 0.1, -30.0, 10.0};
    RateFn beta_m{RateKind::exponential, 4.0, -55.0, 18.0};
    RateFn alpha_h{RateKind::exponential, 0.07, -44.0, 20.0};
    RateFn beta_h{RateKind::sigmoid, 1.0, -14.0, 10.0};
    RateFn alpha_n{RateKind::linoid, 0.01, -34.0, 10.0};
    RateFn beta_n{RateKind::exponential, 0.125, -44.0, 80.0};
};

// --------------------------------------------------------------------------
// Parameters

struct BaseParams {
    // conductances, mS/cm^2
    double g_nal = 0.0175;
    double g_na = 100.0;
    double g_k = 40.0;
    double g_ahp = 0.01;
    double g_kl = 0.05;
    double g_cll = 0.05;
    double g_ca = 0.1;

    double tau_ca = 80.0;   // ms
    double tau = 1000.0;    // s -> ms
    double gamma = 0.0445;  // current -> concentration flux
    double rho = 1.25;      // pump strength, mM/s
    double g_glia = 66.666; // glial buffering strength, mM/s
    double epsilon = 1.333; // diffusion rate to the bath, 1/s
    double k_bath = 8.0;    // mM

    // Conservation relations: Na_o = na_o_rest - beta (Na_i - na_i_rest),
    // K_i = k_i_rest + (na_i_rest - Na_i).
    double na_o_rest = 144.0;
    double k_i_rest = 140.0;
    double na_i_rest = 18.0;
    double volume_ratio = 7.0;
    double cl_i = 6.0;
    double cl_o = 130.0;

    double e_ca = 120.0;         // mV
    double nernst_factor = 26.64; // RT/F, mV
    double gate_factor = 3.0;    // temperature factor in dg/dt
    double c_m = 1.0;            // uF/cm^2
    double chi_m = 100.0;        // membrane surface-to-volume ratio, 1/cm

    GatingRates gates{};

    void validate() const {
        for (double g : {g_nal, g_na, g_k, g_ahp, g_kl, g_cll, g_ca, rho, g_glia, epsilon})
            if (!(g >= 0.0)) throw std::invalid_argument("conductances and rates must be >= 0");
        if (tau != 1000.0) throw std::invalid_argument("tau must be 1000 (s to ms conversion)");
        if (!(k_bath > 0.0)) throw std::invalid_argument("k_bath must be > 0");
        if (!(tau_ca > 0.0) || !(gamma > 0.0) || !(c_m > 0.0) || !(chi_m > 0.0))
            throw std::invalid_argument("tau_ca, gamma, c_m and chi_m must be > 0");
    }
};

struct AbetaParams {
    static constexpr double d_bk_corrected = 1.070e-2;
    static constexpr double d_bk_printed = 10.70;
    static constexpr double k_vgcc_printed = 4.44e-2;
    // k_VGCC giving a 20 mV shift at 0.1 uM with u_max = 25 mV, alpha = 0.5
    static constexpr double k_vgcc_refit = 6.25e-3;

    double abeta = 0.0;      // uM
    double k_i = 2.312;      // uM
    double k_pmca = 34.602;  // ms/uM
    double j_asy = 10.0;     // uM/ms
    double k_d = 10.0;       // uM
    double q1 = 30.0;        // mV
    double q2 = 25.0;        // mV
    double u_max = 25.0;     // mV
    double alpha = 0.5;
    double k_vgcc = k_vgcc_printed; // uM
    double k_cak = 10.0;     // uM
    double a_bk = 0.4498;    // uM
    double b_bk = 1.9295;    // uM
    double c_bk = 0.7669;
    double d_bk = d_bk_corrected; // 1/uM
    double j_sign = -1.0;    // sign of the pore term in the membrane forcing
    double flux_to_mM = 1e-3; // pore flux uM/ms -> mM/ms

    void validate() const {
        if (!(abeta >= 0.0)) throw std::invalid_argument("[Abeta] must be >= 0");
        for (double c : {k_i, k_pmca, j_asy, k_d, q1, q2, u_max, k_vgcc, k_cak, a_bk, b_bk, c_bk, d_bk, flux_to_mM})
            if (!(c > 0.0)) throw std::invalid_argument("Abeta constants must be > 0");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
        if (j_sign != 1.0 && j_sign != -1.0) throw std::invalid_argument("j_sign must be +1 or -1");
    }
};

struct ModelParams {
    BaseParams base{};
    AbetaParams abeta{};
};

// --------------------------------------------------------------------------
// Pointwise quantities

template <class T>
struct Reversal {
    T e_na, e_k, e_cl;
};

template <class T>
T sodium_outside(const State<T>& y, const BaseParams& p) {
    return p.na_o_rest - p.volume_ratio * (y.na_i - p.na_i_rest);
}

template <class T>
T potassium_inside(const State<T>& y, const BaseParams& p) {
    return p.k_i_rest + (p.na_i_rest - y.na_i);
}

/// Nernst potentials (mV). Throws std::domain_error on a non-positive concentration.
template <class T>
Reversal<T> nernst_potentials(const State<T>& y, const BaseParams& p) {
    const T na_o = sodium_outside(y, p);
    const T k_i = potassium_inside(y, p);
    for (double c : {value_of(y.na_i), value_of(y.k_o), value_of(na_o), value_of(k_i), p.cl_i, p.cl_o})
        if (!(c > 0.0)) throw std::domain_error("nernst_potentials: non-positive concentration");
    return {p.nernst_factor * log(na_o / y.na_i), p.nernst_factor * log(y.k_o / k_i),
            T(p.nernst_factor * std::log(p.cl_i / p.cl_o))};
}

template <class T>
struct GateKinetics {
    T m_inf, h_inf, n_inf;
    T tau_m, tau_h, tau_n;
};

template <class T>
GateKinetics<T> gating_rates(const T& u, const GatingRates& g) {
    const T am = g.alpha_m(u), bm = g.beta_m(u);
    const T ah = g.alpha_h(u), bh = g.beta_h(u);
    const T an = g.alpha_n(u), bn = g.beta_n(u);
    return {am / (am + bm), ah / (ah + bh), an / (an + bn),
            T(1.0) / (am + bm), T(1.0) / (ah + bh), T(1.0) / (an + bn)};
}

template <class T>
struct Transport {
    T pump, glia, diff;
};

template <class T>
Transport<T> pump_glia_diff(const State<T>& y, const BaseParams& p) {
    const T pump = p.rho / ((T(1.0) + exp(5.5 - y.k_o)) * (T(1.0) + exp((25.0 - y.na_i) / 3.0)));
    const T glia = p.g_glia / (T(1.0) + exp((18.0 - y.k_o) / 2.5));
    const T diff = p.epsilon * (y.k_o - p.k_bath);
    return {pump, glia, diff};
}

/// PMCA clearance, mM/ms.
template <class T>
T pmca_flux(const T& ca_i, const AbetaParams& a, const BaseParams& p) {
    return -ca_i / (p.tau_ca + a.k_pmca * a.abeta);
}

/// Maximal pore influx J_max, uM/ms.
inline double pore_flux_max(const AbetaParams& a) { return a.j_asy * a.abeta / (a.k_d + a.abeta); }

/// Calcium influx through Abeta pores, uM/ms.
template <class T>
T abeta_pore_flux(const T& u, const AbetaParams& a) {
    return pore_flux_max(a) / (T(1.0) + exp((u - a.q1) / a.q2));
}

/// Abeta-induced shift of the VGCC activation voltage, mV.
inline double vgcc_shift(const AbetaParams& a) {
    if (a.abeta == 0.0) return 0.0;
    const double c = std::pow(a.abeta, a.alpha);
    return a.u_max * c / (std::pow(a.k_vgcc, a.alpha) + c);
}

/// Calcium source through L-type channels, mM/ms.
template <class T>
T vgcc_current(const T& u, double shift, const BaseParams& p) {
    return -0.002 * p.g_ca * (u - p.e_ca) / (T(1.0) + exp(-(25.0 + u + shift) / 2.5));
}

/// BK (AHP) current scaling S_Abeta.
/// The fitted coefficients give 1.0000173 at [Abeta] = 0; clamped so the
/// factor never exceeds 1 and vanishing Abeta recovers the baseline exactly.
inline double bk_scaling(const AbetaParams& a) {
    return std::min(1.0, a.a_bk / (a.abeta + a.b_bk) + a.c_bk * std::exp(-a.d_bk * a.abeta));
}

/// Fraction of fast potassium channels still available.
inline double fast_k_block(const AbetaParams& a) { return 1.0 - a.abeta / (a.k_cak + a.abeta); }

/// [Abeta]-dependent factors, evaluated once per parameter set.
struct AbetaEffects {
    double pmca_tau = 80.0;   // effective clearance time constant, ms
    double pore_max = 0.0;    // uM/ms
    double q1 = 30.0, q2 = 25.0;
    double shift = 0.0;       // mV
    double bk_scale = 1.0;
    double fast_k_scale = 1.0;
    double j_sign = -1.0;
    double flux_to_mM = 1e-3;
};

inline AbetaEffects effects(const AbetaParams& a, const BaseParams& p) {
    return {p.tau_ca + a.k_pmca * a.abeta, pore_flux_max(a), a.q1, a.q2, vgcc_shift(a),
            bk_scaling(a), fast_k_block(a), a.j_sign, a.flux_to_mM};
}

template <class T>
struct Currents {
    T na, k, cl;
};

template <class T>
Currents<T> membrane_currents(const T& u, const State<T>& y, const BaseParams& p, const AbetaEffects& e) {
    const Reversal<T> r = nernst_potentials(y, p);
    const T m3h = y.m * y.m * y.m * y.h;
    const T n4 = (y.n * y.n) * (y.n * y.n);
    const T i_na = (p.g_nal + p.g_na * m3h) * (u - r.e_na);
    const T i_k = (p.g_k * e.fast_k_scale * n4 + e.bk_scale * p.g_ahp * y.ca_i / (T(1.0) + y.ca_i) + p.g_kl) *
                  (u - r.e_k);
    const T i_cl = p.g_cll * (u - r.e_cl);
    return {i_na, i_k, i_cl};
}

template <class T>
Currents<T> membrane_currents(const T& u, const State<T>& y, const BaseParams& p, const AbetaParams& a) {
    return membrane_currents(u, y, p, effects(a, p));
}

template <class T>
struct Rhs {
    State<T> rate;  // dy/dt
    T f;            // membrane forcing, uA/cm^2; C_m du/dt = -f
    T j_abeta;      // pore flux, uM/ms
};

template <class T>
Rhs<T> rhs(const T& u, const State<T>& y, const BaseParams& p, const AbetaEffects& e) {
    const Currents<T> c = membrane_currents(u, y, p, e);
    const Transport<T> t = pump_glia_diff(y, p);
    const T j = e.pore_max / (T(1.0) + exp((u - e.q1) / e.q2));
    const T j_mM = e.flux_to_mM * j;

    Rhs<T> out;
    out.j_abeta = j;
    out.rate.ca_i = -y.ca_i / e.pmca_tau + vgcc_current(u, e.shift, p) + j_mM;
    out.rate.k_o = -(t.diff + 14.0 * t.pump + t.glia - 7.0 * p.gamma * c.k) / p.tau;
    out.rate.na_i = -(p.gamma * c.na + 3.0 * t.pump) / p.tau;

    const GateKinetics<T> g = gating_rates(u, p.gates);
    out.rate.m = p.gate_factor / g.tau_m * (g.m_inf - y.m);
    out.rate.h = p.gate_factor / g.tau_h * (g.h_inf - y.h);
    out.rate.n = p.gate_factor / g.tau_n * (g.n_inf - y.n);

    out.f = c.na + c.k + c.cl + e.j_sign * j_mM / p.gamma;
    return out;
}

template <class T>
Rhs<T> rhs(const T& u, const State<T>& y, const BaseParams& p, const AbetaParams& a) {
    return rhs(u, y, p, effects(a, p));
}

// --------------------------------------------------------------------------
// Unmodified Barreto-Cressman model, kept as an independent reference.

namespace baseline {

template <class T>
Currents<T> membrane_currents(const T& u, const State<T>& y, const BaseParams& p) {
    const Reversal<T> r = nernst_potentials(y, p);
    const T i_na = (p.g_nal + p.g_na * pow(y.m, 3.0) * y.h) * (u - r.e_na);
    const T i_k = (p.g_k * pow(y.n, 4.0) + p.g_ahp * y.ca_i / (T(1.0) + y.ca_i) + p.g_kl) * (u - r.e_k);
    const T i_cl = p.g_cll * (u - r.e_cl);
    return {i_na, i_k, i_cl};
}

template <class T>
Rhs<T> rhs(const T& u, const State<T>& y, const BaseParams& p) {
    const Currents<T> c = membrane_currents(u, y, p);
    const Transport<T> t = pump_glia_diff(y, p);
    Rhs<T> out;
    out.j_abeta = T(0.0);
    out.rate.ca_i = -y.ca_i / p.tau_ca - 0.002 * p.g_ca * (u - p.e_ca) / (T(1.0) + exp(-(25.0 + u) / 2.5));
    out.rate.k_o = -(t.diff + 14.0 * t.pump + t.glia - 7.0 * p.gamma * c.k) / p.tau;
    out.rate.na_i = -(p.gamma * c.na + 3.0 * t.pump) / p.tau;
    const GateKinetics<T> g = gating_rates(u, p.gates);
    out.rate.m = p.gate_factor * (g.m_inf - y.m) / g.tau_m;
    out.rate.h = p.gate_factor * (g.h_inf - y.h) / g.tau_h;
    out.rate.n = p.gate_factor * (g.n_inf - y.n) / g.tau_n;
    out.f = c.na + c.k + c.cl;
    return out;
}

} // namespace baseline

// --------------------------------------------------------------------------

/// Steady state of the ionic unknowns with the membrane clamped at u.
/// Gates sit at their steady-state values, calcium balances exactly, and
/// (K_o, Na_i) solve the two concentration balances by damped Newton.
inline IonicState clamped_rest_state(double u, const BaseParams& p, const AbetaParams& a) {
    const AbetaEffects e = effects(a, p);
    const GateKinetics<double> g = gating_rates(u, p.gates);
    IonicState y{};
    y.m = g.m_inf;
    y.h = g.h_inf;
    y.n = g.n_inf;
    const double j = e.pore_max / (1.0 + std::exp((u - e.q1) / e.q2));
    y.ca_i = std::max(0.0, e.pmca_tau * (vgcc_current(u, e.shift, p) + e.flux_to_mM * j));
    y.k_o = p.k_bath;
    y.na_i = p.na_i_rest;

    for (int it = 0; it < 100; ++it) {
        // residual and Jacobian via two dual passes
        State<Dual> yk{Dual(y.ca_i), Dual(y.k_o, 1.0), Dual(y.na_i), Dual(y.m), Dual(y.h), Dual(y.n)};
        State<Dual> yn{Dual(y.ca_i), Dual(y.k_o), Dual(y.na_i, 1.0), Dual(y.m), Dual(y.h), Dual(y.n)};
        const Rhs<Dual> rk = rhs(Dual(u), yk, p, e);
        const Rhs<Dual> rn = rhs(Dual(u), yn, p, e);
        const double r0 = rk.rate.k_o.v, r1 = rk.rate.na_i.v;
        const double j00 = rk.rate.k_o.d, j01 = rn.rate.k_o.d;
        const double j10 = rk.rate.na_i.d, j11 = rn.rate.na_i.d;
        const double det = j00 * j11 - j01 * j10;
        if (det == 0.0 || !std::isfinite(det)) break;
        double dk = -(j11 * r0 - j01 * r1) / det;
        double dn = -(-j10 * r0 + j00 * r1) / det;
        double lambda = 1.0;
        while (lambda > 1e-4 && (y.k_o + lambda * dk <= 0.0 || y.na_i + lambda * dn <= 0.0 ||
                                 sodium_outside(IonicState{0, 0, y.na_i + lambda * dn, 0, 0, 0}, p) <= 0.0 ||
                                 potassium_inside(IonicState{0, 0, y.na_i + lambda * dn, 0, 0, 0}, p) <= 0.0))
            lambda *= 0.5;
        y.k_o += lambda * dk;
        y.na_i += lambda * dn;
        if (std::abs(dk) + std::abs(dn) < 1e-13 * (y.k_o + y.na_i)) break;
    }
    return y;
}

} // namespace amyepi::ionic
