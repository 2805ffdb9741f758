#pragma once

// Spatial fields from rasters: stepped [Abeta] from a PET-like uptake map,
// and conductivity tensors from an isotropic part plus an axonal direction.

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "amyepi/dg.hpp"
#include "amyepi/mesh.hpp"
#include "amyepi/raster.hpp"

namespace amyepi::ingest {

struct PetThresholds {
    double low = 0.65;          // values in [low, high) map to low_abeta
    double high = 0.70;         // values >= high map to high_abeta
    double low_abeta = 1.0;     // uM
    double high_abeta = 10.0;   // uM

    void validate() const {
        if (!(low <= high)) throw std::invalid_argument("PET thresholds: low must not exceed high");
        if (!(low_abeta >= 0.0 && high_abeta >= low_abeta))
            throw std::invalid_argument("PET thresholds: need 0 <= low_abeta <= high_abeta");
    }
};

inline double pet_level(double value, const PetThresholds& th) {
    if (value >= th.high) return th.high_abeta;
    if (value >= th.low) return th.low_abeta;
    return 0.0;
}

/// [Abeta] per element from the raster sampled at the element centroid.
inline std::vector<double> pet_to_abeta(const mesh::PolyMesh& m, const ScalarRaster& pet, const PetThresholds& th = {}) {
    th.validate();
    std::vector<double> out(m.num_elements());
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto& c = m.centroid[e];
        if (!pet.covers(c.x(), c.y()))
            throw std::out_of_range("pet_to_abeta: centroid of element " + std::to_string(e) + " lies outside the raster");
        out[e] = pet_level(pet.sample(c.x(), c.y()), th);
    }
    return out;
}

/// Sigma = s_iso I + s_axn a a^T. A zero direction means isotropic tissue;
/// other directions are normalized (with a warning when not unit length).
inline dg::Tensor conductivity_tensor(double s_iso, double s_axn, Eigen::Vector2d a, bool warn = true) {
    const double len = a.norm();
    if (len == 0.0) return s_iso * dg::Tensor::Identity();
    if (std::abs(len - 1.0) > 1e-6) {
        if (warn) std::clog << "warning: axonal direction of length " << len << " normalized\n";
        a /= len;
    }
    return s_iso * dg::Tensor::Identity() + s_axn * a * a.transpose();
}

/// Direction rasters store (cos, sin) of the fibre angle mapped from
/// [-1, 1] to [0, 1]; pixels where the white-matter mask is below 0.5 are grey
/// matter and stay isotropic.
struct DirectionField {
    const ScalarRaster* cos_channel = nullptr;
    const ScalarRaster* sin_channel = nullptr;
    const ScalarRaster* white_matter = nullptr;  // optional; null = everywhere
};

inline dg::ConductivityField build_conductivity(const mesh::PolyMesh& m, double s_iso, double s_axn,
                                                const DirectionField& dir) {
    if (!(s_iso > 0.0) || !(s_axn >= 0.0)) throw std::invalid_argument("conductivity: need s_iso > 0, s_axn >= 0");
    dg::ConductivityField f;
    int renormalized = 0;
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto& c = m.centroid[e];
        Eigen::Vector2d a = Eigen::Vector2d::Zero();
        const bool white = !dir.white_matter || (dir.white_matter->covers(c.x(), c.y()) &&
                                                 dir.white_matter->sample(c.x(), c.y()) >= 0.5);
        if (white && dir.cos_channel && dir.sin_channel) {
            a = {2.0 * dir.cos_channel->sample(c.x(), c.y()) - 1.0, 2.0 * dir.sin_channel->sample(c.x(), c.y()) - 1.0};
            if (a.norm() > 0.0 && std::abs(a.norm() - 1.0) > 1e-6) ++renormalized;
        }
        f.sigma.push_back(conductivity_tensor(s_iso, s_axn, a, false));
    }
    if (renormalized > 0)
        std::clog << "warning: " << renormalized << " axonal directions were not unit length and were normalized\n";
    return f;
}

} // namespace amyepi::ingest
