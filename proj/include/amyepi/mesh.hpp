#pragma once

// Polygonal meshes: topology, geometry, generators for rectangular test
// domains, region tagging, polynomial-degree assignment and a plain-text
// file format (see docs/mesh_format.md).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "amyepi/raster.hpp"

namespace amyepi::mesh {

using Vec2 = Eigen::Vector2d;

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    double area() const { return (x1 - x0) * (y1 - y0); }
};

/// A face is oriented so that `normal` points out of element `plus`.
/// Boundary faces have `minus == -1`.
struct Face {
    int v0 = -1, v1 = -1;
    int plus = -1, minus = -1;
    Vec2 normal = Vec2::Zero();
    double length = 0.0;

    bool interior() const { return minus >= 0; }
};

struct PolyMesh {
    std::vector<Vec2> vertices;                // cm
    std::vector<std::vector<int>> elements;    // counterclockwise vertex loops
    std::vector<int> region;                   // per-element index into region_names
    std::vector<std::string> region_names{"default"};
    std::vector<int> degree;                   // per-element polynomial degree p_K >= 1

    // derived by build()
    std::vector<double> area, diameter;
    std::vector<Vec2> centroid;
    std::vector<Face> faces;
    std::vector<std::vector<int>> element_faces;

    int num_elements() const { return static_cast<int>(elements.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }
    double h_max() const { return diameter.empty() ? 0.0 : *std::max_element(diameter.begin(), diameter.end()); }

    int num_interior_faces() const {
        return static_cast<int>(std::count_if(faces.begin(), faces.end(), [](const Face& f) { return f.interior(); }));
    }

    /// Recomputes orientation, geometry and face topology. Throws on invalid input.
    void build();
};

// --------------------------------------------------------------------------
// Geometry helpers

inline double signed_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

inline Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
    double a = 0.0;
    Vec2 c = Vec2::Zero();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        const double cr = p.x() * q.y() - q.x() * p.y();
        a += cr;
        c += (p + q) * cr;
    }
    return c / (3.0 * a);
}

namespace detail {
inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
    auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); };
    auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& c) {
        return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= c.y() &&
               c.y() <= std::max(a.y(), b.y());
    };
    const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}
} // namespace detail

/// True when no two non-adjacent edges touch and the area is nonzero.
inline bool is_simple_polygon(const std::vector<Vec2>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    if (std::abs(signed_area(poly)) <= 0.0) return false;
    for (std::size_t i = 0; i < n; ++i)
        if ((poly[i] - poly[(i + 1) % n]).norm() == 0.0) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (detail::segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
        }
    }
    return true;
}

inline bool point_in_polygon(const Vec2& x, const std::vector<Vec2>& poly) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > x.y()) != (b.y() > x.y()) && x.x() < (b.x() - a.x()) * (x.y() - a.y()) / (b.y() - a.y()) + a.x())
            inside = !inside;
    }
    return inside;
}

inline std::vector<Vec2> element_polygon(const PolyMesh& m, int e) {
    std::vector<Vec2> poly;
    poly.reserve(m.elements[e].size());
    for (int v : m.elements[e]) poly.push_back(m.vertices[v]);
    return poly;
}

inline void PolyMesh::build() {
    const int ne = num_elements();
    if (ne == 0) throw std::invalid_argument("mesh has no elements");
    if (region.empty()) region.assign(ne, 0);
    if (degree.empty()) degree.assign(ne, 1);
    if (static_cast<int>(region.size()) != ne || static_cast<int>(degree.size()) != ne)
        throw std::invalid_argument("mesh: per-element arrays do not match element count");

    area.assign(ne, 0.0);
    diameter.assign(ne, 0.0);
    centroid.assign(ne, Vec2::Zero());
    for (int e = 0; e < ne; ++e) {
        auto& loop = elements[e];
        for (int v : loop)
            if (v < 0 || v >= static_cast<int>(vertices.size()))
                throw std::invalid_argument("mesh: element " + std::to_string(e) + " references a missing vertex");
        std::vector<Vec2> poly = element_polygon(*this, e);
        if (signed_area(poly) < 0.0) {
            std::reverse(loop.begin(), loop.end());
            std::reverse(poly.begin(), poly.end());
        }
        if (!is_simple_polygon(poly))
            throw std::invalid_argument("mesh: element " + std::to_string(e) + " is not a simple polygon");
        if (degree[e] < 1) throw std::invalid_argument("mesh: polynomial degree must be >= 1");
        area[e] = signed_area(poly);
        centroid[e] = polygon_centroid(poly);
        double d = 0.0;
        for (std::size_t i = 0; i < poly.size(); ++i)
            for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, (poly[i] - poly[j]).norm());
        diameter[e] = d;
    }

    faces.clear();
    element_faces.assign(ne, {});
    std::map<std::pair<int, int>, int> by_edge;
    for (int e = 0; e < ne; ++e) {
        const auto& loop = elements[e];
        for (std::size_t i = 0; i < loop.size(); ++i) {
            const int a = loop[i], b = loop[(i + 1) % loop.size()];
            const auto key = std::minmax(a, b);
            auto it = by_edge.find(key);
            if (it == by_edge.end()) {
                Face f;
                f.v0 = a;
                f.v1 = b;
                f.plus = e;
                const Vec2 t = vertices[b] - vertices[a];
                f.length = t.norm();
                f.normal = Vec2(t.y(), -t.x()) / f.length;  // outward for a CCW loop
                by_edge.emplace(key, num_faces());
                element_faces[e].push_back(num_faces());
                faces.push_back(f);
            } else {
                Face& f = faces[it->second];
                if (f.minus >= 0)
                    throw std::invalid_argument("mesh: edge shared by more than two elements");
                if (f.v0 != b || f.v1 != a)
                    throw std::invalid_argument("mesh: inconsistent orientation across a shared edge");
                f.minus = e;
                element_faces[e].push_back(it->second);
            }
        }
    }
}

// --------------------------------------------------------------------------
// Validity suite

struct ValidityReport {
    bool simple = true;
    bool two_sided = true;
    double area_sum = 0.0;
    double boundary_area = 0.0;   // area enclosed by the boundary faces
    double max_normal_defect = 0.0;
    bool ok(double rel_tol = 1e-10) const {
        return simple && two_sided && std::abs(area_sum - boundary_area) <= rel_tol * std::abs(boundary_area);
    }
};

inline ValidityReport check_validity(const PolyMesh& m) {
    ValidityReport r;
    for (int e = 0; e < m.num_elements(); ++e) {
        if (!is_simple_polygon(element_polygon(m, e))) r.simple = false;
        r.area_sum += m.area[e];
    }
    std::vector<int> uses(m.num_faces(), 0);
    for (const auto& ef : m.element_faces)
        for (int f : ef) ++uses[f];
    for (int f = 0; f < m.num_faces(); ++f) {
        const Face& face = m.faces[f];
        if (uses[f] != (face.interior() ? 2 : 1)) r.two_sided = false;
        const Vec2 t = m.vertices[face.v1] - m.vertices[face.v0];
        r.max_normal_defect = std::max(r.max_normal_defect, std::abs(face.normal.dot(t)) / t.norm());
        if (!face.interior()) {
            const Vec2& p = m.vertices[face.v0];
            const Vec2& q = m.vertices[face.v1];
            r.boundary_area += 0.5 * (p.x() * q.y() - q.x() * p.y());
        }
    }
    return r;
}

// --------------------------------------------------------------------------
// Generators

namespace detail {
inline std::vector<Vec2> grid_vertices(const Rect& r, int nx, int ny, double perturbation, std::uint64_t seed) {
    const double hx = (r.x1 - r.x0) / nx, hy = (r.y1 - r.y0) / ny;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::vector<Vec2> v;
    v.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            Vec2 p(r.x0 + i * hx, r.y0 + j * hy);
            const double jx = jitter(rng), jy = jitter(rng);
            if (i > 0 && i < nx) p.x() += perturbation * hx * jx;
            if (j > 0 && j < ny) p.y() += perturbation * hy * jy;
            v.push_back(p);
        }
    return v;
}

inline PolyMesh compact(PolyMesh m) {
    std::vector<int> remap(m.vertices.size(), -1);
    std::vector<Vec2> kept;
    for (auto& loop : m.elements)
        for (int& v : loop) {
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(kept.size());
                kept.push_back(m.vertices[v]);
            }
            v = remap[v];
        }
    m.vertices = std::move(kept);
    return m;
}

template <class Make>
PolyMesh with_retries(Make make, double perturbation) {
    double jitter = perturbation;
    for (int attempt = 0; attempt < 4; ++attempt, jitter *= 0.5) {
        try {
            PolyMesh m = make(jitter);
            m.build();
            return m;
        } catch (const std::invalid_argument&) {
            if (jitter == 0.0) throw;
        }
    }
    throw std::runtime_error("mesh generation produced degenerate elements even with reduced jitter");
}
} // namespace detail

/// nx x ny quadrilaterals with interior vertices jittered by up to
/// `perturbation` times the cell size in each direction.
inline PolyMesh generate_structured(const Rect& r, int nx, int ny, double perturbation = 0.0,
                                    std::uint64_t seed = 1) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("generate_structured: nx, ny must be >= 1");
    if (!(perturbation >= 0.0 && perturbation < 0.3))
        throw std::invalid_argument("generate_structured: perturbation must lie in [0, 0.3)");
    return detail::with_retries(
        [&](double jitter) {
            PolyMesh m;
            m.vertices = detail::grid_vertices(r, nx, ny, jitter, seed);
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const int a = j * (nx + 1) + i;
                    m.elements.push_back({a, a + 1, a + nx + 2, a + nx + 1});
                }
            return m;
        },
        perturbation);
}

/// Fine nx x ny grid where every `block` x `block` group of cells whose
/// centroids all miss `keep_fine` is merged into one polygon. Merged blocks
/// keep the fine vertices they share with fine neighbours (hanging nodes
/// become polygon vertices), so the result is a conforming polygonal mesh.
inline PolyMesh generate_locally_refined(const Rect& r, int nx, int ny, int block,
                                         const std::function<bool(const Vec2&)>& keep_fine,
                                         double perturbation = 0.0, std::uint64_t seed = 1) {
    if (nx < 1 || ny < 1 || block < 1) throw std::invalid_argument("generate_locally_refined: bad sizes");
    if (nx % block != 0 || ny % block != 0)
        throw std::invalid_argument("generate_locally_refined: nx and ny must be multiples of block");
    if (!(perturbation >= 0.0 && perturbation < 0.3))
        throw std::invalid_argument("generate_locally_refined: perturbation must lie in [0, 0.3)");
    const double hx = (r.x1 - r.x0) / nx, hy = (r.y1 - r.y0) / ny;
    const int bx = nx / block, by = ny / block;

    std::vector<char> coarse(static_cast<std::size_t>(bx) * by, 1);
    for (int J = 0; J < by; ++J)
        for (int I = 0; I < bx; ++I)
            for (int j = J * block; j < (J + 1) * block; ++j)
                for (int i = I * block; i < (I + 1) * block; ++i)
                    if (keep_fine(Vec2(r.x0 + (i + 0.5) * hx, r.y0 + (j + 0.5) * hy))) coarse[J * bx + I] = 0;

    auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
    auto block_of = [&](int i, int j) -> int {  // fine cell -> block index, -1 outside
        if (i < 0 || j < 0 || i >= nx || j >= ny) return -1;
        return (j / block) * bx + (i / block);
    };
    // A vertex in the middle of a coarse block edge is kept only if a fine cell touches it.
    auto needed = [&](int i, int j) {
        for (int dj = -1; dj <= 0; ++dj)
            for (int di = -1; di <= 0; ++di) {
                const int b = block_of(i + di, j + dj);
                if (b >= 0 && !coarse[b]) return true;
            }
        return false;
    };

    return detail::with_retries(
        [&](double jitter) {
            PolyMesh m;
            m.vertices = detail::grid_vertices(r, nx, ny, jitter, seed);
            for (int J = 0; J < by; ++J)
                for (int I = 0; I < bx; ++I) {
                    const int i0 = I * block, j0 = J * block, i1 = i0 + block, j1 = j0 + block;
                    if (!coarse[J * bx + I]) {
                        for (int j = j0; j < j1; ++j)
                            for (int i = i0; i < i1; ++i)
                                m.elements.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
                        continue;
                    }
                    std::vector<int> loop;
                    auto push = [&](int i, int j, bool corner) {
                        if (corner || needed(i, j)) loop.push_back(vid(i, j));
                    };
                    for (int i = i0; i < i1; ++i) push(i, j0, i == i0);
                    for (int j = j0; j < j1; ++j) push(i1, j, j == j0);
                    for (int i = i1; i > i0; --i) push(i, j1, i == i1);
                    for (int j = j1; j > j0; --j) push(i0, j, j == j1);
                    m.elements.push_back(std::move(loop));
                }
            return detail::compact(std::move(m));
        },
        perturbation);
}

/// Keeps the elements whose centroid satisfies `keep`; unused vertices are dropped.
inline PolyMesh remove_elements(const PolyMesh& m, const std::function<bool(const Vec2&)>& keep) {
    PolyMesh out;
    out.vertices = m.vertices;
    out.region_names = m.region_names;
    for (int e = 0; e < m.num_elements(); ++e) {
        if (!keep(m.centroid[e])) continue;
        out.elements.push_back(m.elements[e]);
        out.region.push_back(m.region[e]);
        out.degree.push_back(m.degree[e]);
    }
    out = detail::compact(std::move(out));
    out.build();
    return out;
}

// --------------------------------------------------------------------------
// Regions

struct Shape {
    enum class Kind { all, circle, rect, halfplane, mask };
    Kind kind = Kind::all;
    double a = 0, b = 0, c = 0, d = 0;  // circle: cx cy r; rect: x0 y0 x1 y1; halfplane: nx ny offset (n.x <= offset)
    std::shared_ptr<const ScalarRaster> raster;  // mask: raster value >= threshold (stored in a)
    bool strict = false;                         // circle: strict inequality

    static Shape everywhere() { return {}; }
    static Shape circle(double cx, double cy, double radius, bool strict = false) {
        Shape s;
        s.kind = Kind::circle;
        s.a = cx, s.b = cy, s.c = radius;
        s.strict = strict;
        return s;
    }
    static Shape rectangle(double x0, double y0, double x1, double y1) {
        Shape s;
        s.kind = Kind::rect;
        s.a = x0, s.b = y0, s.c = x1, s.d = y1;
        return s;
    }
    static Shape halfplane(double nx, double ny, double offset) {
        Shape s;
        s.kind = Kind::halfplane;
        s.a = nx, s.b = ny, s.c = offset;
        return s;
    }
    static Shape mask(std::shared_ptr<const ScalarRaster> raster, double threshold) {
        Shape s;
        s.kind = Kind::mask;
        s.raster = std::move(raster);
        s.a = threshold;
        return s;
    }

    bool contains(const Vec2& p) const {
        switch (kind) {
            case Kind::all: return true;
            case Kind::circle: {
                const double r2 = (p.x() - a) * (p.x() - a) + (p.y() - b) * (p.y() - b);
                return strict ? r2 < c * c : r2 <= c * c;
            }
            case Kind::rect: return p.x() >= a && p.x() <= c && p.y() >= b && p.y() <= d;
            case Kind::halfplane: return a * p.x() + b * p.y() <= c;
            case Kind::mask: return raster->covers(p.x(), p.y()) && raster->sample(p.x(), p.y()) >= a;
        }
        return false;
    }

    /// Distance from p to the shape (0 inside); only circles and rectangles are exact.
    double distance(const Vec2& p) const {
        if (contains(p)) return 0.0;
        if (kind == Kind::circle) return std::hypot(p.x() - a, p.y() - b) - c;
        if (kind == Kind::rect) {
            const double dx = std::max({a - p.x(), 0.0, p.x() - c});
            const double dy = std::max({b - p.y(), 0.0, p.y() - d});
            return std::hypot(dx, dy);
        }
        return std::numeric_limits<double>::infinity();
    }
};

struct Region {
    std::string name;
    Shape shape;
    int priority = 0;
    double abeta = 0.0;  // uM
    double u0 = -67.0;   // mV
};

/// Regions are resolved on element centroids: the containing region of
/// highest priority wins, ties going to the earlier entry.
struct RegionSpec {
    std::vector<Region> regions;

    int resolve(const Vec2& p) const {
        int best = -1;
        for (int r = 0; r < static_cast<int>(regions.size()); ++r)
            if (regions[r].shape.contains(p) && (best < 0 || regions[r].priority > regions[best].priority)) best = r;
        return best;
    }

    int index_of(const std::string& name) const {
        for (int r = 0; r < static_cast<int>(regions.size()); ++r)
            if (regions[r].name == name) return r;
        return -1;
    }
};

struct TagResult {
    PolyMesh mesh;
    std::vector<int> counts;  // elements per region, in spec order
};

inline TagResult tag_regions(const PolyMesh& m, const RegionSpec& spec) {
    if (spec.regions.empty()) throw std::invalid_argument("tag_regions: empty region spec");
    TagResult out{m, std::vector<int>(spec.regions.size(), 0)};
    out.mesh.region_names.clear();
    for (const Region& r : spec.regions) out.mesh.region_names.push_back(r.name);
    for (int e = 0; e < m.num_elements(); ++e) {
        const int r = spec.resolve(m.centroid[e]);
        if (r < 0)
            throw std::invalid_argument("tag_regions: element " + std::to_string(e) +
                                        " matches no region (add a default region)");
        out.mesh.region[e] = r;
        ++out.counts[r];
    }
    return out;
}

// --------------------------------------------------------------------------
// Polynomial degrees

inline int dim_p(int p) { return (p + 1) * (p + 2) / 2; }

inline long dof_count(const PolyMesh& m) {
    long n = 0;
    for (int p : m.degree) n += dim_p(p);
    return n;
}

struct UniformDegree {
    int p = 1;
};
struct RegionDegree {
    std::map<std::string, int> by_region;
    int fallback = 1;
};
/// Elements whose vertices see both signs of `level_set` get base + 1.
struct FrontDegree {
    std::function<double(const Vec2&)> level_set;
    int base = 1;
};
using DegreeRule = std::variant<UniformDegree, RegionDegree, FrontDegree>;

inline PolyMesh assign_degrees(const PolyMesh& m, const DegreeRule& rule) {
    PolyMesh out = m;
    for (int e = 0; e < m.num_elements(); ++e) {
        int p = 1;
        if (const auto* u = std::get_if<UniformDegree>(&rule)) {
            p = u->p;
        } else if (const auto* r = std::get_if<RegionDegree>(&rule)) {
            auto it = r->by_region.find(m.region_names.at(m.region[e]));
            p = it == r->by_region.end() ? r->fallback : it->second;
        } else {
            const auto& f = std::get<FrontDegree>(rule);
            bool neg = false, pos = false;
            for (int v : m.elements[e]) {
                const double s = f.level_set(m.vertices[v]);
                neg |= s < 0.0;
                pos |= s > 0.0;
            }
            p = f.base + ((neg && pos) ? 1 : 0);
        }
        if (p < 1) throw std::invalid_argument("assign_degrees: degree must be >= 1");
        out.degree[e] = p;
    }
    return out;
}

// --------------------------------------------------------------------------
// Face geometry with neighbour data

struct FaceGeometry {
    double length;
    Vec2 normal;
    int plus, minus;
    int p_plus, p_minus;
    double h_plus, h_minus;
};

inline std::vector<FaceGeometry> face_geometry(const PolyMesh& m) {
    std::vector<FaceGeometry> out;
    out.reserve(m.faces.size());
    for (const Face& f : m.faces) {
        FaceGeometry g{f.length, f.normal, f.plus, f.minus, m.degree[f.plus], 0, m.diameter[f.plus], 0.0};
        if (f.interior()) {
            g.p_minus = m.degree[f.minus];
            g.h_minus = m.diameter[f.minus];
        }
        out.push_back(g);
    }
    return out;
}

/// Element containing x, or -1.
inline int locate(const PolyMesh& m, const Vec2& x) {
    for (int e = 0; e < m.num_elements(); ++e)
        if (point_in_polygon(x, element_polygon(m, e))) return e;
    // points on element edges: fall back to the nearest centroid within the domain
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int e = 0; e < m.num_elements(); ++e) {
        const double d = (m.centroid[e] - x).norm();
        if (d < bd && d <= m.diameter[e]) bd = d, best = e;
    }
    return best;
}

// --------------------------------------------------------------------------
// File I/O

inline void write_mesh(std::ostream& out, const PolyMesh& m) {
    out.precision(17);
    out << "polymesh 1\n";
    out << "vertices " << m.vertices.size() << '\n';
    for (const Vec2& v : m.vertices) out << v.x() << ' ' << v.y() << '\n';
    out << "elements " << m.elements.size() << '\n';
    for (int e = 0; e < m.num_elements(); ++e) {
        out << m.elements[e].size();
        for (int v : m.elements[e]) out << ' ' << v;
        out << ' ' << m.region[e] << ' ' << m.degree[e] << '\n';
    }
    out << "regions " << m.region_names.size() << '\n';
    for (std::size_t r = 0; r < m.region_names.size(); ++r) out << r << ' ' << m.region_names[r] << '\n';
}

inline void write_mesh(const std::string& path, const PolyMesh& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mesh '" + path + "'");
    write_mesh(out, m);
}

inline PolyMesh read_mesh(std::istream& in, const std::string& origin = "<stream>") {
    int line_no = 0;
    auto next_line = [&](std::string& line) {
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    auto fail = [&](const std::string& what) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": " + what);
    };
    auto header = [&](const std::string& word) -> long {
        std::string line, w;
        if (!next_line(line)) fail("expected '" + word + "'");
        std::istringstream ss(line);
        long n = -1;
        ss >> w >> n;
        if (w != word || n < 0) fail("expected '" + word + " <count>'");
        return n;
    };

    std::string line;
    if (!next_line(line) || line.rfind("polymesh", 0) != 0) fail("missing 'polymesh 1' header");
    PolyMesh m;
    const long nv = header("vertices");
    for (long i = 0; i < nv; ++i) {
        if (!next_line(line)) fail("truncated vertex list");
        std::istringstream ss(line);
        double x, y;
        if (!(ss >> x >> y)) fail("bad vertex line");
        m.vertices.emplace_back(x, y);
    }
    const long ne = header("elements");
    for (long e = 0; e < ne; ++e) {
        if (!next_line(line)) fail("truncated element list");
        std::istringstream ss(line);
        int k;
        if (!(ss >> k) || k < 3) fail("element needs at least 3 vertices");
        std::vector<int> loop(k);
        for (int& v : loop)
            if (!(ss >> v) || v < 0 || v >= nv) fail("bad vertex index");
        int tag = 0, p = 1;
        if (ss >> tag) {
            if (!(ss >> p)) p = 1;
        }
        m.elements.push_back(std::move(loop));
        m.region.push_back(tag);
        m.degree.push_back(p);
    }
    if (next_line(line)) {
        std::istringstream ss(line);
        std::string w;
        long nr = -1;
        ss >> w >> nr;
        if (w != "regions" || nr < 0) fail("expected 'regions <count>'");
        m.region_names.assign(nr, "");
        for (long r = 0; r < nr; ++r) {
            if (!next_line(line)) fail("truncated region list");
            std::istringstream rs(line);
            long idx;
            std::string name;
            if (!(rs >> idx >> name) || idx < 0 || idx >= nr) fail("bad region line");
            m.region_names[idx] = name;
        }
    }
    const int max_tag = *std::max_element(m.region.begin(), m.region.end());
    if (max_tag >= static_cast<int>(m.region_names.size())) {
        for (int r = static_cast<int>(m.region_names.size()); r <= max_tag; ++r)
            m.region_names.push_back("region" + std::to_string(r));
    }
    m.build();
    return m;
}

inline PolyMesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mesh file '" + path + "'");
    return read_mesh(in, path);
}

} // namespace amyepi::mesh
