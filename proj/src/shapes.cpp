#include "physmorph/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace physmorph {

bool ShapeSpec::operator==(const ShapeSpec& o) const {
    return kind == o.kind && center == o.center && radius == o.radius &&
           extents == o.extents && half_height == o.half_height &&
           major_radius == o.major_radius && p0 == o.p0 && p1 == o.p1 &&
           mesh_path == o.mesh_path && children == o.children;
}

namespace {

double sd_sphere(const Vec3& p, const Vec3& c, double r) { return norm(p - c) - r; }

double sd_box(const Vec3& p, const Vec3& c, const Vec3& b) {
    Vec3 q{std::abs(p.x - c.x) - b.x, std::abs(p.y - c.y) - b.y, std::abs(p.z - c.z) - b.z};
    Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    return norm(qp) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
}

double sd_cylinder(const Vec3& p, const Vec3& c, double r, double h) {
    double dr = std::hypot(p.x - c.x, p.y - c.y) - r;
    double dz = std::abs(p.z - c.z) - h;
    double ox = std::max(dr, 0.0), oz = std::max(dz, 0.0);
    return std::min(std::max(dr, dz), 0.0) + std::hypot(ox, oz);
}

double sd_torus(const Vec3& p, const Vec3& c, double major, double tube) {
    double qx = std::hypot(p.x - c.x, p.y - c.y) - major;
    return std::hypot(qx, p.z - c.z) - tube;
}

double sd_capsule(const Vec3& p, const Vec3& a, const Vec3& b, double r) {
    Vec3 pa = p - a, ba = b - a;
    double denom = squared_norm(ba);
    double h = denom > 0.0 ? std::clamp(dot(pa, ba) / denom, 0.0, 1.0) : 0.0;
    return norm(pa - ba * h) - r;
}

Vec3 min3(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
Vec3 max3(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

// distance from point to triangle
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return norm(ap);
    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return norm(bp);
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return norm(ap - ab * (d1 / (d1 - d3)));
    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return norm(cp);
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return norm(ap - ac * (d2 / (d2 - d6)));
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return norm(p - (b + (c - b) * w));
    }
    double denom = 1.0 / (va + vb + vc);
    Vec3 q = a + ab * (vb * denom) + ac * (vc * denom);
    return norm(p - q);
}

// near-axis ray vs triangle, for inside/outside parity; the slight
// direction tilt avoids exact hits on lattice-aligned edges
bool ray_x_hits_triangle(const Vec3& o, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 dir{1.0, 7.1823e-5, 3.9217e-5};
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 h = cross(dir, e2);
    double det = dot(e1, h);
    if (std::abs(det) < 1e-14) return false;
    double inv = 1.0 / det;
    Vec3 s = o - a;
    double u = dot(s, h) * inv;
    if (u < 0 || u > 1) return false;
    Vec3 q = cross(s, e1);
    double v = dot(dir, q) * inv;
    if (v < 0 || u + v > 1) return false;
    double t = dot(e2, q) * inv;
    return t > 1e-12;
}

}  // namespace

TriangleMesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_obj: cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x >> v.y >> v.z;
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // "i", "i/t", "i/t/n" forms; 1-based, negatives from the end
                int i = std::stoi(tok.substr(0, tok.find('/')));
                if (i < 0) i = int(mesh.vertices.size()) + i + 1;
                idx.push_back(i - 1);
            }
            for (std::size_t k = 2; k < idx.size(); ++k)
                mesh.triangles.push_back({idx[0], int(idx[k - 1]), int(idx[k])});
        }
    }
    if (mesh.vertices.empty() || mesh.triangles.empty())
        throw std::runtime_error("load_obj: no geometry in " + path);
    return mesh;
}

struct Shape::MeshData {
    TriangleMesh mesh;
    // voxel SDF lattice over the padded bbox
    int res = 48;
    Vec3 lo, hi;
    std::vector<double> sdf;
    std::vector<double> tri_area_cdf;
    double total_area = 0.0;

    double sample(const Vec3& p) const {
        Vec3 e = hi - lo;
        Vec3 t{(p.x - lo.x) / e.x, (p.y - lo.y) / e.y, (p.z - lo.z) / e.z};
        double fi = std::clamp(t.x, 0.0, 1.0) * (res - 1);
        double fj = std::clamp(t.y, 0.0, 1.0) * (res - 1);
        double fk = std::clamp(t.z, 0.0, 1.0) * (res - 1);
        int i = std::min(int(fi), res - 2), j = std::min(int(fj), res - 2),
            k = std::min(int(fk), res - 2);
        double u = fi - i, v = fj - j, w = fk - k;
        auto at = [&](int a, int b, int c) { return sdf[(std::size_t(a) * res + b) * res + c]; };
        double c00 = at(i, j, k) * (1 - u) + at(i + 1, j, k) * u;
        double c10 = at(i, j + 1, k) * (1 - u) + at(i + 1, j + 1, k) * u;
        double c01 = at(i, j, k + 1) * (1 - u) + at(i + 1, j, k + 1) * u;
        double c11 = at(i, j + 1, k + 1) * (1 - u) + at(i + 1, j + 1, k + 1) * u;
        return (c00 * (1 - v) + c10 * v) * (1 - w) + (c01 * (1 - v) + c11 * v) * w;
    }
};

namespace {

void warn_if_not_watertight(const TriangleMesh& mesh, const std::string& path) {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            edge_count[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    bool closed = true;
    for (const auto& [edge, count] : edge_count)
        if (count != 2) { closed = false; break; }
    long chi = long(mesh.vertices.size()) - long(edge_count.size()) + long(mesh.triangles.size());
    if (!closed || chi != 2) {
        std::cerr << "warning: mesh " << path << " may not be watertight"
                  << " (chi=" << chi << ", closed=" << (closed ? "yes" : "no") << ")\n";
    }
}

}  // namespace

Shape::Shape(const ShapeSpec& spec) : spec_(spec) {
    using K = ShapeSpec::Kind;
    switch (spec.kind) {
        case K::Sphere: {
            Vec3 r{spec.radius, spec.radius, spec.radius};
            bounds_ = {spec.center - r, spec.center + r};
            break;
        }
        case K::Box:
            bounds_ = {spec.center - spec.extents, spec.center + spec.extents};
            break;
        case K::Cylinder: {
            Vec3 r{spec.radius, spec.radius, spec.half_height};
            bounds_ = {spec.center - r, spec.center + r};
            break;
        }
        case K::Torus: {
            double rr = spec.major_radius + spec.radius;
            Vec3 r{rr, rr, spec.radius};
            bounds_ = {spec.center - r, spec.center + r};
            break;
        }
        case K::Capsule: {
            Vec3 r{spec.radius, spec.radius, spec.radius};
            bounds_ = {min3(spec.p0, spec.p1) - r, max3(spec.p0, spec.p1) + r};
            break;
        }
        case K::Mesh: {
            mesh_ = std::make_shared<MeshData>();
            mesh_->mesh = load_obj(spec.mesh_path);
            warn_if_not_watertight(mesh_->mesh, spec.mesh_path);
            const auto& m = mesh_->mesh;
            Vec3 lo = m.vertices[0], hi = m.vertices[0];
            for (const Vec3& v : m.vertices) {
                lo = min3(lo, v);
                hi = max3(hi, v);
            }
            Vec3 pad = (hi - lo) * 0.05 + Vec3{1e-3, 1e-3, 1e-3};
            mesh_->lo = lo - pad;
            mesh_->hi = hi + pad;
            bounds_ = {lo, hi};

            double acc = 0.0;
            mesh_->tri_area_cdf.reserve(m.triangles.size());
            for (const auto& t : m.triangles) {
                acc += triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
                mesh_->tri_area_cdf.push_back(acc);
            }
            mesh_->total_area = acc;

            // voxelize: unsigned distance + parity sign
            int res = mesh_->res;
            mesh_->sdf.resize(std::size_t(res) * res * res);
            Vec3 e = mesh_->hi - mesh_->lo;
            for (int i = 0; i < res; ++i)
                for (int j = 0; j < res; ++j)
                    for (int k = 0; k < res; ++k) {
                        Vec3 p = mesh_->lo + Vec3{e.x * i / (res - 1.0), e.y * j / (res - 1.0),
                                                  e.z * k / (res - 1.0)};
                        double dmin = 1e300;
                        int crossings = 0;
                        for (const auto& t : m.triangles) {
                            const Vec3 &a = m.vertices[t[0]], &b = m.vertices[t[1]],
                                       &c = m.vertices[t[2]];
                            dmin = std::min(dmin, point_triangle_distance(p, a, b, c));
                            if (ray_x_hits_triangle(p, a, b, c)) ++crossings;
                        }
                        mesh_->sdf[(std::size_t(i) * res + j) * res + k] =
                            (crossings % 2 == 1) ? -dmin : dmin;
                    }
            break;
        }
        case K::Union:
        case K::Intersection: {
            if (spec.children.empty())
                throw std::invalid_argument("Shape: composite needs at least one child");
            children_.reserve(spec.children.size());
            for (const auto& c : spec.children) children_.push_back(std::make_unique<Shape>(c));
            bounds_ = children_[0]->bounds();
            for (std::size_t i = 1; i < children_.size(); ++i) {
                Aabb b = children_[i]->bounds();
                if (spec.kind == K::Union) {
                    bounds_.lo = min3(bounds_.lo, b.lo);
                    bounds_.hi = max3(bounds_.hi, b.hi);
                } else {
                    bounds_.lo = max3(bounds_.lo, b.lo);
                    bounds_.hi = min3(bounds_.hi, b.hi);
                }
            }
            break;
        }
    }
}

double Shape::primitive_sdf(const Vec3& p) const {
    using K = ShapeSpec::Kind;
    switch (spec_.kind) {
        case K::Sphere: return sd_sphere(p, spec_.center, spec_.radius);
        case K::Box: return sd_box(p, spec_.center, spec_.extents);
        case K::Cylinder: return sd_cylinder(p, spec_.center, spec_.radius, spec_.half_height);
        case K::Torus: return sd_torus(p, spec_.center, spec_.major_radius, spec_.radius);
        case K::Capsule: return sd_capsule(p, spec_.p0, spec_.p1, spec_.radius);
        case K::Mesh: return mesh_->sample(p);
        default: return 1e300;
    }
}

double Shape::sdf(const Vec3& p) const {
    using K = ShapeSpec::Kind;
    if (spec_.kind == K::Union) {
        double d = 1e300;
        for (const auto& c : children_) d = std::min(d, c->sdf(p));
        return d;
    }
    if (spec_.kind == K::Intersection) {
        double d = -1e300;
        for (const auto& c : children_) d = std::max(d, c->sdf(p));
        return d;
    }
    return primitive_sdf(p);
}

bool Shape::is_empty() const {
    using K = ShapeSpec::Kind;
    switch (spec_.kind) {
        case K::Sphere:
        case K::Capsule:
        case K::Torus: return spec_.radius <= 0.0;
        case K::Box: return spec_.extents.x <= 0 || spec_.extents.y <= 0 || spec_.extents.z <= 0;
        case K::Cylinder: return spec_.radius <= 0 || spec_.half_height <= 0;
        case K::Mesh: return mesh_->total_area <= 0.0;
        case K::Union: {
            for (const auto& c : children_)
                if (!c->is_empty()) return false;
            return true;
        }
        case K::Intersection: return volume(3, 20000) <= 0.0;
    }
    return true;
}

double Shape::volume(uint64_t seed, int samples) const {
    Aabb b = bounds();
    double bv = b.volume();
    if (bv <= 0.0) return 0.0;
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 1);
    long hits = 0;
    for (int i = 0; i < samples; ++i) {
        Vec3 p{rng.uniform(b.lo.x, b.hi.x), rng.uniform(b.lo.y, b.hi.y),
               rng.uniform(b.lo.z, b.hi.z)};
        if (sdf(p) < 0.0) ++hits;
    }
    return bv * double(hits) / samples;
}

std::vector<Vec3> Shape::sample_interior(int n, Rng& rng) const {
    Aabb b = bounds();
    std::vector<Vec3> out;
    out.reserve(n);
    long attempts = 0;
    const long max_attempts = 1000L * std::max(n, 1) + 100000;
    while (int(out.size()) < n) {
        if (++attempts > max_attempts)
            throw std::runtime_error("sample_interior: shape appears to have no interior");
        Vec3 p{rng.uniform(b.lo.x, b.hi.x), rng.uniform(b.lo.y, b.hi.y),
               rng.uniform(b.lo.z, b.hi.z)};
        if (sdf(p) < 0.0) out.push_back(p);
    }
    return out;
}

double Shape::surface_area_estimate() const {
    using K = ShapeSpec::Kind;
    const double pi = M_PI;
    switch (spec_.kind) {
        case K::Sphere: return 4 * pi * spec_.radius * spec_.radius;
        case K::Box: {
            const Vec3& e = spec_.extents;
            return 8 * (e.x * e.y + e.y * e.z + e.x * e.z);
        }
        case K::Cylinder:
            return 2 * pi * spec_.radius * (2 * spec_.half_height) +
                   2 * pi * spec_.radius * spec_.radius;
        case K::Torus: return 4 * pi * pi * spec_.major_radius * spec_.radius;
        case K::Capsule:
            return 2 * pi * spec_.radius * norm(spec_.p1 - spec_.p0) +
                   4 * pi * spec_.radius * spec_.radius;
        case K::Mesh: return mesh_->total_area;
        default: {
            double s = 0.0;
            for (const auto& c : children_) s += c->surface_area_estimate();
            return s;
        }
    }
}

Vec3 Shape::surface_point(Rng& rng) const {
    using K = ShapeSpec::Kind;
    const double pi = M_PI;
    switch (spec_.kind) {
        case K::Sphere: return spec_.center + rng.unit_vector() * spec_.radius;
        case K::Box: {
            const Vec3& e = spec_.extents;
            double areas[3] = {e.y * e.z, e.x * e.z, e.x * e.y};  // per axis pair
            double total = areas[0] + areas[1] + areas[2];
            double pick = rng.uniform() * total;
            int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
            Vec3 p;
            p[axis] = rng.uniform() < 0.5 ? -e[axis] : e[axis];
            int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
            p[a1] = rng.uniform(-e[a1], e[a1]);
            p[a2] = rng.uniform(-e[a2], e[a2]);
            return spec_.center + p;
        }
        case K::Cylinder: {
            double side = 2 * pi * spec_.radius * 2 * spec_.half_height;
            double caps = 2 * pi * spec_.radius * spec_.radius;
            double theta = rng.uniform() * 2 * pi;
            if (rng.uniform() * (side + caps) < side) {
                return spec_.center + Vec3{spec_.radius * std::cos(theta),
                                           spec_.radius * std::sin(theta),
                                           rng.uniform(-spec_.half_height, spec_.half_height)};
            }
            double r = spec_.radius * std::sqrt(rng.uniform());
            double z = rng.uniform() < 0.5 ? -spec_.half_height : spec_.half_height;
            return spec_.center + Vec3{r * std::cos(theta), r * std::sin(theta), z};
        }
        case K::Torus: {
            // rejection on the minor angle keeps the sampling area-weighted
            for (;;) {
                double theta = rng.uniform() * 2 * pi;
                double phi = rng.uniform() * 2 * pi;
                double w = (spec_.major_radius + spec_.radius * std::cos(phi)) /
                           (spec_.major_radius + spec_.radius);
                if (rng.uniform() > w) continue;
                double rr = spec_.major_radius + spec_.radius * std::cos(phi);
                return spec_.center + Vec3{rr * std::cos(theta), rr * std::sin(theta),
                                           spec_.radius * std::sin(phi)};
            }
        }
        case K::Capsule: {
            Vec3 axis = spec_.p1 - spec_.p0;
            double len = norm(axis);
            Vec3 dir = len > 0 ? axis / len : Vec3{0, 0, 1};
            // frame around dir
            Vec3 tmp = std::abs(dir.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
            Vec3 u = normalized(cross(dir, tmp));
            Vec3 v = cross(dir, u);
            double side = 2 * pi * spec_.radius * len;
            double caps = 4 * pi * spec_.radius * spec_.radius;
            if (rng.uniform() * (side + caps) < side) {
                double theta = rng.uniform() * 2 * pi;
                double t = rng.uniform();
                return spec_.p0 + axis * t +
                       (u * std::cos(theta) + v * std::sin(theta)) * spec_.radius;
            }
            Vec3 d = rng.unit_vector();
            return (dot(d, dir) >= 0 ? spec_.p1 : spec_.p0) + d * spec_.radius;
        }
        case K::Mesh: {
            double pick = rng.uniform() * mesh_->total_area;
            auto it = std::lower_bound(mesh_->tri_area_cdf.begin(), mesh_->tri_area_cdf.end(), pick);
            std::size_t t = std::min<std::size_t>(it - mesh_->tri_area_cdf.begin(),
                                                  mesh_->mesh.triangles.size() - 1);
            const auto& tri = mesh_->mesh.triangles[t];
            double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
            const Vec3 &a = mesh_->mesh.vertices[tri[0]], &b = mesh_->mesh.vertices[tri[1]],
                       &c = mesh_->mesh.vertices[tri[2]];
            return a * (1 - r1) + b * (r1 * (1 - r2)) + c * (r1 * r2);
        }
        default: {
            // pick a child by surface area; caller rejects hidden points
            double total = surface_area_estimate();
            double pick = rng.uniform() * total;
            for (const auto& c : children_) {
                double a = c->surface_area_estimate();
                if (pick < a) return c->surface_point(rng);
                pick -= a;
            }
            return children_.back()->surface_point(rng);
        }
    }
}

std::vector<Vec3> Shape::sample_surface(int n, Rng& rng) const {
    std::vector<Vec3> out;
    if (n <= 0 || is_empty()) return out;
    out.reserve(n);
    const bool composite =
        spec_.kind == ShapeSpec::Kind::Union || spec_.kind == ShapeSpec::Kind::Intersection;
    long attempts = 0;
    const long max_attempts = 200L * n + 100000;
    while (int(out.size()) < n && attempts < max_attempts) {
        ++attempts;
        Vec3 p = surface_point(rng);
        if (composite && std::abs(sdf(p)) > 1e-7) continue;  // swallowed by another child
        out.push_back(p);
    }
    return out;
}

}  // namespace physmorph
