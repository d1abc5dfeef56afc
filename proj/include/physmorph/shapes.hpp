#pragma once

#include <memory>
#include <string>
#include <vector>

#include "physmorph/linalg.hpp"
#include "physmorph/rng.hpp"

namespace physmorph {

struct Aabb {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};
    Vec3 extent() const { return hi - lo; }
    double volume() const {
        Vec3 e = extent();
        return std::max(e.x, 0.0) * std::max(e.y, 0.0) * std::max(e.z, 0.0);
    }
};

// Declarative shape description; the runtime Shape is built from it.
struct ShapeSpec {
    enum class Kind { Sphere, Box, Cylinder, Torus, Capsule, Mesh, Union, Intersection };

    Kind kind = Kind::Sphere;
    Vec3 center{0, 0, 0};
    double radius = 1.0;        // sphere / cylinder / capsule / torus tube
    Vec3 extents{1, 1, 1};      // box half-extents
    double half_height = 1.0;   // cylinder, z axis
    double major_radius = 2.0;  // torus, z axis
    Vec3 p0{0, 0, 0}, p1{0, 0, 1};  // capsule segment
    std::string mesh_path;
    std::vector<ShapeSpec> children;  // union / intersection

    bool operator==(const ShapeSpec& o) const;
};

// Runtime shape with a signed distance field and samplers. Mesh shapes are
// voxelized to an SDF lattice at construction.
class Shape {
public:
    explicit Shape(const ShapeSpec& spec);

    double sdf(const Vec3& p) const;
    Aabb bounds() const { return bounds_; }
    bool contains(const Vec3& p) const { return sdf(p) < 0.0; }

    // Monte-Carlo volume from a fixed-size sample (deterministic per seed).
    double volume(uint64_t seed = 7, int samples = 200000) const;

    // Uniform interior fill by rejection sampling. Throws if the shape has
    // no measurable interior.
    std::vector<Vec3> sample_interior(int n, Rng& rng) const;

    // Area-weighted surface sampling. Returns empty for empty shapes.
    std::vector<Vec3> sample_surface(int n, Rng& rng) const;

    bool is_empty() const;

private:
    struct MeshData;

    double primitive_sdf(const Vec3& p) const;
    Vec3 surface_point(Rng& rng) const;   // one area-weighted primitive sample
    double surface_area_estimate() const;

    ShapeSpec spec_;
    Aabb bounds_;
    std::vector<std::unique_ptr<Shape>> children_;
    std::shared_ptr<MeshData> mesh_;
};

// Minimal OBJ reader (v / f records, fan triangulation).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
};
TriangleMesh load_obj(const std::string& path);

}  // namespace physmorph
