#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "physmorph/metrics.hpp"
#include "physmorph/rng.hpp"

using namespace physmorph;

namespace {

// dyadic-rational cloud so that +1.0 translations stay exact in floating point
std::vector<Vec3> snapped_cloud(std::size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec3> out(n);
    for (auto& v : out) {
        v = Vec3{double(rng.below(4096)) / 4096.0, double(rng.below(4096)) / 4096.0,
                 double(rng.below(4096)) / 4096.0};
    }
    return out;
}

double brute_chamfer(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    Vec3 lo = p[0], hi = p[0];
    auto grow = [&](const Vec3& v) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    };
    for (const Vec3& v : p) grow(v);
    for (const Vec3& v : q) grow(v);
    double diag = norm(hi - lo);

    double sum_pq = 0.0, sum_qp = 0.0;
    for (const Vec3& a : p) {
        double best = 1e300;
        for (const Vec3& b : q) {
            Vec3 d = a - b;
            double dd = d.x * d.x + d.y * d.y + d.z * d.z;
            if (dd < best) best = dd;
        }
        sum_pq += best;
    }
    for (const Vec3& a : q) {
        double best = 1e300;
        for (const Vec3& b : p) {
            Vec3 d = a - b;
            double dd = d.x * d.x + d.y * d.y + d.z * d.z;
            if (dd < best) best = dd;
        }
        sum_qp += best;
    }
    double total = sum_pq / double(p.size()) + sum_qp / double(q.size());
    return total == 0.0 ? 0.0 : total / diag;
}

}  // namespace

TEST_CASE("chamfer hand example and identity") {
    std::vector<Vec3> p{{0, 0, 0}};
    std::vector<Vec3> q{{1, 0, 0}};
    // bbox diag 1, both directed means 1 -> 2
    CHECK(chamfer(p, q) == doctest::Approx(2.0));
    CHECK(chamfer(p, p) == 0.0);

    auto cloud = snapped_cloud(100, 3);
    CHECK(chamfer(cloud, cloud) == 0.0);
}

TEST_CASE("chamfer equals brute force exactly on 500-point clouds") {
    auto p = snapped_cloud(500, 5);
    auto q = snapped_cloud(500, 7);
    CHECK(chamfer(p, q) == brute_chamfer(p, q));
    CHECK(chamfer(p, q) == chamfer(q, p));  // symmetric by construction
}

TEST_CASE("chamfer is exactly invariant under dyadic translation") {
    auto p = snapped_cloud(300, 11);
    auto q = snapped_cloud(280, 13);
    double base = chamfer(p, q);
    Vec3 t{1.0, 2.0, -4.0};
    auto pt = p;
    auto qt = q;
    for (auto& v : pt) v += t;
    for (auto& v : qt) v += t;
    CHECK(chamfer(pt, qt) == base);
}

TEST_CASE("chamfer rejects empty sets and is non-negative") {
    std::vector<Vec3> p{{0, 0, 0}}, empty;
    CHECK_THROWS(chamfer(p, empty));
    Rng rng(17);
    for (int t = 0; t < 20; ++t) {
        auto a = snapped_cloud(40, 100 + t);
        auto b = snapped_cloud(30, 200 + t);
        CHECK(chamfer(a, b) >= 0.0);
    }
}

TEST_CASE("sample_surface: sphere mean radius, triangle plane, determinism") {
    ShapeSpec spec;
    spec.kind = ShapeSpec::Kind::Sphere;
    spec.radius = 1.0;
    Shape sphere(spec);
    PointSample s = sample_surface(sphere, 100000, 3);
    double acc = 0.0;
    for (const Vec3& p : s.points) acc += norm(p);
    CHECK(std::abs(acc / s.points.size() - 1.0) < 1e-3);

    PointSample again = sample_surface(sphere, 1000, 9);
    PointSample again2 = sample_surface(sphere, 1000, 9);
    for (std::size_t i = 0; i < again.points.size(); ++i)
        CHECK(again.points[i] == again2.points[i]);

    // single triangle mesh: all samples coplanar
    {
        FILE* f = fopen("/tmp/physmorph_tri.obj", "w");
        fputs("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", f);
        fclose(f);
    }
    ShapeSpec tri;
    tri.kind = ShapeSpec::Kind::Mesh;
    tri.mesh_path = "/tmp/physmorph_tri.obj";
    Shape tri_shape(tri);
    PointSample ts = sample_surface(tri_shape, 500, 5);
    for (const Vec3& p : ts.points) CHECK(std::abs(p.z) < 1e-12);

    ShapeSpec none;
    none.kind = ShapeSpec::Kind::Sphere;
    none.radius = 0.0;
    CHECK_THROWS(sample_surface(Shape(none), 100, 3));
}

TEST_CASE("multiview shell finds the outside of a two-layer cloud") {
    // nested spheres of gaussians: outer layer visible, inner hidden
    std::vector<RenderGaussian> cloud;
    Rng rng(21);
    for (int i = 0; i < 400; ++i) {
        RenderGaussian g;
        Vec3 dir = rng.unit_vector();
        bool outer = i % 2 == 0;
        g.mu = dir * (outer ? 3.0 : 1.0);
        g.cov = Mat3::identity() * 0.25;
        g.opacity = 0.95;
        cloud.push_back(g);
    }
    CameraModel cam;  // default desk camera
    RenderParams params;
    std::vector<double> vis = multiview_visibility(cloud, cam, params);
    int outer_visible = 0, inner_visible = 0;
    for (std::size_t k = 0; k < cloud.size(); ++k) {
        if (vis[k] > 0.5) (k % 2 == 0 ? outer_visible : inner_visible)++;
    }
    CHECK(outer_visible > 150);
    CHECK(inner_visible < 40);

    PointSample shell = sample_cloud_shell(cloud, vis, 500, 3);
    int on_outer = 0;
    for (const Vec3& p : shell.points)
        if (norm(p) > 2.0) ++on_outer;
    CHECK(on_outer > 450);
}

TEST_CASE("stats: counts, identity anisotropy, histogram total") {
    std::vector<RenderGaussian> gs(10);
    for (auto& g : gs) g.cov = Mat3::identity() * 0.01;
    GaussianStats st = stats(gs, 4);
    CHECK(st.anchor_count == 4);
    CHECK(st.render_count == 10);
    CHECK(st.mean_anisotropy == doctest::Approx(1.0));
    int total = 0;
    for (int b : st.histogram) total += b;
    CHECK(total == 10);

    gs[0].cov = Mat3::diag(4, 1, 1) * 0.01;
    GaussianStats st2 = stats(gs, 4);
    CHECK(st2.mean_anisotropy == doctest::Approx((9.0 + 2.0) / 10.0));
}
