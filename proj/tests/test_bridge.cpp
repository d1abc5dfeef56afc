#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "physmorph/bridge.hpp"
#include "physmorph/parallel.hpp"
#include "physmorph/rng.hpp"

using namespace physmorph;

namespace {

std::vector<Vec3> random_points(std::size_t n, uint64_t seed, double scale = 5.0) {
    Rng rng(seed);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3{rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                                 rng.uniform(-scale, scale)};
    return pts;
}

std::vector<Mat3> random_fs(std::size_t n, uint64_t seed, double jitter = 0.3) {
    Rng rng(seed);
    std::vector<Mat3> fs(n, Mat3::identity());
    for (auto& f : fs)
        for (double& e : f.m) e += rng.uniform(-jitter, jitter);
    return fs;
}

double rel_err(double a, double b) {
    double d = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / d;
}

}  // namespace

TEST_CASE("deformation magnitude") {
    CHECK(deformation_magnitude(Mat3::identity()) == 0.0);
    CHECK(deformation_magnitude(Mat3::diag(2, 1, 1)) == doctest::Approx(1.0));
    CHECK(deformation_magnitude(Mat3::diag(0.5, 1, 1)) == doctest::Approx(0.5));
}

TEST_CASE("allocate_children hand cases") {
    CHECK(allocate_children({1, 1, 2}, 8, 20, 1e-4) == std::vector<int>{2, 2, 4});
    CHECK(allocate_children({100, 1}, 40, 20, 1e-4) == std::vector<int>{20, 0});

    // zero deformation: uniform fallback with remainder to lowest indices
    auto uniform = allocate_children({0, 0, 0}, 8, 20, 1e-4);
    CHECK(uniform == std::vector<int>{3, 3, 2});
    int total = uniform[0] + uniform[1] + uniform[2];
    CHECK(total <= 8);
}

TEST_CASE("allocate_children caps and budget invariants") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> d(20);
        for (auto& v : d) v = rng.uniform(0.0, 2.0);
        int budget = int(rng.below(200));
        auto counts = allocate_children(d, budget, 20, 1e-4);
        int sum = 0;
        for (int c : counts) {
            CHECK(c <= 20);
            CHECK(c >= 0);
            sum += c;
        }
        CHECK(sum <= budget);
    }
}

TEST_CASE("local_spacing hand geometries") {
    // unit-spaced axis triple, middle point, k=2 -> 1
    std::vector<Vec3> triple{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    auto h = local_spacing(triple, 2, 1e-6);
    CHECK(h[1] == doctest::Approx(1.0));

    // interior point of a cubic lattice with spacing a, k=6 -> a
    double a = 0.7;
    std::vector<Vec3> lattice;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) lattice.push_back(Vec3{i * a, j * a, k * a});
    auto hl = local_spacing(lattice, 6, 1e-6);
    CHECK(hl[13] == doctest::Approx(a));  // center of the 3x3x3 block

    // coincident points fall back to the floor
    std::vector<Vec3> same(5, Vec3{1, 2, 3});
    auto hs = local_spacing(same, 3, 1e-6);
    for (double v : hs) CHECK(v == doctest::Approx(1e-6));
}

TEST_CASE("spawn_children: zero jitter collapses onto parents, fixed seed repeats") {
    auto anchors = random_points(30, 11);
    auto fs = random_fs(30, 12);
    BridgeParams p;
    p.m_child = 60;
    p.jitter = 0.0;
    SubdivisionPlan plan = make_plan(anchors, fs, p, 99);
    auto child = spawn_children(plan, anchors);
    for (std::size_t c = 0; c < child.size(); ++c)
        CHECK(norm(child[c] - anchors[plan.children[c].parent]) == 0.0);

    p.jitter = 0.15;
    SubdivisionPlan p1 = make_plan(anchors, fs, p, 7);
    SubdivisionPlan p2 = make_plan(anchors, fs, p, 7);
    REQUIRE(p1.children.size() == p2.children.size());
    for (std::size_t c = 0; c < p1.children.size(); ++c) {
        CHECK(p1.children[c].parent == p2.children[c].parent);
        CHECK(p1.children[c].offset == p2.children[c].offset);
    }
}

TEST_CASE("spawn_children jitter directions have near-zero mean") {
    std::vector<Vec3> anchors{{0, 0, 0}};
    std::vector<Mat3> fs{Mat3::diag(2, 1, 1)};  // nonzero deformation
    BridgeParams p;
    p.m_child = 100000;
    p.child_cap = 100000;
    p.k_spacing = 1;
    p.jitter = 0.1;
    p.uniform_mix = 0.0;
    SubdivisionPlan plan = make_plan(anchors, fs, p, 5);
    REQUIRE(plan.children.size() == 100000);
    double h = plan.spacing[0];
    Vec3 mean{};
    for (const auto& c : plan.children) mean += c.offset;
    mean = mean / double(plan.children.size());
    CHECK(norm(mean) < 3.0 * p.jitter * h / std::sqrt(100000.0));
}

TEST_CASE("knn equals brute force on 200 random points") {
    auto pts = random_points(200, 21);
    auto queries = random_points(64, 22);
    const int k = 7;
    KnnResult res = knn(pts, queries, k);

    for (std::size_t q = 0; q < queries.size(); ++q) {
        // brute force: sort by (dist^2, index)
        std::vector<std::pair<double, int>> all;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            Vec3 d = pts[i] - queries[q];
            all.push_back({d.x * d.x + d.y * d.y + d.z * d.z, int(i)});
        }
        std::sort(all.begin(), all.end());
        for (int j = 0; j < k; ++j) CHECK(res.indices[q * k + j] == all[j].second);
    }
}

TEST_CASE("knn exact hit dominates the weights") {
    std::vector<Vec3> pts{{0, 0, 0}, {0.5, 0, 0}, {0, 1, 0}, {2, 2, 2}};
    std::vector<Vec3> q{{0, 0, 0}};
    KnnResult res = knn(pts, q, 3);
    CHECK(res.indices[0] == 0);
    CHECK(res.weights[0] > 0.999);
    double sum = res.weights[0] + res.weights[1] + res.weights[2];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("knn edge cases") {
    auto pts = random_points(10, 31);
    KnnResult res = knn(pts, pts, 10);  // k = N returns everything
    for (int j = 0; j < 10; ++j) {
        std::vector<int> got(res.indices.begin() + j * 10, res.indices.begin() + (j + 1) * 10);
        std::sort(got.begin(), got.end());
        for (int i = 0; i < 10; ++i) CHECK(got[i] == i);
    }
    CHECK_THROWS(knn(pts, pts, 11));
}

TEST_CASE("interpolate_F: constant field, symmetry, linearity") {
    BridgeParams p;
    p.k_coarse = 4;
    p.k_fine = 2;

    // constant anchor field reproduces exactly
    auto anchors = random_points(12, 41);
    Mat3 f0 = Mat3::diag(1.3, 0.7, 1.1);
    std::vector<Mat3> fs(12, f0);
    auto queries = random_points(20, 42, 4.0);
    InterpFootprint fp = build_footprint(anchors, queries, p);
    std::vector<Mat3> fc, ff;
    interpolate_F(fs, fp, fc, ff);
    for (std::size_t j = 0; j < queries.size(); ++j) {
        CHECK(frobenius_norm(fc[j] - f0) < 1e-12);
        CHECK(frobenius_norm(ff[j] - f0) < 1e-12);
    }

    // two anchors at equal distance: average of A and B
    std::vector<Vec3> two{{-1, 0, 0}, {1, 0, 0}};
    std::vector<Mat3> ab{Mat3::diag(2, 2, 2), Mat3::diag(4, 4, 4)};
    BridgeParams p2;
    p2.k_coarse = 2;
    p2.k_fine = 2;
    InterpFootprint fp2 = build_footprint(two, {{0, 0.5, 0}}, p2);
    std::vector<Mat3> c2, f2;
    interpolate_F(ab, fp2, c2, f2);
    CHECK(frobenius_norm(c2[0] - Mat3::diag(3, 3, 3)) < 1e-12);

    // linearity in the anchor field
    auto fsr = random_fs(12, 43);
    std::vector<Mat3> fs2(12);
    for (int i = 0; i < 12; ++i) fs2[i] = fsr[i] * 2.5;
    std::vector<Mat3> ca, fa, cb, fb;
    interpolate_F(fsr, fp, ca, fa);
    interpolate_F(fs2, fp, cb, fb);
    for (std::size_t j = 0; j < queries.size(); ++j)
        CHECK(frobenius_norm(cb[j] - ca[j] * 2.5) < 1e-9);
}

TEST_CASE("footprint weights: non-negative partition of unity") {
    BridgeParams p;
    auto anchors = random_points(50, 51);
    auto fs = random_fs(50, 52);
    BridgeState st = build_bridge(anchors, fs, p, 3);
    const auto& fp = st.footprint;
    for (std::size_t j = 0; j < fp.render_count; ++j) {
        double sc = 0.0, sf = 0.0;
        for (int s = 0; s < fp.k_coarse; ++s) {
            CHECK(fp.coarse_w[j * fp.k_coarse + s] >= 0.0);
            sc += fp.coarse_w[j * fp.k_coarse + s];
        }
        for (int s = 0; s < fp.k_fine; ++s) {
            CHECK(fp.fine_w[j * fp.k_fine + s] >= 0.0);
            sf += fp.fine_w[j * fp.k_fine + s];
        }
        CHECK(std::abs(sc - 1.0) < 1e-12);
        CHECK(std::abs(sf - 1.0) < 1e-12);
    }
}

TEST_CASE("blend hand cases") {
    BridgeParams p;
    Mat3 f = Mat3::diag(1.2, 0.9, 1.0);

    // equal deformation on both scales: sigma(0) = 0.5 inside the clamp
    BlendResult b = blend(f, f, p);
    CHECK(b.alpha == doctest::Approx(0.5));
    CHECK(frobenius_norm(b.f_final - f) < 1e-12);

    // saturation toward alpha_max when the coarse scale deforms much more
    BridgeParams tight = p;
    tight.tau = 1e-3;
    BlendResult sat = blend(Mat3::diag(3, 1, 1), Mat3::identity(), tight);
    CHECK(sat.alpha == doctest::Approx(p.alpha_max));

    // identical inputs pass through for any alpha
    BlendResult same = blend(Mat3::diag(0.5, 0.5, 0.5), Mat3::diag(0.5, 0.5, 0.5), p);
    CHECK(frobenius_norm(same.f_final - Mat3::diag(0.5, 0.5, 0.5)) < 1e-12);

    CHECK_THROWS(blend(f, f, BridgeParams{.tau = 0.0}));
}

TEST_CASE("bridge invariants on a random build") {
    BridgeParams p;
    p.m_child = 500;
    auto anchors = random_points(60, 61);
    auto fs = random_fs(60, 62);
    BridgeState st = build_bridge(anchors, fs, p, 17);

    int total = 0;
    for (int c : st.plan.counts) {
        CHECK(c <= p.child_cap);
        total += c;
    }
    CHECK(total <= p.m_child);
    for (double a : st.alpha) {
        CHECK(a >= p.alpha_min);
        CHECK(a <= p.alpha_max);
    }

    // bit-identical rebuild from the same seed
    BridgeState st2 = build_bridge(anchors, fs, p, 17);
    REQUIRE(st.render_x.size() == st2.render_x.size());
    for (std::size_t j = 0; j < st.render_x.size(); ++j) CHECK(st.render_x[j] == st2.render_x[j]);
    for (std::size_t j = 0; j < st.f_final.size(); ++j)
        CHECK(st.f_final[j].m == st2.f_final[j].m);
}

TEST_CASE("scatter_gradients: zero in, identity footprint") {
    BridgeParams p;
    auto anchors = random_points(10, 71);
    auto fs = random_fs(10, 72);
    BridgeState st = build_bridge(anchors, fs, p, 5);
    AnchorGradients g = scatter_gradients(st, std::vector<Mat3>(st.render_count(), Mat3::zero()),
                                          std::vector<Vec3>(st.render_count(), Vec3{}));
    for (const auto& m : g.F) CHECK(frobenius_norm(m) == 0.0);
    for (const auto& v : g.x) CHECK(norm(v) == 0.0);

    // one anchor, one child: the child's mean gradient lands unchanged
    BridgeParams p1;
    p1.m_child = 1;
    p1.uniform_mix = 0.0;
    std::vector<Vec3> one{{0, 0, 0}};
    std::vector<Mat3> onef{Mat3::diag(2, 1, 1)};
    BridgeState st1 = build_bridge(one, onef, p1, 9);
    REQUIRE(st1.render_count() == 2);
    std::vector<Vec3> gmu(2, Vec3{});
    gmu[1] = Vec3{0.5, -1.0, 2.0};
    AnchorGradients g1 = scatter_gradients(st1, std::vector<Mat3>(2, Mat3::zero()), gmu);
    CHECK(g1.x[0] == gmu[1]);
}

TEST_CASE("scatter_gradients is the exact adjoint of the forward tail") {
    BridgeParams p;
    p.m_child = 40;
    p.k_coarse = 6;
    p.k_fine = 3;
    auto anchors = random_points(15, 81);
    auto fs = random_fs(15, 82);
    BridgeState st = build_bridge(anchors, fs, p, 23);
    const std::size_t m = st.render_count();

    Rng rng(83);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Mat3> gout(m);
        for (auto& g : gout)
            for (double& e : g.m) e = rng.uniform(-1, 1);
        std::vector<Mat3> tangent(anchors.size());
        for (auto& v : tangent)
            for (double& e : v.m) e = rng.uniform(-1, 1);

        // forward-mode JVP through interpolation and blend (independent route)
        const auto& fp = st.footprint;
        double lhs = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            Mat3 fc_dot = Mat3::zero(), ff_dot = Mat3::zero();
            for (int s = 0; s < fp.k_coarse; ++s)
                fc_dot += tangent[fp.coarse_idx[j * fp.k_coarse + s]] * fp.coarse_w[j * fp.k_coarse + s];
            for (int s = 0; s < fp.k_fine; ++s)
                ff_dot += tangent[fp.fine_idx[j * fp.k_fine + s]] * fp.fine_w[j * fp.k_fine + s];

            double det_c = st.f_coarse[j].determinant();
            double det_f = st.f_fine[j].determinant();
            double dc = std::abs(det_c - 1.0), df = std::abs(det_f - 1.0);
            double z = (dc - df) / p.tau;
            double s = 1.0 / (1.0 + std::exp(-z));
            double a = st.alpha[j];
            double da_dz = (s > p.alpha_min && s < p.alpha_max) ? s * (1.0 - s) : 0.0;
            double dc_dot = (det_c > 1.0 ? 1.0 : (det_c < 1.0 ? -1.0 : 0.0)) *
                            frobenius_dot(st.f_coarse[j].cofactor(), fc_dot);
            double df_dot = (det_f > 1.0 ? 1.0 : (det_f < 1.0 ? -1.0 : 0.0)) *
                            frobenius_dot(st.f_fine[j].cofactor(), ff_dot);
            double a_dot = da_dz * (dc_dot - df_dot) / p.tau;
            Mat3 ffinal_dot = fc_dot * a + ff_dot * (1.0 - a) +
                              (st.f_coarse[j] - st.f_fine[j]) * a_dot;
            lhs += frobenius_dot(gout[j], ffinal_dot);
        }

        AnchorGradients adj =
            scatter_gradients(st, gout, std::vector<Vec3>(m, Vec3{}));
        double rhs = 0.0;
        for (std::size_t i = 0; i < anchors.size(); ++i) rhs += frobenius_dot(adj.F[i], tangent[i]);

        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("scatter_gradients matches finite differences of the composed map") {
    BridgeParams p;
    p.m_child = 30;
    p.k_coarse = 5;
    p.k_fine = 2;
    auto anchors = random_points(12, 91);
    auto fs = random_fs(12, 92);
    BridgeState st = build_bridge(anchors, fs, p, 31);
    const std::size_t m = st.render_count();

    Rng rng(93);
    std::vector<Mat3> w(m);
    for (auto& g : w)
        for (double& e : g.m) e = rng.uniform(-1, 1);

    auto loss = [&](const std::vector<Mat3>& anchor_f) {
        BridgeState tmp = st;
        bridge_forward(tmp, anchor_f);
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += frobenius_dot(w[j], tmp.f_final[j]);
        return acc;
    };

    AnchorGradients adj = scatter_gradients(st, w, std::vector<Vec3>(m, Vec3{}));
    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        int i = int(rng.below(anchors.size()));
        int e = int(rng.below(9));
        auto fp = fs, fm = fs;
        fp[i].m[e] += h;
        fm[i].m[e] -= h;
        double fd = (loss(fp) - loss(fm)) / (2 * h);
        CHECK(rel_err(fd, adj.F[i].m[e]) < 1e-4);
    }
}

TEST_CASE("bridge scatter is bit-identical in serial and parallel modes") {
    BridgeParams p;
    p.m_child = 200;
    auto anchors = random_points(40, 95);
    auto fs = random_fs(40, 96);
    BridgeState st = build_bridge(anchors, fs, p, 13);
    Rng rng(97);
    std::vector<Mat3> gf(st.render_count());
    std::vector<Vec3> gm(st.render_count());
    for (auto& g : gf)
        for (double& e : g.m) e = rng.uniform(-1, 1);
    for (auto& v : gm) v = rng.normal3();

    set_thread_count(1);
    AnchorGradients a = scatter_gradients(st, gf, gm);
    set_thread_count(4);
    AnchorGradients b = scatter_gradients(st, gf, gm);
    set_thread_count(1);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        CHECK(a.F[i].m == b.F[i].m);
        CHECK(a.x[i] == b.x[i]);
    }
}
