#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "physmorph/covariance.hpp"
#include "physmorph/rng.hpp"

using namespace physmorph;

namespace {

Mat3 random_f(Rng& rng, double jitter) {
    Mat3 f = Mat3::identity();
    for (double& e : f.m) e += rng.uniform(-jitter, jitter);
    return f;
}

double rel_err(double a, double b) {
    double d = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / d;
}

double min_gap(const Vec3& s) {
    return std::min(std::abs(s.x - s.y), std::min(std::abs(s.y - s.z), std::abs(s.x - s.z)));
}

}  // namespace

TEST_CASE("build_covariance identity and rotation give s^2 I") {
    double s = 0.055;
    // the soft clamp is identity only to ~1e-7 at sigma = 1
    Mat3 cov = build_covariance(Mat3::identity(), s);
    CHECK(frobenius_norm(cov - Mat3::identity() * (s * s)) < 1e-8);

    Mat3 r = axis_rotation(1, 1.1) * axis_rotation(2, -0.4);
    cov = build_covariance(r, s);
    CHECK(frobenius_norm(cov - Mat3::identity() * (s * s)) < 1e-8);
}

TEST_CASE("build_covariance hand value for a diagonal stretch") {
    // F = diag(2,1,1), s = 0.055: clamp inactive at 2 and ~identity at 1
    double s = 0.055;
    Mat3 cov = build_covariance(Mat3::diag(2, 1, 1), s);
    CHECK(cov(0, 0) == doctest::Approx(4 * s * s).epsilon(1e-3));
    CHECK(cov(1, 1) == doctest::Approx(s * s).epsilon(1e-3));
    CHECK(cov(2, 2) == doctest::Approx(s * s).epsilon(1e-3));
    CHECK(std::abs(cov(0, 1)) < 1e-12);
}

TEST_CASE("rotation invariance: build_covariance(R F) == build_covariance(F)") {
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
        Mat3 f = random_f(rng, 0.5);
        if (f.determinant() < 0.2) continue;
        Mat3 r = axis_rotation(0, rng.uniform(0, 6.28)) * axis_rotation(1, rng.uniform(0, 6.28)) *
                 axis_rotation(2, rng.uniform(0, 6.28));
        Mat3 a = build_covariance(f, 0.055);
        Mat3 b = build_covariance(r * f, 0.055);
        CHECK(frobenius_norm(a - b) < 1e-9);
    }
}

TEST_CASE("covariance eigenvalues respect the clamp bounds on 1e4 random F") {
    Rng rng(11);
    CovarianceParams params;
    const double s = 0.055;
    double lo_bound = (s * params.clamp_lo) * (s * params.clamp_lo) * (1.0 - 1e-3);
    double hi_bound = (s * params.clamp_hi) * (s * params.clamp_hi) * (1.0 + 1e-3);
    for (int t = 0; t < 10000; ++t) {
        Mat3 f = random_f(rng, rng.uniform(0.0, 2.0));
        Mat3 cov = build_covariance(f, s, params);
        CHECK(frobenius_norm(cov - cov.transposed()) < 1e-12);
        Svd3 eig = svd3(cov);
        CHECK(eig.sigma.z >= lo_bound);
        CHECK(eig.sigma.x <= hi_bound);
    }
}

TEST_CASE("covariance_backward hand case: diagonal F, loss = Sigma'_11") {
    double s = 0.055;
    Mat3 f = Mat3::diag(2, 1.4, 0.8);
    Mat3 seed = Mat3::zero();
    seed(0, 0) = 1.0;
    Mat3 g = covariance_backward(f, s, seed);
    CHECK(g.m[0] == doctest::Approx(2 * s * s * 2.0).epsilon(1e-3));  // 2 s^2 F_11
    CHECK(std::abs(g.m[4]) < 1e-6);
    CHECK(std::abs(g.m[8]) < 1e-6);
}

TEST_CASE("covariance_backward: zero seed and finite differences") {
    Rng rng(13);
    CHECK(frobenius_norm(covariance_backward(Mat3::diag(1.5, 1.2, 0.9), 0.1, Mat3::zero())) ==
          0.0);

    const double h = 1e-5;
    int kept = 0;
    while (kept < 50) {
        Mat3 f = random_f(rng, 0.45);
        Svd3 sv = svd3(f);
        // keep away from clamp knees and singular value ties
        if (min_gap(sv.sigma) < 0.08 || sv.sigma.z < 0.45 || sv.sigma.x > 2.3) continue;
        ++kept;
        Mat3 w;
        for (double& e : w.m) e = rng.uniform(-1, 1);
        Mat3 analytic = covariance_backward(f, 0.055, w);
        auto loss = [&](const Mat3& m) { return frobenius_dot(w, build_covariance(m, 0.055)); };
        for (int i = 0; i < 9; ++i) {
            Mat3 fp = f, fm = f;
            fp.m[i] += h;
            fm.m[i] -= h;
            double fd = (loss(fp) - loss(fm)) / (2 * h);
            CHECK(rel_err(fd, analytic.m[i]) < 1e-3);
        }
    }
}

TEST_CASE("covariance_backward adjoint dot-product test") {
    Rng rng(17);
    const double h = 1e-6;
    int kept = 0;
    while (kept < 30) {
        Mat3 f = random_f(rng, 0.4);
        Svd3 sv = svd3(f);
        if (min_gap(sv.sigma) < 0.08 || sv.sigma.z < 0.45 || sv.sigma.x > 2.3) continue;
        ++kept;
        Mat3 g, v;
        for (double& e : g.m) e = rng.uniform(-1, 1);
        for (double& e : v.m) e = rng.uniform(-1, 1);

        // <G, J v> via central differences of the forward map
        Mat3 fp = f, fm = f;
        for (int i = 0; i < 9; ++i) {
            fp.m[i] += h * v.m[i];
            fm.m[i] -= h * v.m[i];
        }
        Mat3 jv = (build_covariance(fp, 0.055) - build_covariance(fm, 0.055)) * (1.0 / (2 * h));
        double lhs = frobenius_dot(g, jv);
        double rhs = frobenius_dot(covariance_backward(f, 0.055, g), v);
        CHECK(std::abs(lhs - rhs) < 1e-8 * std::max(1.0, std::abs(lhs)) + 1e-8);
    }
}

TEST_CASE("anisotropy") {
    CHECK(anisotropy(Mat3::identity() * 0.003) == doctest::Approx(1.0));
    CHECK(anisotropy(Mat3::diag(4, 1, 1) * 0.01) == doctest::Approx(2.0));
    Mat3 r = axis_rotation(0, 0.6) * axis_rotation(2, 1.9);
    Mat3 conjugated = r * Mat3::diag(4, 1, 1) * r.transposed();
    CHECK(anisotropy(conjugated) == doctest::Approx(2.0).epsilon(1e-9));
}
