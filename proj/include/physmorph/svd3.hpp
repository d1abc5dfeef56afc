#pragma once

#include "physmorph/linalg.hpp"

namespace physmorph {

// Full SVD of a 3x3 matrix: input = u * diag(sigma) * v^T.
// sigma is sorted descending and non-negative; det(u), det(v) in {+1, -1}.
struct Svd3 {
    Mat3 u;
    Vec3 sigma;
    Mat3 v;

    Mat3 reconstruct() const { return u * Mat3::diag(sigma) * v.transposed(); }
};

Svd3 svd3(const Mat3& m);

// F = r * s with r a proper rotation (det = +1) and s symmetric.
// For det(F) < 0 the smallest singular value is carried with a negative
// sign into s so that r stays a rotation.
struct PolarDecomposition {
    Mat3 r;
    Mat3 s;
    Svd3 svd;             // underlying factorization
    Vec3 signed_sigma;    // sigma with the det sign folded into the last entry
    bool inverted = false;
};

PolarDecomposition polar_decompose(const Mat3& f);

// Differentiable soft clamp of singular values onto (lo, hi):
// smooth max with lo followed by smooth min with hi, both softplus-based
// with sharpness beta. Identity to <1e-4 away from the bounds.
struct SoftClamp {
    double lo = 0.35;
    double hi = 2.5;
    double beta = 20.0;

    double value(double x) const;
    double derivative(double x) const;
    Vec3 value(const Vec3& s) const { return {value(s.x), value(s.y), value(s.z)}; }
};

Vec3 soft_clamp_singular(const Vec3& sigma, double lo, double hi);

// Reverse-mode gradient through svd3: given dL/du, dL/dsigma, dL/dv,
// returns dL/dm. Inverse singular-value-gap factors are regularized so the
// result stays bounded at repeated singular values.
Mat3 svd_backward(const Svd3& svd, const Mat3& grad_u, const Vec3& grad_sigma,
                  const Mat3& grad_v, double eps = 1e-6);

// Adjoint of f -> rotation factor of polar_decompose(f).
Mat3 polar_rotation_backward(const PolarDecomposition& pd, const Mat3& grad_r);

}  // namespace physmorph
