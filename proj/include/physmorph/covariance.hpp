#pragma once

#include "physmorph/svd3.hpp"

namespace physmorph {

struct CovarianceParams {
    double clamp_lo = 0.35;
    double clamp_hi = 2.5;
    double sigma_anchor = 0.055;  // base scale for anchor gaussians
    double sigma_child = 0.036;   // isotropic scale for child gaussians
};

// Sigma' = S_c (s^2 I) S_c^T where S_c is the polar stretch of F with
// soft-clamped singular values. Orientation (the rotation factor) never
// enters, so the result is invariant to rotations of F.
Mat3 build_covariance(const Mat3& F, double s, const CovarianceParams& params = {});

// dL/dF for the covariance construction above.
Mat3 covariance_backward(const Mat3& F, double s, const Mat3& grad_cov,
                         const CovarianceParams& params = {});

// sqrt(lambda_max / lambda_min) of a symmetric PSD matrix: the axis ratio.
double anisotropy(const Mat3& cov);

}  // namespace physmorph
