#include "physmorph/covariance.hpp"

#include <algorithm>
#include <cmath>

namespace physmorph {

Mat3 build_covariance(const Mat3& F, double s, const CovarianceParams& params) {
    PolarDecomposition pd = polar_decompose(F);
    SoftClamp clamp{params.clamp_lo, params.clamp_hi};
    Vec3 c = clamp.value(pd.signed_sigma);
    // Sigma' = s^2 V diag(c)^2 V^T
    Vec3 c2{c.x * c.x, c.y * c.y, c.z * c.z};
    return pd.svd.v * Mat3::diag(c2 * (s * s)) * pd.svd.v.transposed();
}

Mat3 covariance_backward(const Mat3& F, double s, const Mat3& grad_cov,
                         const CovarianceParams& params) {
    PolarDecomposition pd = polar_decompose(F);
    SoftClamp clamp{params.clamp_lo, params.clamp_hi};
    const Mat3& v = pd.svd.v;
    Mat3 w_sym = grad_cov + grad_cov.transposed();  // symmetrized seed

    // Sigma' = s^2 sum_k c_k^2 v_k v_k^T with c_k = clamp(signed sigma_k).
    Vec3 grad_sigma{};
    Mat3 grad_v = Mat3::zero();
    for (int k = 0; k < 3; ++k) {
        double sv = pd.signed_sigma[k];
        double c = clamp.value(sv);
        Vec3 vk = v.col(k);
        Vec3 wv = Mat3(w_sym) * vk;
        // d/d c_k: s^2 * 2 c_k * v_k^T W v_k   (W symmetrized already)
        grad_sigma[k] = s * s * c * dot(vk, wv) * clamp.derivative(sv);
        // d/d v_k: s^2 c_k^2 (W + W^T) v_k
        grad_v.set_col(k, wv * (s * s * c * c));
    }
    // the smallest singular value carries the det sign; chain through it
    if (pd.inverted) grad_sigma.z = -grad_sigma.z;
    return svd_backward(pd.svd, Mat3::zero(), grad_sigma, grad_v);
}

double anisotropy(const Mat3& cov) {
    Svd3 s = svd3(cov);
    double lo = std::max(s.sigma.z, 1e-300);
    return std::sqrt(s.sigma.x / lo);
}

}  // namespace physmorph
