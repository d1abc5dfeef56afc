#include "physmorph/svd3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace physmorph {

namespace {

// One-sided Jacobi rotation on columns (p, q) of a and v.
// Drives column p and q of a toward orthogonality.
bool orthogonalize_pair(Mat3& a, Mat3& v, int p, int q) {
    Vec3 cp = a.col(p), cq = a.col(q);
    double app = dot(cp, cp);
    double aqq = dot(cq, cq);
    double apq = dot(cp, cq);

    if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) + 1e-300) return false;

    double zeta = (aqq - app) / (2.0 * apq);
    double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
    double c = 1.0 / std::sqrt(1.0 + t * t);
    double s = c * t;

    for (int i = 0; i < 3; ++i) {
        double aip = a(i, p), aiq = a(i, q);
        a(i, p) = c * aip - s * aiq;
        a(i, q) = s * aip + c * aiq;
        double vip = v(i, p), viq = v(i, q);
        v(i, p) = c * vip - s * viq;
        v(i, q) = s * vip + c * viq;
    }
    return true;
}

}  // namespace

Svd3 svd3(const Mat3& m) {
    if (!all_finite(m)) throw std::invalid_argument("svd3: non-finite input");

    // One-sided Jacobi: rotate columns of a copy until pairwise orthogonal,
    // accumulating the right singular vectors in v.
    Mat3 a = m;
    Mat3 v = Mat3::identity();
    for (int sweep = 0; sweep < 30; ++sweep) {
        bool changed = false;
        changed |= orthogonalize_pair(a, v, 0, 1);
        changed |= orthogonalize_pair(a, v, 0, 2);
        changed |= orthogonalize_pair(a, v, 1, 2);
        if (!changed) break;
    }

    Vec3 sigma{norm(a.col(0)), norm(a.col(1)), norm(a.col(2))};

    // Sort descending, permuting columns of a and v along.
    int order[3] = {0, 1, 2};
    for (int i = 0; i < 2; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (sigma[order[j]] > sigma[order[i]]) std::swap(order[i], order[j]);

    Svd3 out;
    out.v = Mat3::zero();
    Mat3 asorted = Mat3::zero();
    for (int k = 0; k < 3; ++k) {
        out.sigma[k] = sigma[order[k]];
        out.v.set_col(k, v.col(order[k]));
        asorted.set_col(k, a.col(order[k]));
    }

    // u columns: normalized columns of the rotated matrix. Zero singular
    // values get a basis completion via cross products.
    double scale = std::max(out.sigma.x, 1e-300);
    Vec3 u0, u1, u2;
    u0 = out.sigma.x > 0.0 ? asorted.col(0) / out.sigma.x : Vec3{1, 0, 0};
    if (out.sigma.y > 1e-15 * scale) {
        u1 = asorted.col(1) / out.sigma.y;
    } else {
        // pick the coordinate axis least aligned with u0
        int ax = std::abs(u0.x) < std::abs(u0.y)
                     ? (std::abs(u0.x) < std::abs(u0.z) ? 0 : 2)
                     : (std::abs(u0.y) < std::abs(u0.z) ? 1 : 2);
        Vec3 e{ax == 0 ? 1.0 : 0.0, ax == 1 ? 1.0 : 0.0, ax == 2 ? 1.0 : 0.0};
        u1 = normalized(cross(u0, e));
    }
    if (out.sigma.z > 1e-15 * scale) {
        u2 = asorted.col(2) / out.sigma.z;
        // re-orthogonalize against the first two columns; cheap and keeps
        // near-degenerate inputs fully orthogonal
        u2 -= u0 * dot(u0, u2);
        u2 -= u1 * dot(u1, u2);
        double n = norm(u2);
        u2 = n > 1e-12 ? u2 / n : cross(u0, u1);
    } else {
        u2 = cross(u0, u1);
    }
    out.u = Mat3::zero();
    out.u.set_col(0, u0);
    out.u.set_col(1, u1);
    out.u.set_col(2, u2);
    return out;
}

PolarDecomposition polar_decompose(const Mat3& f) {
    PolarDecomposition pd;
    pd.svd = svd3(f);
    const Svd3& s = pd.svd;

    // det(u)*det(v) = sign(det(f)); fold the sign into the smallest singular
    // value so that r = u * diag(1,1,sign) * v^T has det +1.
    double sign = s.u.determinant() * s.v.determinant();
    pd.inverted = sign < 0.0;
    pd.signed_sigma = {s.sigma.x, s.sigma.y, sign < 0.0 ? -s.sigma.z : s.sigma.z};

    Mat3 d = Mat3::diag(1.0, 1.0, sign < 0.0 ? -1.0 : 1.0);
    pd.r = s.u * d * s.v.transposed();
    pd.s = s.v * Mat3::diag(pd.signed_sigma) * s.v.transposed();
    return pd;
}

double SoftClamp::value(double x) const {
    auto softplus = [this](double t) {
        double bt = beta * t;
        if (bt > 30.0) return t;
        if (bt < -30.0) return std::exp(bt) / beta;
        return std::log1p(std::exp(bt)) / beta;
    };
    double y = lo + softplus(x - lo);   // smooth max with lo
    return hi - softplus(hi - y);       // smooth min with hi
}

double SoftClamp::derivative(double x) const {
    auto sigmoid = [](double t) {
        if (t > 30.0) return 1.0;
        if (t < -30.0) return std::exp(t);
        return 1.0 / (1.0 + std::exp(-t));
    };
    auto softplus = [this](double t) {
        double bt = beta * t;
        if (bt > 30.0) return t;
        if (bt < -30.0) return std::exp(bt) / beta;
        return std::log1p(std::exp(bt)) / beta;
    };
    double y = lo + softplus(x - lo);
    return sigmoid(beta * (hi - y)) * sigmoid(beta * (x - lo));
}

Vec3 soft_clamp_singular(const Vec3& sigma, double lo, double hi) {
    if (!(lo > 0.0) || !(lo < hi)) throw std::invalid_argument("soft_clamp_singular: need 0 < lo < hi");
    SoftClamp c{lo, hi};
    return c.value(sigma);
}

Mat3 svd_backward(const Svd3& svd, const Mat3& grad_u, const Vec3& grad_sigma,
                  const Mat3& grad_v, double eps) {
    const Mat3& u = svd.u;
    const Mat3& v = svd.v;
    const Vec3& s = svd.sigma;

    Mat3 gu = u.transposed() * grad_u;  // u^T dL/du
    Mat3 gv = v.transposed() * grad_v;  // v^T dL/dv

    // d = diag(grad_sigma) + off-diagonal terms assembled from the
    // antisymmetric parts of gu, gv with regularized inverse gap factors
    // f_ab = (s_b^2 - s_a^2) / ((s_b^2 - s_a^2)^2 + eps^2).
    Mat3 d = Mat3::diag(grad_sigma);
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (a == b) continue;
            double gap = s[b] * s[b] - s[a] * s[a];
            double f = gap / (gap * gap + eps * eps);
            d(a, b) = f * (s[b] * (gu(a, b) - gu(b, a)) + s[a] * (gv(a, b) - gv(b, a)));
        }
    }
    return u * d * v.transposed();
}

Mat3 polar_rotation_backward(const PolarDecomposition& pd, const Mat3& grad_r) {
    // r = u * d * v^T with d = diag(1,1,±1) treated as constant.
    Mat3 d = Mat3::diag(1.0, 1.0, pd.inverted ? -1.0 : 1.0);
    Mat3 grad_u = grad_r * pd.svd.v * d;
    Mat3 grad_v = grad_r.transposed() * pd.svd.u * d;
    return svd_backward(pd.svd, grad_u, Vec3{0, 0, 0}, grad_v);
}

}  // namespace physmorph
