#pragma once

#include "physmorph/linalg.hpp"

namespace physmorph {

// Pinhole camera. View rows are (right, down, forward) so that +z is the
// viewing direction and image v grows downward.
struct CameraModel {
    double fx = 95.0, fy = 95.0;   // Table-scale intrinsics (3840-wide optics / 15)
    double cx = 128.0, cy = 72.0;
    int width = 256, height = 256;
    double near = 0.01, far = 100.0;
    Vec3 eye{20.0, -25.0, 12.5};
    Vec3 target{0.0, 0.0, 0.0};
    Vec3 up{0.0, 0.0, 1.0};

    Mat3 view_rotation() const {
        Vec3 f = normalized(target - eye);
        Vec3 r = normalized(cross(f, up));
        Vec3 d = cross(f, r);
        Mat3 w;
        for (int c = 0; c < 3; ++c) {
            w(0, c) = r[c];
            w(1, c) = d[c];
            w(2, c) = f[c];
        }
        return w;
    }

    Vec3 to_camera(const Vec3& p) const { return view_rotation() * (p - eye); }

    void scale_resolution(double s) {
        fx *= s;
        fy *= s;
        cx *= s;
        cy *= s;
        width = int(width * s + 0.5);
        height = int(height * s + 0.5);
    }
};

struct ProjectedGaussian {
    Vec2 mu2d{};
    SymMat2 cov2d{};  // includes the anti-aliasing floor
    double z = 0.0;
    bool culled = true;
};

// EWA-style projection: cov2d = J W cov W^T J^T + aa_floor * I with J the
// pinhole Jacobian at the mean. Gaussians outside (near, far) are culled.
ProjectedGaussian project(const Vec3& mu, const Mat3& cov, const CameraModel& cam,
                          double aa_floor = 0.3);

}  // namespace physmorph
