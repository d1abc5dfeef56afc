#pragma once

#include <cstdint>
#include <vector>

#include "physmorph/camera.hpp"
#include "physmorph/linalg.hpp"

namespace physmorph {

struct RenderGaussian {
    Vec3 mu{};
    Mat3 cov = Mat3::identity();
    double opacity = 0.8;
    Vec3 color{0.27, 0.51, 0.71};
};

struct RenderParams {
    Vec3 background{1.0, 1.0, 1.0};
    Vec3 light_dir{0.3, -0.5, 0.8};
    double ambient = 0.35;
    double diffuse = 0.65;
    double aa_floor = 0.3;       // px^2 added to the projected covariance diagonal
    double cutoff = 1e-4;        // stop compositing once transmittance drops below
    double g_max = 0.9999;       // per-sample opacity ceiling
    double g_min = 1e-12;        // contributions below this are dropped
    double chi2_cutoff = 9.0;    // evaluate only inside the 3-sigma ellipse
    double edge_threshold = 0.05;
    int dilate_radius = 2;
    double mask_low = 0.05;      // below: mask disabled
    double mask_high = 0.60;     // above: subsampled to this ratio
    double visible_contribution = 1e-3;
};

struct RenderTarget {
    int width = 0, height = 0;
    double far = 100.0;
    std::vector<double> alpha;          // H*W
    std::vector<double> depth;          // H*W, background = far
    std::vector<double> color;          // H*W*3
    std::vector<double> vis_weighted;   // per gaussian: sum of T*g over pixels
    std::vector<double> vis_total;      // per gaussian: sum of g over pixels
    std::vector<double> vis_peak;       // per gaussian: max transmittance seen

    std::size_t pixel(int x, int y) const { return std::size_t(y) * width + x; }
    // transmittance-weighted visibility in [0, 1]
    double visibility(std::size_t k) const {
        return vis_total[k] > 1e-12 ? vis_weighted[k] / vis_total[k] : 0.0;
    }
};

RenderTarget render(const std::vector<RenderGaussian>& gaussians, const CameraModel& cam,
                    const RenderParams& params = {});

struct ImageGradients {
    std::vector<double> alpha;  // H*W, may be empty
    std::vector<double> depth;  // H*W, may be empty
    std::vector<double> color;  // H*W*3, may be empty
};

struct GaussianGradients {
    std::vector<Vec3> mu;
    std::vector<Mat3> cov;
    std::vector<double> opacity;
};

// Analytic backward of render(): replays the forward compositing per pixel
// (bit-identical order) and chains pixel gradients to means, covariances
// and opacities.
GaussianGradients render_backward(const std::vector<RenderGaussian>& gaussians,
                                  const CameraModel& cam, const RenderParams& params,
                                  const RenderTarget& target, const ImageGradients& grads);

struct VisibilityMask {
    bool disabled = false;          // true when the raw mask was below mask_low
    double area_ratio = 0.0;        // of the mask actually in use
    std::vector<std::uint8_t> pixels;            // H*W
    std::vector<std::uint8_t> visible_gaussian;  // per gaussian

    // an unbuilt mask (no pixel array yet) behaves as all-on
    bool pixel_on(std::size_t i) const {
        return disabled || pixels.empty() || pixels[i] != 0;
    }
};

// Edge(alpha) dilated, union object depth hits; auto-disable below mask_low,
// seeded subsample above mask_high.
VisibilityMask visibility_mask(const RenderTarget& target,
                               const std::vector<RenderGaussian>& gaussians,
                               const CameraModel& cam, const RenderParams& params,
                               std::uint64_t seed);

// 3x3 Sobel magnitude with replicate padding, smooth sqrt(gx^2+gy^2+1e-12).
void sobel_magnitude(const std::vector<double>& img, int width, int height,
                     std::vector<double>& mag);

}  // namespace physmorph
