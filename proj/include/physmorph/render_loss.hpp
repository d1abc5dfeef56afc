#pragma once

#include <cstdint>
#include <vector>

#include "physmorph/renderer.hpp"
#include "physmorph/shapes.hpp"

namespace physmorph {

struct LossWeights {
    double w_alpha = 1.5;
    double w_depth = 4.0;
    double w_edge = 3.0;
    double w_shrink = 0.5;
};

struct TargetImages {
    std::vector<double> alpha;  // H*W
    std::vector<double> depth;  // H*W
    int width = 0, height = 0;
};

// Ground truth: area-weighted surface samples splatted as isotropic
// gaussians through the same renderer.
TargetImages make_target_images(const Shape& shape, const CameraModel& cam,
                                const RenderParams& params, double sigma_iso, double opacity,
                                int sample_count, std::uint64_t seed);

struct ScalarLoss {
    double value = 0.0;
    std::vector<double> grad;
};

// Masked MSE over alpha, scaled by the masked-pixel ratio.
ScalarLoss alpha_loss(const std::vector<double>& alpha, const std::vector<double>& alpha_target,
                      const VisibilityMask& mask);

// MSE over pixels where both alphas exceed 0.5 (and the mask), depths
// normalized by (far - near).
ScalarLoss depth_loss(const std::vector<double>& depth, const std::vector<double>& depth_target,
                      const std::vector<double>& alpha, const std::vector<double>& alpha_target,
                      const VisibilityMask& mask, double near, double far);

// MSE between Sobel magnitudes of the two alpha images, over masked pixels
// (so masked-out regions contribute no gradient anywhere downstream).
ScalarLoss edge_loss(const std::vector<double>& alpha, const std::vector<double>& alpha_target,
                     int width, int height, const VisibilityMask& mask = {});

// mean over gaussians of multiplier * (1 - visibility); pushes occluded
// interior gaussians toward transparency.
ScalarLoss shrink_loss(const std::vector<double>& opacity_multiplier, const RenderTarget& target);

struct RenderLoss {
    double total = 0.0;
    double alpha_term = 0.0, depth_term = 0.0, edge_term = 0.0, shrink_term = 0.0;
    std::vector<double> grad_alpha;       // dL/d alpha image
    std::vector<double> grad_depth;       // dL/d depth image
    std::vector<double> grad_multiplier;  // dL/d opacity multiplier, per gaussian
};

RenderLoss render_loss(const RenderTarget& rendered, const TargetImages& target,
                       const VisibilityMask& mask, const std::vector<double>& opacity_multiplier,
                       const LossWeights& weights, double near, double far);

}  // namespace physmorph
