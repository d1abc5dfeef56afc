#pragma once

#include <vector>

#include "physmorph/camera.hpp"
#include "physmorph/renderer.hpp"
#include "physmorph/shapes.hpp"

namespace physmorph {

struct PointSample {
    enum class Source { Predicted, Target };
    Source source = Source::Target;
    std::vector<Vec3> points;
};

// Area-weighted surface sampling of an analytic or mesh shape. Throws on an
// empty surface.
PointSample sample_surface(const Shape& shape, int n, std::uint64_t seed);

// Max per-gaussian visibility over a 6-view orthogonal rig placed at the
// reference camera's distance: the outer shell scores near 1, interior ~0.
std::vector<double> multiview_visibility(const std::vector<RenderGaussian>& gaussians,
                                         const CameraModel& reference,
                                         const RenderParams& params);

// Uniform sample of the visible shell (visibility > 0.5) of a splat cloud.
PointSample sample_cloud_shell(const std::vector<RenderGaussian>& gaussians,
                               const std::vector<double>& visibility, int n, std::uint64_t seed);

// Symmetric bidirectional mean squared nearest-neighbor distance, normalized
// by the diagonal of the joint axis-aligned bounding box.
double chamfer(const std::vector<Vec3>& p, const std::vector<Vec3>& q);

struct GaussianStats {
    double mean_anisotropy = 0.0;
    double median_anisotropy = 0.0;
    std::vector<int> histogram;  // anisotropy in [1, 4), 32 bins, overflow in the last
    std::size_t anchor_count = 0;
    std::size_t render_count = 0;
};

GaussianStats stats(const std::vector<RenderGaussian>& gaussians, std::size_t anchor_count);

}  // namespace physmorph
