#include "physmorph/render_loss.hpp"

#include <cmath>
#include <stdexcept>

#include "physmorph/physics_loss.hpp"

namespace physmorph {

TargetImages make_target_images(const Shape& shape, const CameraModel& cam,
                                const RenderParams& params, double sigma_iso, double opacity,
                                int sample_count, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 0x719e);
    std::vector<Vec3> pts = shape.sample_surface(sample_count, rng);

    std::vector<RenderGaussian> gaussians(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        gaussians[i].mu = pts[i];
        gaussians[i].cov = Mat3::identity() * (sigma_iso * sigma_iso);
        gaussians[i].opacity = opacity;
    }
    RenderTarget rt = render(gaussians, cam, params);

    TargetImages out;
    out.width = rt.width;
    out.height = rt.height;
    out.alpha = std::move(rt.alpha);
    out.depth = std::move(rt.depth);
    return out;
}

ScalarLoss alpha_loss(const std::vector<double>& alpha, const std::vector<double>& alpha_target,
                      const VisibilityMask& mask) {
    if (alpha.size() != alpha_target.size())
        throw std::invalid_argument("alpha_loss: image size mismatch");
    const std::size_t n = alpha.size();
    ScalarLoss out;
    out.grad.assign(n, 0.0);

    std::size_t masked = 0;
    std::vector<double> terms(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.pixel_on(i)) continue;
        ++masked;
        double d = alpha[i] - alpha_target[i];
        terms[i] = d * d;
    }
    if (masked == 0) return out;
    // mean over masked pixels scaled by masked ratio == sum / total pixels
    out.value = pairwise_sum(terms.data(), n) / double(n);
    for (std::size_t i = 0; i < n; ++i)
        if (mask.pixel_on(i)) out.grad[i] = 2.0 * (alpha[i] - alpha_target[i]) / double(n);
    return out;
}

ScalarLoss depth_loss(const std::vector<double>& depth, const std::vector<double>& depth_target,
                      const std::vector<double>& alpha, const std::vector<double>& alpha_target,
                      const VisibilityMask& mask, double near, double far) {
    if (depth.size() != depth_target.size() || depth.size() != alpha.size())
        throw std::invalid_argument("depth_loss: image size mismatch");
    const std::size_t n = depth.size();
    const double range = far - near;
    ScalarLoss out;
    out.grad.assign(n, 0.0);

    std::vector<double> terms(n, 0.0);
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(alpha[i] > 0.5 && alpha_target[i] > 0.5 && mask.pixel_on(i))) continue;
        ++support;
        double d = (depth[i] - depth_target[i]) / range;
        terms[i] = d * d;
    }
    if (support == 0) return out;
    out.value = pairwise_sum(terms.data(), n) / double(support);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(alpha[i] > 0.5 && alpha_target[i] > 0.5 && mask.pixel_on(i))) continue;
        out.grad[i] = 2.0 * (depth[i] - depth_target[i]) / (range * range) / double(support);
    }
    return out;
}

ScalarLoss edge_loss(const std::vector<double>& alpha, const std::vector<double>& alpha_target,
                     int width, int height, const VisibilityMask& mask) {
    if (alpha.size() != alpha_target.size() || alpha.size() != std::size_t(width) * height)
        throw std::invalid_argument("edge_loss: image size mismatch");
    const std::size_t n = alpha.size();
    std::vector<double> mag, mag_t;
    sobel_magnitude(alpha, width, height, mag);
    sobel_magnitude(alpha_target, width, height, mag_t);

    ScalarLoss out;
    std::vector<double> terms(n, 0.0);
    std::vector<double> mag_bar(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.pixel_on(i)) continue;
        double d = mag[i] - mag_t[i];
        terms[i] = d * d;
        mag_bar[i] = 2.0 * d / double(n);
    }
    out.value = pairwise_sum(terms.data(), n) / double(n);

    // chain through mag = sqrt(gx^2 + gy^2 + 1e-12) and the Sobel taps with
    // replicate padding (adjoint scatters into the clamped source pixels)
    out.grad.assign(n, 0.0);
    auto scatter = [&](int x, int y, double v) {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        out.grad[std::size_t(y) * width + x] += v;
    };
    auto at = [&](int x, int y) {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return alpha[std::size_t(y) * width + x];
    };
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            std::size_t i = std::size_t(y) * width + x;
            if (mag_bar[i] == 0.0) continue;
            double gx = -at(x - 1, y - 1) + at(x + 1, y - 1) - 2 * at(x - 1, y) + 2 * at(x + 1, y) -
                        at(x - 1, y + 1) + at(x + 1, y + 1);
            double gy = -at(x - 1, y - 1) - 2 * at(x, y - 1) - at(x + 1, y - 1) +
                        at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1);
            double gx_bar = mag_bar[i] * gx / mag[i];
            double gy_bar = mag_bar[i] * gy / mag[i];
            scatter(x - 1, y - 1, -gx_bar - gy_bar);
            scatter(x + 1, y - 1, gx_bar - gy_bar);
            scatter(x - 1, y, -2 * gx_bar);
            scatter(x + 1, y, 2 * gx_bar);
            scatter(x - 1, y + 1, -gx_bar + gy_bar);
            scatter(x + 1, y + 1, gx_bar + gy_bar);
            scatter(x, y - 1, -2 * gy_bar);
            scatter(x, y + 1, 2 * gy_bar);
        }
    return out;
}

ScalarLoss shrink_loss(const std::vector<double>& opacity_multiplier, const RenderTarget& target) {
    const std::size_t n = opacity_multiplier.size();
    if (target.vis_weighted.size() != n)
        throw std::invalid_argument("shrink_loss: multiplier/gaussian count mismatch");
    ScalarLoss out;
    out.grad.assign(n, 0.0);
    if (n == 0) return out;
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) {
        double hidden = 1.0 - target.visibility(k);
        terms[k] = opacity_multiplier[k] * hidden;
        out.grad[k] = hidden / double(n);
    }
    out.value = pairwise_sum(terms.data(), n) / double(n);
    return out;
}

RenderLoss render_loss(const RenderTarget& rendered, const TargetImages& target,
                       const VisibilityMask& mask, const std::vector<double>& opacity_multiplier,
                       const LossWeights& weights, double near, double far) {
    RenderLoss out;
    const std::size_t npix = rendered.alpha.size();
    out.grad_alpha.assign(npix, 0.0);
    out.grad_depth.assign(npix, 0.0);
    out.grad_multiplier.assign(opacity_multiplier.size(), 0.0);

    if (weights.w_alpha != 0.0) {
        ScalarLoss l = alpha_loss(rendered.alpha, target.alpha, mask);
        out.alpha_term = l.value;
        for (std::size_t i = 0; i < npix; ++i) out.grad_alpha[i] += weights.w_alpha * l.grad[i];
    }
    if (weights.w_depth != 0.0) {
        ScalarLoss l = depth_loss(rendered.depth, target.depth, rendered.alpha, target.alpha,
                                  mask, near, far);
        out.depth_term = l.value;
        for (std::size_t i = 0; i < npix; ++i) out.grad_depth[i] += weights.w_depth * l.grad[i];
    }
    if (weights.w_edge != 0.0) {
        ScalarLoss l = edge_loss(rendered.alpha, target.alpha, rendered.width, rendered.height,
                                 mask);
        out.edge_term = l.value;
        for (std::size_t i = 0; i < npix; ++i) out.grad_alpha[i] += weights.w_edge * l.grad[i];
    }
    if (weights.w_shrink != 0.0 && !opacity_multiplier.empty()) {
        ScalarLoss l = shrink_loss(opacity_multiplier, rendered);
        out.shrink_term = l.value;
        for (std::size_t k = 0; k < opacity_multiplier.size(); ++k)
            out.grad_multiplier[k] += weights.w_shrink * l.grad[k];
    }
    out.total = weights.w_alpha * out.alpha_term + weights.w_depth * out.depth_term +
                weights.w_edge * out.edge_term + weights.w_shrink * out.shrink_term;
    return out;
}

}  // namespace physmorph
