#include "physmorph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "physmorph/covariance.hpp"
#include "physmorph/knn.hpp"
#include "physmorph/parallel.hpp"
#include "physmorph/rng.hpp"

namespace physmorph {

PointSample sample_surface(const Shape& shape, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_surface: n must be >= 1");
    Rng rng = Rng::stream(seed, 0x5a11);
    PointSample out;
    out.source = PointSample::Source::Target;
    out.points = shape.sample_surface(n, rng);
    if (out.points.empty()) throw std::runtime_error("sample_surface: empty surface");
    return out;
}

std::vector<double> multiview_visibility(const std::vector<RenderGaussian>& gaussians,
                                         const CameraModel& reference,
                                         const RenderParams& params) {
    std::vector<double> vis(gaussians.size(), 0.0);
    double dist = norm(reference.eye - reference.target);
    const Vec3 dirs[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const Vec3& d : dirs) {
        CameraModel cam = reference;
        cam.eye = reference.target + d * dist;
        cam.up = std::abs(d.z) > 0.5 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
        RenderTarget rt = render(gaussians, cam, params);
        for (std::size_t k = 0; k < gaussians.size(); ++k)
            vis[k] = std::max(vis[k], rt.vis_peak[k]);
    }
    return vis;
}

PointSample sample_cloud_shell(const std::vector<RenderGaussian>& gaussians,
                               const std::vector<double>& visibility, int n, std::uint64_t seed) {
    if (visibility.size() != gaussians.size())
        throw std::invalid_argument("sample_cloud_shell: visibility size mismatch");
    std::vector<int> shell;
    for (std::size_t k = 0; k < gaussians.size(); ++k)
        if (visibility[k] > 0.5) shell.push_back(int(k));
    PointSample out;
    out.source = PointSample::Source::Predicted;
    if (shell.empty()) throw std::runtime_error("sample_cloud_shell: no visible shell");
    Rng rng = Rng::stream(seed, 0x5e11);
    out.points.reserve(n);
    for (int i = 0; i < n; ++i) out.points.push_back(gaussians[shell[rng.below(shell.size())]].mu);
    return out;
}

double chamfer(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    if (p.empty() || q.empty()) throw std::invalid_argument("chamfer: empty point set");

    Vec3 lo = p[0], hi = p[0];
    auto grow = [&](const Vec3& v) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    };
    for (const Vec3& v : p) grow(v);
    for (const Vec3& v : q) grow(v);
    double diag = norm(hi - lo);

    SpatialIndex ip(p), iq(q);
    // plain index-order accumulation; the brute-force oracle reproduces the
    // exact same sum
    double sum_pq = 0.0, sum_qp = 0.0;
    std::vector<SpatialIndex::Neighbor> nb;
    for (const Vec3& v : p) {
        iq.query(v, 1, nb);
        sum_pq += nb[0].dist_sq;
    }
    for (const Vec3& v : q) {
        ip.query(v, 1, nb);
        sum_qp += nb[0].dist_sq;
    }
    double total = sum_pq / double(p.size()) + sum_qp / double(q.size());
    if (total == 0.0) return 0.0;  // identical sets, degenerate diag included
    return total / diag;
}

GaussianStats stats(const std::vector<RenderGaussian>& gaussians, std::size_t anchor_count) {
    GaussianStats out;
    out.anchor_count = anchor_count;
    out.render_count = gaussians.size();
    out.histogram.assign(32, 0);
    if (gaussians.empty()) return out;

    std::vector<double> an(gaussians.size());
    parallel_ranges(gaussians.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) an[k] = anisotropy(gaussians[k].cov);
    });
    double acc = 0.0;
    for (double a : an) {
        acc += a;
        int bin = int((a - 1.0) / 3.0 * 32.0);
        out.histogram[std::clamp(bin, 0, 31)] += 1;
    }
    out.mean_anisotropy = acc / double(an.size());
    std::vector<double> sorted = an;
    std::sort(sorted.begin(), sorted.end());
    out.median_anisotropy = sorted[sorted.size() / 2];
    return out;
}

}  // namespace physmorph
