#include "physmorph/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "physmorph/parallel.hpp"
#include "physmorph/rng.hpp"
#include "physmorph/svd3.hpp"

namespace physmorph {

ProjectedGaussian project(const Vec3& mu, const Mat3& cov, const CameraModel& cam,
                          double aa_floor) {
    ProjectedGaussian out;
    Mat3 w = cam.view_rotation();
    Vec3 pc = w * (mu - cam.eye);
    if (!(pc.z > cam.near) || !(pc.z < cam.far)) return out;  // culled

    out.z = pc.z;
    out.mu2d = {cam.cx + cam.fx * pc.x / pc.z, cam.cy + cam.fy * pc.y / pc.z};

    // cov2d = J V J^T with V = W cov W^T and J the pinhole Jacobian
    Mat3 v3 = w * cov * w.transposed();
    double invz = 1.0 / pc.z;
    double j00 = cam.fx * invz, j02 = -cam.fx * pc.x * invz * invz;
    double j11 = cam.fy * invz, j12 = -cam.fy * pc.y * invz * invz;
    // rows of J: (j00, 0, j02), (0, j11, j12)
    Vec3 r0{j00, 0.0, j02}, r1{0.0, j11, j12};
    out.cov2d.a = dot(r0, v3 * r0) + aa_floor;
    out.cov2d.b = dot(r0, v3 * r1);
    out.cov2d.c = dot(r1, v3 * r1) + aa_floor;
    out.culled = false;
    return out;
}

namespace {

struct Prepared {
    int index;  // original gaussian index
    Vec2 mu2d;
    SymMat2 inv2d;
    double z;
    double opacity;
    Vec3 shaded;
    int x0, x1, y0, y1;
};

Vec3 shade(const RenderGaussian& g, const RenderParams& p) {
    // flat Lambert against the covariance minor axis; display only
    Svd3 eig = svd3(g.cov);
    Vec3 n = eig.v.col(2);
    double lam = p.ambient + p.diffuse * std::abs(dot(n, normalized(p.light_dir)));
    lam = std::min(lam, 1.0);
    return g.color * lam;
}

struct Scene {
    std::vector<Prepared> prepared;          // sorted front to back
    std::vector<std::vector<int>> row_lists; // indices into prepared, per image row
};

Scene prepare_scene(const std::vector<RenderGaussian>& gaussians, const CameraModel& cam,
                    const RenderParams& params, bool with_shading) {
    Scene scene;
    scene.prepared.reserve(gaussians.size());
    for (std::size_t k = 0; k < gaussians.size(); ++k) {
        if (!all_finite(gaussians[k].mu) || !all_finite(gaussians[k].cov))
            throw std::invalid_argument("render: non-finite gaussian");
        ProjectedGaussian pg = project(gaussians[k].mu, gaussians[k].cov, cam, params.aa_floor);
        if (pg.culled) continue;
        Prepared pr;
        pr.index = int(k);
        pr.mu2d = pg.mu2d;
        pr.inv2d = pg.cov2d.inverse();
        pr.z = pg.z;
        pr.opacity = gaussians[k].opacity;
        pr.shaded = with_shading ? shade(gaussians[k], params) : gaussians[k].color;
        double rx = 3.0 * std::sqrt(pg.cov2d.a), ry = 3.0 * std::sqrt(pg.cov2d.c);
        pr.x0 = std::max(int(std::floor(pg.mu2d.x - rx)), 0);
        pr.x1 = std::min(int(std::ceil(pg.mu2d.x + rx)), cam.width - 1);
        pr.y0 = std::max(int(std::floor(pg.mu2d.y - ry)), 0);
        pr.y1 = std::min(int(std::ceil(pg.mu2d.y + ry)), cam.height - 1);
        if (pr.x0 > pr.x1 || pr.y0 > pr.y1) continue;
        scene.prepared.push_back(pr);
    }
    std::sort(scene.prepared.begin(), scene.prepared.end(), [](const Prepared& a, const Prepared& b) {
        if (a.z != b.z) return a.z < b.z;
        return a.index < b.index;
    });
    scene.row_lists.resize(cam.height);
    for (std::size_t s = 0; s < scene.prepared.size(); ++s) {
        const Prepared& pr = scene.prepared[s];
        for (int y = pr.y0; y <= pr.y1; ++y) scene.row_lists[y].push_back(int(s));
    }
    return scene;
}

struct Contribution {
    int s;        // prepared index
    double g;     // clamped sample opacity
    double t;     // transmittance before this sample
    bool clamped; // g hit g_max
};

// shared compositing walk; identical order in forward and backward
template <typename Fn>
void composite_pixel(const Scene& scene, const std::vector<int>& row, int x, int y,
                     const RenderParams& params, Fn&& emit) {
    double t = 1.0;
    for (int s : row) {
        const Prepared& pr = scene.prepared[s];
        if (x < pr.x0 || x > pr.x1) continue;
        Vec2 delta{x - pr.mu2d.x, y - pr.mu2d.y};
        double q = pr.inv2d.quad(delta);
        if (q > params.chi2_cutoff) continue;
        double graw = pr.opacity * std::exp(-0.5 * q);
        bool clamped = graw > params.g_max;
        double g = clamped ? params.g_max : graw;
        if (g < params.g_min) continue;
        emit(Contribution{s, g, t, clamped});
        t *= (1.0 - g);
        if (t < params.cutoff) break;
    }
}

}  // namespace

RenderTarget render(const std::vector<RenderGaussian>& gaussians, const CameraModel& cam,
                    const RenderParams& params) {
    RenderTarget out;
    out.width = cam.width;
    out.height = cam.height;
    out.far = cam.far;
    const std::size_t npix = std::size_t(cam.width) * cam.height;
    out.alpha.assign(npix, 0.0);
    out.depth.assign(npix, cam.far);
    out.color.assign(npix * 3, 0.0);
    out.vis_weighted.assign(gaussians.size(), 0.0);
    out.vis_total.assign(gaussians.size(), 0.0);
    out.vis_peak.assign(gaussians.size(), 0.0);

    Scene scene = prepare_scene(gaussians, cam, params, /*with_shading=*/true);

    const std::size_t chunks = chunk_count(std::size_t(cam.height));
    std::vector<std::vector<double>> vw(chunks), vt(chunks), vp(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        vw[c].assign(gaussians.size(), 0.0);
        vt[c].assign(gaussians.size(), 0.0);
        vp[c].assign(gaussians.size(), 0.0);
    }

    parallel_chunks(std::size_t(cam.height), [&](std::size_t c, std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            const auto& row = scene.row_lists[y];
            for (int x = 0; x < cam.width; ++x) {
                double alpha = 0.0, depth_acc = 0.0;
                Vec3 color_acc{};
                composite_pixel(scene, row, x, int(y), params, [&](const Contribution& cb) {
                    const Prepared& pr = scene.prepared[cb.s];
                    double tg = cb.t * cb.g;
                    alpha += tg;
                    depth_acc += tg * pr.z;
                    color_acc += pr.shaded * tg;
                    vw[c][pr.index] += tg;
                    vt[c][pr.index] += cb.g;
                    vp[c][pr.index] = std::max(vp[c][pr.index], cb.t);
                });
                std::size_t pix = out.pixel(x, int(y));
                out.alpha[pix] = alpha;
                if (alpha > 0.0)
                    out.depth[pix] =
                        std::clamp(depth_acc / std::max(alpha, 1e-8), cam.near, cam.far);
                Vec3 cp = color_acc + params.background * (1.0 - alpha);
                out.color[pix * 3 + 0] = cp.x;
                out.color[pix * 3 + 1] = cp.y;
                out.color[pix * 3 + 2] = cp.z;
            }
        }
    });

    for (std::size_t k = 0; k < gaussians.size(); ++k) {
        double w = 0.0, t = 0.0, pk = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            w += vw[c][k];
            t += vt[c][k];
            pk = std::max(pk, vp[c][k]);
        }
        out.vis_weighted[k] = w;
        out.vis_total[k] = t;
        out.vis_peak[k] = pk;
    }
    return out;
}

GaussianGradients render_backward(const std::vector<RenderGaussian>& gaussians,
                                  const CameraModel& cam, const RenderParams& params,
                                  const RenderTarget& target, const ImageGradients& grads) {
    const std::size_t n = gaussians.size();
    const std::size_t npix = std::size_t(cam.width) * cam.height;
    auto want = [&](const std::vector<double>& v, std::size_t expect) {
        if (!v.empty() && v.size() != expect)
            throw std::invalid_argument("render_backward: gradient image size mismatch");
        return !v.empty();
    };
    const bool has_alpha = want(grads.alpha, npix);
    const bool has_depth = want(grads.depth, npix);
    const bool has_color = want(grads.color, npix * 3);

    Scene scene = prepare_scene(gaussians, cam, params, /*with_shading=*/true);

    // per-gaussian screen-space accumulators
    struct Accum {
        double u = 0, v = 0, z = 0;
        double ca = 0, cb = 0, cc = 0;  // full-matrix cov2d gradient (symmetric)
        double op = 0;
    };
    const std::size_t chunks = chunk_count(std::size_t(cam.height));
    std::vector<std::vector<Accum>> acc(chunks, std::vector<Accum>(n));

    parallel_chunks(std::size_t(cam.height), [&](std::size_t c, std::size_t y0, std::size_t y1) {
        std::vector<Contribution> contribs;
        for (std::size_t y = y0; y < y1; ++y) {
            const auto& row = scene.row_lists[y];
            for (int x = 0; x < cam.width; ++x) {
                std::size_t pix = std::size_t(y) * cam.width + x;
                double abar = has_alpha ? grads.alpha[pix] : 0.0;
                double dbar = has_depth ? grads.depth[pix] : 0.0;
                Vec3 cbar = has_color ? Vec3{grads.color[pix * 3], grads.color[pix * 3 + 1],
                                             grads.color[pix * 3 + 2]}
                                      : Vec3{};
                if (abar == 0.0 && dbar == 0.0 && norm(cbar) == 0.0) continue;

                contribs.clear();
                double alpha = 0.0, depth_acc = 0.0;
                composite_pixel(scene, row, x, int(y), params, [&](const Contribution& cb) {
                    contribs.push_back(cb);
                    alpha += cb.t * cb.g;
                    depth_acc += cb.t * cb.g * scene.prepared[cb.s].z;
                });
                if (contribs.empty()) continue;

                // depth = clamp(depth_acc / max(alpha, 1e-8)); background far
                double denom = std::max(alpha, 1e-8);
                double ratio = depth_acc / denom;
                double dratio = (ratio > cam.near && ratio < cam.far) ? dbar : 0.0;
                double dacc_bar = dratio / denom;
                double alpha_bar = abar - dot(cbar, params.background);
                if (alpha > 1e-8) alpha_bar -= dratio * depth_acc / (alpha * alpha);

                // back-to-front suffix pass
                double s_a = 0.0, s_d = 0.0;
                Vec3 s_c{};
                for (std::size_t i = contribs.size(); i-- > 0;) {
                    const Contribution& cb = contribs[i];
                    const Prepared& pr = scene.prepared[cb.s];
                    double inv1g = 1.0 / (1.0 - cb.g);
                    double gbar = alpha_bar * (cb.t - s_a * inv1g) +
                                  dacc_bar * (cb.t * pr.z - s_d * inv1g) +
                                  dot(cbar, pr.shaded * cb.t - s_c * inv1g);
                    double zbar = dacc_bar * cb.t * cb.g;

                    double tg = cb.t * cb.g;
                    s_a += tg;
                    s_d += tg * pr.z;
                    s_c += pr.shaded * tg;

                    Accum& a = acc[c][pr.index];
                    a.z += zbar;
                    if (cb.clamped) continue;  // opacity ceiling: flat region
                    // g = opacity * exp(-q/2)
                    Vec2 delta{x - pr.mu2d.x, double(y) - pr.mu2d.y};
                    double qbar = -0.5 * gbar * cb.g;
                    Vec2 md = pr.inv2d * delta;
                    // dq/d delta = 2 M delta and delta = pixel - mu2d
                    a.u += -2.0 * qbar * md.x;
                    a.v += -2.0 * qbar * md.y;
                    a.ca += -qbar * md.x * md.x;
                    a.cb += -qbar * md.x * md.y;
                    a.cc += -qbar * md.y * md.y;
                    a.op += gbar * cb.g / pr.opacity;
                }
            }
        }
    });

    std::vector<Accum> total(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t c = 0; c < chunks; ++c) {
            total[k].u += acc[c][k].u;
            total[k].v += acc[c][k].v;
            total[k].z += acc[c][k].z;
            total[k].ca += acc[c][k].ca;
            total[k].cb += acc[c][k].cb;
            total[k].cc += acc[c][k].cc;
            total[k].op += acc[c][k].op;
        }

    GaussianGradients out;
    out.mu.assign(n, Vec3{});
    out.cov.assign(n, Mat3::zero());
    out.opacity.assign(n, 0.0);

    Mat3 w = cam.view_rotation();
    parallel_ranges(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const Accum& a = total[k];
            out.opacity[k] = a.op;
            if (a.u == 0 && a.v == 0 && a.z == 0 && a.ca == 0 && a.cb == 0 && a.cc == 0) continue;

            Vec3 pc = w * (gaussians[k].mu - cam.eye);
            double invz = 1.0 / pc.z;
            double j00 = cam.fx * invz, j02 = -cam.fx * pc.x * invz * invz;
            double j11 = cam.fy * invz, j12 = -cam.fy * pc.y * invz * invz;
            Mat3 v3 = w * gaussians[k].cov * w.transposed();

            // cov2d gradient as a full symmetric 2x2: G
            double ga = a.ca, gb = a.cb, gc = a.cc;

            // cov path: cov_bar = (J W)^T G (J W); JW rows:
            Vec3 r0 = Vec3{j00, 0, j02};
            Vec3 r1 = Vec3{0, j11, j12};
            Vec3 jw0 = w.transposed() * r0;  // row 0 of JW as a world vector
            Vec3 jw1 = w.transposed() * r1;
            Mat3 cov_bar = Mat3::outer(jw0, jw0) * ga + Mat3::outer(jw1, jw1) * gc +
                           (Mat3::outer(jw0, jw1) + Mat3::outer(jw1, jw0)) * gb;
            out.cov[k] = cov_bar;

            // J path: J_bar = 2 G J V3 (2x3), V3 symmetric
            Vec3 jv0 = v3 * r0, jv1 = v3 * r1;
            Vec3 jbar0 = (jv0 * ga + jv1 * gb) * 2.0;
            Vec3 jbar1 = (jv0 * gb + jv1 * gc) * 2.0;

            // mean path through projection and through J's position dependence
            Vec3 mc{};
            mc.x = a.u * j00 + jbar0.z * (-cam.fx * invz * invz);
            mc.y = a.v * j11 + jbar1.z * (-cam.fy * invz * invz);
            mc.z = a.u * (-cam.fx * pc.x * invz * invz) + a.v * (-cam.fy * pc.y * invz * invz) +
                   a.z + jbar0.x * (-cam.fx * invz * invz) + jbar1.y * (-cam.fy * invz * invz) +
                   jbar0.z * (2.0 * cam.fx * pc.x * invz * invz * invz) +
                   jbar1.z * (2.0 * cam.fy * pc.y * invz * invz * invz);
            out.mu[k] = w.transposed() * mc;
        }
    });
    return out;
}

void sobel_magnitude(const std::vector<double>& img, int width, int height,
                     std::vector<double>& mag) {
    mag.assign(img.size(), 0.0);
    auto at = [&](int x, int y) {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return img[std::size_t(y) * width + x];
    };
    parallel_ranges(std::size_t(height), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y)
            for (int x = 0; x < width; ++x) {
                double gx = -at(x - 1, int(y) - 1) + at(x + 1, int(y) - 1) -
                            2 * at(x - 1, int(y)) + 2 * at(x + 1, int(y)) -
                            at(x - 1, int(y) + 1) + at(x + 1, int(y) + 1);
                double gy = -at(x - 1, int(y) - 1) - 2 * at(x, int(y) - 1) -
                            at(x + 1, int(y) - 1) + at(x - 1, int(y) + 1) +
                            2 * at(x, int(y) + 1) + at(x + 1, int(y) + 1);
                mag[std::size_t(y) * width + x] = std::sqrt(gx * gx + gy * gy + 1e-12);
            }
    });
}

VisibilityMask visibility_mask(const RenderTarget& target,
                               const std::vector<RenderGaussian>& gaussians,
                               const CameraModel& cam, const RenderParams& params,
                               std::uint64_t seed) {
    const int w = target.width, h = target.height;
    const std::size_t npix = std::size_t(w) * h;
    VisibilityMask out;
    out.pixels.assign(npix, 0);

    std::vector<double> mag;
    sobel_magnitude(target.alpha, w, h, mag);
    std::vector<std::uint8_t> edges(npix, 0);
    for (std::size_t i = 0; i < npix; ++i) edges[i] = mag[i] > params.edge_threshold ? 1 : 0;

    const int r = params.dilate_radius;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool on = false;
            for (int dy = -r; dy <= r && !on; ++dy)
                for (int dx = -r; dx <= r && !on; ++dx) {
                    int xx = std::clamp(x + dx, 0, w - 1), yy = std::clamp(y + dy, 0, h - 1);
                    on = edges[std::size_t(yy) * w + xx] != 0;
                }
            std::size_t i = std::size_t(y) * w + x;
            out.pixels[i] = (on || target.depth[i] < target.far) ? 1 : 0;
        }

    std::size_t count = 0;
    for (auto v : out.pixels) count += v;
    double ratio = double(count) / double(npix);

    if (ratio < params.mask_low) {
        out.disabled = true;
        std::fill(out.pixels.begin(), out.pixels.end(), 1);
        out.area_ratio = 1.0;
    } else if (ratio > params.mask_high) {
        std::vector<std::uint32_t> on_idx;
        on_idx.reserve(count);
        for (std::size_t i = 0; i < npix; ++i)
            if (out.pixels[i]) on_idx.push_back(std::uint32_t(i));
        std::size_t keep = std::size_t(params.mask_high * npix);
        Rng rng = Rng::stream(seed, 0x3a5cULL);
        for (std::size_t i = 0; i < keep && i < on_idx.size(); ++i) {
            std::size_t j = i + rng.below(on_idx.size() - i);
            std::swap(on_idx[i], on_idx[j]);
        }
        std::fill(out.pixels.begin(), out.pixels.end(), 0);
        for (std::size_t i = 0; i < keep && i < on_idx.size(); ++i) out.pixels[on_idx[i]] = 1;
        out.area_ratio = double(std::min(keep, on_idx.size())) / double(npix);
    } else {
        out.area_ratio = ratio;
    }

    out.visible_gaussian.assign(gaussians.size(), 0);
    for (std::size_t k = 0; k < gaussians.size(); ++k) {
        if (target.vis_weighted[k] <= params.visible_contribution) continue;
        ProjectedGaussian pg = project(gaussians[k].mu, gaussians[k].cov, cam, params.aa_floor);
        if (pg.culled) continue;
        int px = int(std::lround(pg.mu2d.x)), py = int(std::lround(pg.mu2d.y));
        if (px < 0 || px >= w || py < 0 || py >= h) continue;
        if (out.pixel_on(std::size_t(py) * w + px)) out.visible_gaussian[k] = 1;
    }
    return out;
}

}  // namespace physmorph
