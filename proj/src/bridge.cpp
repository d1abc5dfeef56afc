#include "physmorph/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "physmorph/parallel.hpp"
#include "physmorph/rng.hpp"

namespace physmorph {

double deformation_magnitude(const Mat3& F) { return std::abs(F.determinant() - 1.0); }

std::vector<int> allocate_children(const std::vector<double>& d, int m_child, int cap,
                                   double uniform_threshold) {
    const std::size_t n = d.size();
    std::vector<int> counts(n, 0);
    if (n == 0 || m_child <= 0) return counts;

    double sum = 0.0;
    for (double v : d) sum += v;
    double mean = sum / double(n);

    if (mean < uniform_threshold || sum <= 0.0) {
        int base = m_child / int(n);
        int rem = m_child - base * int(n);
        for (std::size_t i = 0; i < n; ++i)
            counts[i] = std::min(base + (int(i) < rem ? 1 : 0), cap);
        return counts;
    }
    for (std::size_t i = 0; i < n; ++i)
        counts[i] = std::min(int(std::floor(d[i] / sum * m_child)), cap);
    return counts;
}

std::vector<double> local_spacing(const std::vector<Vec3>& anchors, int k_spacing,
                                  double dist_floor) {
    const std::size_t n = anchors.size();
    int k = std::min(k_spacing, int(n) - 1);
    std::vector<double> h(n, dist_floor);
    if (k < 1) return h;

    SpatialIndex index(anchors);
    parallel_ranges(n, [&](std::size_t begin, std::size_t end) {
        std::vector<SpatialIndex::Neighbor> nb;
        for (std::size_t i = begin; i < end; ++i) {
            index.query(anchors[i], k + 1, nb);
            double acc = 0.0;
            int used = 0;
            for (const auto& cand : nb) {
                if (cand.index == int(i)) continue;
                acc += std::sqrt(cand.dist_sq);
                if (++used == k) break;
            }
            h[i] = std::max(used > 0 ? acc / used : 0.0, dist_floor);
        }
    });
    return h;
}

SubdivisionPlan make_plan(const std::vector<Vec3>& anchor_x, const std::vector<Mat3>& anchor_F,
                          const BridgeParams& params, std::uint64_t seed) {
    const std::size_t n = anchor_x.size();
    if (anchor_F.size() != n) throw std::invalid_argument("make_plan: size mismatch");

    SubdivisionPlan plan;
    plan.spacing = local_spacing(anchor_x, params.k_spacing, params.spacing_floor);

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = deformation_magnitude(anchor_F[i]);

    int m_uniform = int(std::floor(params.uniform_mix * params.m_child));
    plan.counts = allocate_children(d, params.m_child - m_uniform, params.child_cap,
                                    params.uniform_threshold);
    if (m_uniform > 0 && n > 0) {
        int base = m_uniform / int(n);
        int rem = m_uniform - base * int(n);
        for (std::size_t i = 0; i < n; ++i) {
            plan.counts[i] =
                std::min(plan.counts[i] + base + (int(i) < rem ? 1 : 0), params.child_cap);
        }
    }

    Rng rng = Rng::stream(seed, 0xb41d6e);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < plan.counts[i]; ++c) {
            Vec3 e = rng.unit_vector();
            plan.children.push_back({int(i), e * (params.jitter * plan.spacing[i])});
        }
    }
    return plan;
}

std::vector<Vec3> spawn_children(const SubdivisionPlan& plan, const std::vector<Vec3>& anchor_x) {
    std::vector<Vec3> out(plan.children.size());
    parallel_ranges(plan.children.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c)
            out[c] = anchor_x[plan.children[c].parent] + plan.children[c].offset;
    });
    return out;
}

InterpFootprint build_footprint(const std::vector<Vec3>& anchor_x,
                                const std::vector<Vec3>& render_x, const BridgeParams& params) {
    InterpFootprint fp;
    fp.render_count = render_x.size();
    fp.k_coarse = std::min(params.k_coarse, int(anchor_x.size()));
    fp.k_fine = std::min(params.k_fine, int(anchor_x.size()));
    KnnResult coarse = knn(anchor_x, render_x, fp.k_coarse, params.eta);
    KnnResult fine = knn(anchor_x, render_x, fp.k_fine, params.eta);
    fp.coarse_idx = std::move(coarse.indices);
    fp.coarse_w = std::move(coarse.weights);
    fp.fine_idx = std::move(fine.indices);
    fp.fine_w = std::move(fine.weights);
    return fp;
}

void interpolate_F(const std::vector<Mat3>& anchor_F, const InterpFootprint& fp,
                   std::vector<Mat3>& f_coarse, std::vector<Mat3>& f_fine) {
    f_coarse.assign(fp.render_count, Mat3::zero());
    f_fine.assign(fp.render_count, Mat3::zero());
    parallel_ranges(fp.render_count, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            Mat3 fc = Mat3::zero(), ff = Mat3::zero();
            for (int s = 0; s < fp.k_coarse; ++s)
                fc += anchor_F[fp.coarse_idx[j * fp.k_coarse + s]] * fp.coarse_w[j * fp.k_coarse + s];
            for (int s = 0; s < fp.k_fine; ++s)
                ff += anchor_F[fp.fine_idx[j * fp.k_fine + s]] * fp.fine_w[j * fp.k_fine + s];
            f_coarse[j] = fc;
            f_fine[j] = ff;
        }
    });
}

namespace {

inline double sigmoid(double z) {
    if (z > 30.0) return 1.0;
    if (z < -30.0) return std::exp(z);
    return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

BlendResult blend(const Mat3& f_coarse, const Mat3& f_fine, const BridgeParams& params) {
    if (!(params.tau > 0.0)) throw std::invalid_argument("blend: tau must be positive");
    double dc = deformation_magnitude(f_coarse);
    double df = deformation_magnitude(f_fine);
    double a = std::clamp(sigmoid((dc - df) / params.tau), params.alpha_min, params.alpha_max);
    return {f_coarse * a + f_fine * (1.0 - a), a};
}

BridgeState build_bridge(const std::vector<Vec3>& anchor_x, const std::vector<Mat3>& anchor_F,
                         const BridgeParams& params, std::uint64_t seed) {
    BridgeState st;
    st.params = params;
    st.anchor_count = anchor_x.size();
    st.plan = make_plan(anchor_x, anchor_F, params, seed);

    st.render_x = anchor_x;
    std::vector<Vec3> child_x = spawn_children(st.plan, anchor_x);
    st.render_x.insert(st.render_x.end(), child_x.begin(), child_x.end());

    st.footprint = build_footprint(anchor_x, st.render_x, params);
    bridge_forward(st, anchor_F);
    return st;
}

void bridge_forward(BridgeState& st, const std::vector<Mat3>& anchor_F) {
    interpolate_F(anchor_F, st.footprint, st.f_coarse, st.f_fine);
    st.f_final.resize(st.render_count());
    st.alpha.resize(st.render_count());
    parallel_ranges(st.render_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            BlendResult b = blend(st.f_coarse[j], st.f_fine[j], st.params);
            st.f_final[j] = b.f_final;
            st.alpha[j] = b.alpha;
        }
    });
}

AnchorGradients scatter_gradients(const BridgeState& st, const std::vector<Mat3>& grad_f_final,
                                  const std::vector<Vec3>& grad_mu) {
    const std::size_t n_render = st.render_count();
    const std::size_t n_anchor = st.anchor_count;
    if (grad_f_final.size() != n_render || grad_mu.size() != n_render)
        throw std::invalid_argument("scatter_gradients: gradient size mismatch");
    const InterpFootprint& fp = st.footprint;
    const BridgeParams& p = st.params;

    const std::size_t chunks = chunk_count(n_render);
    struct Accum {
        std::vector<Mat3> f;
        std::vector<Vec3> x;
    };
    std::vector<Accum> acc(chunks);
    for (auto& a : acc) {
        a.f.assign(n_anchor, Mat3::zero());
        a.x.assign(n_anchor, Vec3{});
    }

    parallel_chunks(n_render, [&](std::size_t c, std::size_t begin, std::size_t end) {
        Accum& a = acc[c];
        for (std::size_t j = begin; j < end; ++j) {
            const Mat3& g = grad_f_final[j];

            // alpha path: F_final = a Fc + (1-a) Ff, a = clamp(sigmoid(z))
            double dc = deformation_magnitude(st.f_coarse[j]);
            double df = deformation_magnitude(st.f_fine[j]);
            double z = (dc - df) / p.tau;
            double s = sigmoid(z);
            double alpha = st.alpha[j];
            double dalpha_dz = (s > p.alpha_min && s < p.alpha_max) ? s * (1.0 - s) : 0.0;
            double alpha_bar = frobenius_dot(g, st.f_coarse[j] - st.f_fine[j]);

            Mat3 gc = g * alpha;
            Mat3 gf = g * (1.0 - alpha);
            if (dalpha_dz != 0.0) {
                double zc = alpha_bar * dalpha_dz / p.tau;
                double det_c = st.f_coarse[j].determinant();
                double det_f = st.f_fine[j].determinant();
                double sign_c = det_c > 1.0 ? 1.0 : (det_c < 1.0 ? -1.0 : 0.0);
                double sign_f = det_f > 1.0 ? 1.0 : (det_f < 1.0 ? -1.0 : 0.0);
                gc += st.f_coarse[j].cofactor() * (zc * sign_c);
                gf -= st.f_fine[j].cofactor() * (zc * sign_f);
            }

            for (int sdx = 0; sdx < fp.k_coarse; ++sdx)
                a.f[fp.coarse_idx[j * fp.k_coarse + sdx]] += gc * fp.coarse_w[j * fp.k_coarse + sdx];
            for (int sdx = 0; sdx < fp.k_fine; ++sdx)
                a.f[fp.fine_idx[j * fp.k_fine + sdx]] += gf * fp.fine_w[j * fp.k_fine + sdx];

            // render mean path: unit Jacobian onto the parent position
            a.x[st.parent_of(j)] += grad_mu[j];
        }
    });

    AnchorGradients out;
    out.F.assign(n_anchor, Mat3::zero());
    out.x.assign(n_anchor, Vec3{});
    parallel_ranges(n_anchor, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t c = 0; c < chunks; ++c) {
                out.F[i] += acc[c].f[i];
                out.x[i] += acc[c].x[i];
            }
        }
    });
    return out;
}

}  // namespace physmorph
