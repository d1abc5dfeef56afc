#pragma once

#include <functional>
#include <string>
#include <vector>

#include "physmorph/scene.hpp"

namespace physmorph {

// PCGrad, asymmetric: when the two gradients conflict, the render gradient
// is projected onto the normal plane of the physics gradient. The physics
// direction is never modified.
std::vector<double> pcgrad(const std::vector<double>& g_phys, const std::vector<double>& g_render);

// Sum of unit-normalized components; near-zero components are dropped.
std::vector<double> fuse(const std::vector<double>& g_phys, const std::vector<double>& g_render);

struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    void ensure(std::size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
            step = 0;
        }
    }
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               const OptimizerParams& opt);

double l2_norm(const std::vector<double>& v);
double dot(const std::vector<double>& a, const std::vector<double>& b);

// Per-pass diagnostics row (one CSV line each).
struct PassReport {
    int episode = 0;
    int pass = 0;
    double l_mass = 0, l_min = 0;
    double l_alpha = 0, l_depth = 0, l_edge = 0, l_shrink = 0;
    double l_total = 0;
    double g_phys_norm = 0, g_render_norm = 0;
    bool conflict = false;
    double mean_anisotropy = 0;
    std::size_t n_anchors = 0, n_render = 0;
};

std::string pass_report_csv_header();
std::string pass_report_csv_row(const PassReport& r);

// Optimization state that persists across episodes; checkpointing this
// struct resumes a run bit-exactly.
struct TrainState {
    ControlField controls;
    AdamState adam;
    std::vector<double> opacity_multiplier;  // per anchor, in [0.05, 1]
    int episode = 0;

    static TrainState fresh(const Scene& scene);
};

void save_train_state(const TrainState& s, const std::string& path);
TrainState load_train_state(const std::string& path);

// Frozen per-pass render structures (subdivision plan, interpolation
// footprint, visibility mask). Gradients and finite differences are taken
// with these held fixed.
struct RenderPipeline {
    BridgeState bridge;
    VisibilityMask mask;
    std::vector<RenderGaussian> gaussians;
    RenderTarget target;
    RenderLoss loss;
    bool active = false;  // false when all render weights are zero
};

// Rebuild the differentiable tail (render -> loss) for a trajectory final
// state, reusing the pipeline's frozen plan/footprint/mask.
RenderLoss render_pipeline_loss(const Scene& scene, RenderPipeline& pipe,
                                const std::vector<Vec3>& anchor_x,
                                const std::vector<Mat3>& anchor_F,
                                const std::vector<double>& multiplier);

// Full chained gradient of the render loss with respect to the controls:
// splat backward -> covariance backward -> bridge scatter -> MPM adjoint.
struct RenderChainResult {
    std::vector<double> grad_controls;     // flattened
    std::vector<double> grad_multiplier;   // per anchor
};
RenderChainResult chain_render_to_controls(const Scene& scene, const Tape& tape,
                                           RenderPipeline& pipe,
                                           const std::vector<double>& multiplier);

// Upsampled render gaussians for a particle state (anchors first, then the
// plan's children); plan_seed selects the frozen subdivision pattern.
std::vector<RenderGaussian> build_render_gaussians(const Scene& scene, const ParticleState& state,
                                                   const std::vector<double>& multiplier,
                                                   std::uint64_t plan_seed,
                                                   BridgeState* out_bridge = nullptr);

struct EpisodeResult {
    std::vector<PassReport> passes;
    Tape last_tape;  // trajectory of the final pass
};

struct TrainHooks {
    // called after every episode with the updated state and last trajectory
    std::function<void(int, const TrainState&, const EpisodeResult&)> on_episode;
    // called per pass with the raw physics gradient and the projected
    // render gradient, before their fusion
    std::function<void(const PassReport&, const std::vector<double>&, const std::vector<double>&)>
        on_pass;
};

EpisodeResult run_episode(const Scene& scene, TrainState& state, int episode_index,
                          const TrainHooks& hooks = {});

std::vector<PassReport> run_training(const Scene& scene, TrainState& state, int episodes,
                                     const TrainHooks& hooks = {});

}  // namespace physmorph
