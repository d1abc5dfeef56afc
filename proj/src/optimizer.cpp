#include "physmorph/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "physmorph/io_util.hpp"
#include "physmorph/parallel.hpp"

namespace physmorph {

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> pcgrad(const std::vector<double>& g_phys,
                           const std::vector<double>& g_render) {
    if (g_phys.size() != g_render.size()) throw std::invalid_argument("pcgrad: shape mismatch");
    double denom = dot(g_phys, g_phys);
    if (denom == 0.0) return g_render;
    double d = dot(g_phys, g_render);
    if (d >= 0.0) return g_render;
    std::vector<double> out(g_render.size());
    double scale = d / denom;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g_render[i] - scale * g_phys[i];
    return out;
}

std::vector<double> fuse(const std::vector<double>& g_phys, const std::vector<double>& g_render) {
    if (g_phys.size() != g_render.size()) throw std::invalid_argument("fuse: shape mismatch");
    std::vector<double> out(g_phys.size(), 0.0);
    double np = l2_norm(g_phys), nr = l2_norm(g_render);
    if (np >= 1e-12)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g_phys[i] / np;
    if (nr >= 1e-12)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g_render[i] / nr;
    return out;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               const OptimizerParams& opt) {
    if (params.size() != grad.size()) throw std::invalid_argument("adam_step: shape mismatch");
    state.ensure(params.size());
    ++state.step;
    double bc1 = 1.0 - std::pow(opt.beta1, double(state.step));
    double bc2 = 1.0 - std::pow(opt.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * grad[i];
        state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
}

std::string pass_report_csv_header() {
    return "episode,pass,l_mass,l_min,l_alpha,l_depth,l_edge,l_shrink,l_total,"
           "g_phys_norm,g_render_norm,conflict,mean_anisotropy,n_anchors,n_render";
}

std::string pass_report_csv_row(const PassReport& r) {
    std::string s;
    s += std::to_string(r.episode) + "," + std::to_string(r.pass) + ",";
    s += format_double(r.l_mass) + "," + format_double(r.l_min) + ",";
    s += format_double(r.l_alpha) + "," + format_double(r.l_depth) + ",";
    s += format_double(r.l_edge) + "," + format_double(r.l_shrink) + ",";
    s += format_double(r.l_total) + ",";
    s += format_double(r.g_phys_norm) + "," + format_double(r.g_render_norm) + ",";
    s += std::string(r.conflict ? "1" : "0") + ",";
    s += format_double(r.mean_anisotropy) + ",";
    s += std::to_string(r.n_anchors) + "," + std::to_string(r.n_render);
    return s;
}

TrainState TrainState::fresh(const Scene& scene) {
    TrainState s;
    s.controls = ControlField::zeros(scene.initial.size(), scene.config.timesteps,
                                     scene.config.control_stride);
    s.opacity_multiplier.assign(scene.initial.size(), 1.0);
    s.episode = 0;
    return s;
}

void save_train_state(const TrainState& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_train_state: cannot open " + path);
    os.write("PMTS", 4);
    write_u32_le(os, 1);
    write_u32_le(os, std::uint32_t(s.episode));
    write_u32_le(os, std::uint32_t(s.controls.stride));
    write_u64_le(os, s.controls.steps.size());
    write_u64_le(os, s.controls.steps.empty() ? 0 : s.controls.steps.front().size());
    for (const auto& slot : s.controls.steps)
        for (const Mat3& m : slot)
            for (double e : m.m) write_f64_le(os, e);
    write_u64_le(os, s.adam.m.size());
    write_u64_le(os, std::uint64_t(s.adam.step));
    for (double v : s.adam.m) write_f64_le(os, v);
    for (double v : s.adam.v) write_f64_le(os, v);
    write_u64_le(os, s.opacity_multiplier.size());
    for (double v : s.opacity_multiplier) write_f64_le(os, v);
    if (!os) throw std::runtime_error("save_train_state: write failed");
}

TrainState load_train_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_train_state: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "PMTS", 4) != 0)
        throw std::runtime_error("load_train_state: bad magic");
    std::uint32_t version, episode, stride;
    std::uint64_t slots, particles, adam_n, adam_step_count, mult_n;
    if (!read_u32_le(is, version) || version != 1)
        throw std::runtime_error("load_train_state: unsupported version");
    read_u32_le(is, episode);
    read_u32_le(is, stride);
    read_u64_le(is, slots);
    read_u64_le(is, particles);
    TrainState s;
    s.episode = int(episode);
    s.controls.stride = int(stride);
    s.controls.steps.assign(slots, std::vector<Mat3>(particles));
    for (auto& slot : s.controls.steps)
        for (Mat3& m : slot)
            for (double& e : m.m)
                if (!read_f64_le(is, e)) throw std::runtime_error("load_train_state: truncated");
    read_u64_le(is, adam_n);
    read_u64_le(is, adam_step_count);
    s.adam.step = long(adam_step_count);
    s.adam.m.resize(adam_n);
    s.adam.v.resize(adam_n);
    for (double& v : s.adam.m)
        if (!read_f64_le(is, v)) throw std::runtime_error("load_train_state: truncated");
    for (double& v : s.adam.v)
        if (!read_f64_le(is, v)) throw std::runtime_error("load_train_state: truncated");
    read_u64_le(is, mult_n);
    s.opacity_multiplier.resize(mult_n);
    for (double& v : s.opacity_multiplier)
        if (!read_f64_le(is, v)) throw std::runtime_error("load_train_state: truncated");
    return s;
}

namespace {

std::uint64_t pass_seed(const Scene& scene, int episode, int pass) {
    return scene.config.seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t(episode) * 131 + pass + 1);
}

std::vector<double> flatten_controls(const ControlField& c) { return c.to_flat(); }

// gaussians for the current anchor state: anchors first, then children;
// anchors use sigma_anchor, children sigma_child; the opacity multiplier is
// inherited from the parent anchor
std::vector<RenderGaussian> make_gaussians(const Scene& scene, const BridgeState& bridge,
                                           const std::vector<double>& multiplier) {
    const auto& cfg = scene.config;
    std::vector<RenderGaussian> out(bridge.render_count());
    parallel_ranges(bridge.render_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            double s = bridge.is_child(j) ? cfg.cov.sigma_child : cfg.cov.sigma_anchor;
            out[j].mu = bridge.render_x[j];
            out[j].cov = build_covariance(bridge.f_final[j], s, cfg.cov);
            out[j].opacity = cfg.opacity * multiplier[bridge.parent_of(j)];
            out[j].color = cfg.particle_color;
        }
    });
    return out;
}

bool render_weights_active(const LossWeights& w) {
    return w.w_alpha != 0.0 || w.w_depth != 0.0 || w.w_edge != 0.0 || w.w_shrink != 0.0;
}

RenderPipeline build_render_pipeline(const Scene& scene, const ParticleState& state,
                                     const std::vector<double>& multiplier, std::uint64_t seed) {
    RenderPipeline pipe;
    pipe.bridge = build_bridge(state.x, state.F, scene.config.bridge, seed);
    pipe.gaussians = make_gaussians(scene, pipe.bridge, multiplier);
    pipe.active = render_weights_active(scene.config.weights);
    if (pipe.active) {
        pipe.target = render(pipe.gaussians, scene.config.camera, scene.config.render);
        pipe.mask = visibility_mask(pipe.target, pipe.gaussians, scene.config.camera,
                                    scene.config.render, seed);
        std::vector<double> mult_per_gaussian(pipe.bridge.render_count());
        for (std::size_t j = 0; j < mult_per_gaussian.size(); ++j)
            mult_per_gaussian[j] = multiplier[pipe.bridge.parent_of(j)];
        pipe.loss = render_loss(pipe.target, scene.target_images, pipe.mask, mult_per_gaussian,
                                scene.config.weights, scene.config.camera.near,
                                scene.config.camera.far);
    }
    return pipe;
}

}  // namespace

std::vector<RenderGaussian> build_render_gaussians(const Scene& scene, const ParticleState& state,
                                                   const std::vector<double>& multiplier,
                                                   std::uint64_t plan_seed,
                                                   BridgeState* out_bridge) {
    BridgeState bridge = build_bridge(state.x, state.F, scene.config.bridge, plan_seed);
    std::vector<RenderGaussian> out = make_gaussians(scene, bridge, multiplier);
    if (out_bridge) *out_bridge = std::move(bridge);
    return out;
}

RenderLoss render_pipeline_loss(const Scene& scene, RenderPipeline& pipe,
                                const std::vector<Vec3>& anchor_x,
                                const std::vector<Mat3>& anchor_F,
                                const std::vector<double>& multiplier) {
    // refresh positions and interpolated F under the frozen plan/footprint
    pipe.bridge.render_x = anchor_x;
    std::vector<Vec3> child_x = spawn_children(pipe.bridge.plan, anchor_x);
    pipe.bridge.render_x.insert(pipe.bridge.render_x.end(), child_x.begin(), child_x.end());
    bridge_forward(pipe.bridge, anchor_F);
    pipe.gaussians = make_gaussians(scene, pipe.bridge, multiplier);
    pipe.target = render(pipe.gaussians, scene.config.camera, scene.config.render);

    std::vector<double> mult_per_gaussian(pipe.bridge.render_count());
    for (std::size_t j = 0; j < mult_per_gaussian.size(); ++j)
        mult_per_gaussian[j] = multiplier[pipe.bridge.parent_of(j)];
    pipe.loss = render_loss(pipe.target, scene.target_images, pipe.mask, mult_per_gaussian,
                            scene.config.weights, scene.config.camera.near,
                            scene.config.camera.far);
    return pipe.loss;
}

RenderChainResult chain_render_to_controls(const Scene& scene, const Tape& tape,
                                           RenderPipeline& pipe,
                                           const std::vector<double>& multiplier) {
    const auto& cfg = scene.config;
    const std::size_t n_anchor = tape.final_state().size();

    ImageGradients ig;
    ig.alpha = pipe.loss.grad_alpha;
    ig.depth = pipe.loss.grad_depth;
    GaussianGradients gg =
        render_backward(pipe.gaussians, cfg.camera, cfg.render, pipe.target, ig);

    // covariance backward per render particle
    std::vector<Mat3> grad_f_final(pipe.bridge.render_count());
    parallel_ranges(pipe.bridge.render_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            double s = pipe.bridge.is_child(j) ? cfg.cov.sigma_child : cfg.cov.sigma_anchor;
            grad_f_final[j] = covariance_backward(pipe.bridge.f_final[j], s, gg.cov[j], cfg.cov);
        }
    });

    AnchorGradients anchor = scatter_gradients(pipe.bridge, grad_f_final, gg.mu);

    FinalGradients seed;
    seed.x = anchor.x;
    seed.F = anchor.F;
    AdjointResult adj = adjoint(tape, seed);

    RenderChainResult out;
    out.grad_controls = adj.control_grads.to_flat();

    // opacity path: gaussian opacity = base * multiplier[parent]; the shrink
    // term already carries its own per-gaussian multiplier gradient
    out.grad_multiplier.assign(n_anchor, 0.0);
    for (std::size_t j = 0; j < pipe.bridge.render_count(); ++j) {
        int parent = pipe.bridge.parent_of(j);
        out.grad_multiplier[parent] += gg.opacity[j] * cfg.opacity;
        if (!pipe.loss.grad_multiplier.empty())
            out.grad_multiplier[parent] += pipe.loss.grad_multiplier[j];
    }
    return out;
}

namespace {

PassReport run_pass(const Scene& scene, TrainState& state, int episode, int pass, Tape& tape_out,
                    const TrainHooks& hooks) {
    const auto& cfg = scene.config;
    PassReport report;
    report.episode = episode;
    report.pass = pass;
    report.n_anchors = scene.initial.size();

    Tape tape = simulate(scene.initial, state.controls, cfg.sim, cfg.timesteps);
    PhysicsLoss phys = physics_loss(tape.final_grid.mass, scene.target_mass, cfg.phys);
    FinalGradients phys_seed;
    phys_seed.grid_mass = phys.grad;
    std::vector<double> g_phys = adjoint(tape, phys_seed).control_grads.to_flat();

    report.l_mass = phys.mass_term;
    report.l_min = phys.min_term;
    report.g_phys_norm = l2_norm(g_phys);

    RenderPipeline pipe = build_render_pipeline(scene, tape.final_state(), state.opacity_multiplier,
                                                pass_seed(scene, episode, pass));
    report.n_render = pipe.bridge.render_count();
    if (!pipe.gaussians.empty()) {
        double acc = 0.0;
        for (const auto& g : pipe.gaussians) acc += anisotropy(g.cov);
        report.mean_anisotropy = acc / double(pipe.gaussians.size());
    }

    std::vector<double> g_render(g_phys.size(), 0.0);
    std::vector<double> g_mult;
    const bool render_on = pipe.active && pass >= 2;
    if (render_on) {
        RenderChainResult chain = chain_render_to_controls(scene, tape, pipe,
                                                           state.opacity_multiplier);
        g_render = std::move(chain.grad_controls);
        g_mult = std::move(chain.grad_multiplier);
        report.l_alpha = pipe.loss.alpha_term;
        report.l_depth = pipe.loss.depth_term;
        report.l_edge = pipe.loss.edge_term;
        report.l_shrink = pipe.loss.shrink_term;
    } else if (pipe.active) {
        // pass 1 reports the render losses it observed without stepping them
        report.l_alpha = pipe.loss.alpha_term;
        report.l_depth = pipe.loss.depth_term;
        report.l_edge = pipe.loss.edge_term;
        report.l_shrink = pipe.loss.shrink_term;
    }
    report.g_render_norm = l2_norm(g_render);
    report.conflict = dot(g_phys, g_render) < 0.0;
    report.l_total = cfg.phys.w_mass * report.l_mass + cfg.phys.w_min * report.l_min +
                     cfg.weights.w_alpha * report.l_alpha + cfg.weights.w_depth * report.l_depth +
                     cfg.weights.w_edge * report.l_edge + cfg.weights.w_shrink * report.l_shrink;

    std::vector<double> projected = pcgrad(g_phys, g_render);
    if (hooks.on_pass) hooks.on_pass(report, g_phys, projected);
    std::vector<double> g = fuse(g_phys, pass == 1 ? std::vector<double>(g_phys.size(), 0.0)
                                                   : projected);
    if (pass >= 2 || cfg.opt.pass1_step) {
        bool stepped = false;
        if (cfg.opt.line_search) {
            // backtracking on the fused direction; falls back to Adam when
            // no step length improves the merit within 15 halvings
            auto merit = [&](const ControlField& ctrl) {
                Tape t = simulate(scene.initial, ctrl, cfg.sim, cfg.timesteps);
                PhysicsLoss ph = physics_loss(t.final_grid.mass, scene.target_mass, cfg.phys);
                double m = ph.total;
                if (render_on)
                    m += render_pipeline_loss(scene, pipe, t.final_state().x,
                                              t.final_state().F, state.opacity_multiplier)
                             .total;
                return m;
            };
            double merit0 = phys.total + (render_on ? report.l_alpha * cfg.weights.w_alpha +
                                                          report.l_depth * cfg.weights.w_depth +
                                                          report.l_edge * cfg.weights.w_edge +
                                                          report.l_shrink * cfg.weights.w_shrink
                                                    : 0.0);
            std::vector<double> flat = flatten_controls(state.controls);
            double eta = cfg.opt.lr;
            for (int it = 0; it < 15 && !stepped; ++it, eta *= 0.5) {
                ControlField trial = state.controls;
                std::vector<double> tf = flat;
                for (std::size_t i = 0; i < tf.size(); ++i) tf[i] -= eta * g[i];
                trial.from_flat(tf);
                if (merit(trial) < merit0) {
                    state.controls = std::move(trial);
                    stepped = true;
                }
            }
        }
        if (!stepped) {
            std::vector<double> flat = flatten_controls(state.controls);
            adam_step(flat, g, state.adam, cfg.opt);
            state.controls.from_flat(flat);
        }
    }
    if (render_on && !g_mult.empty()) {
        for (std::size_t i = 0; i < state.opacity_multiplier.size(); ++i) {
            state.opacity_multiplier[i] = std::clamp(
                state.opacity_multiplier[i] - cfg.opt.multiplier_lr * g_mult[i], 0.05, 1.0);
        }
    }

    tape_out = std::move(tape);
    return report;
}

}  // namespace

EpisodeResult run_episode(const Scene& scene, TrainState& state, int episode_index,
                          const TrainHooks& hooks) {
    EpisodeResult result;
    for (int pass = 1; pass <= scene.config.opt.passes; ++pass) {
        Tape tape;
        result.passes.push_back(run_pass(scene, state, episode_index, pass, tape, hooks));
        result.last_tape = std::move(tape);
    }
    // episode-level smoothing: decay the accumulated control
    double gamma = scene.config.gamma;
    for (auto& slot : state.controls.steps)
        for (Mat3& m : slot) m *= gamma;
    state.episode = episode_index + 1;
    return result;
}

std::vector<PassReport> run_training(const Scene& scene, TrainState& state, int episodes,
                                     const TrainHooks& hooks) {
    std::vector<PassReport> reports;
    for (int e = state.episode; e < episodes; ++e) {
        EpisodeResult res = run_episode(scene, state, e, hooks);
        reports.insert(reports.end(), res.passes.begin(), res.passes.end());
        if (hooks.on_episode) hooks.on_episode(e, state, res);
    }
    return reports;
}

}  // namespace physmorph
