#include "physmorph/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <CLI11.hpp>

#include "physmorph/image_io.hpp"
#include "physmorph/io_util.hpp"
#include "physmorph/metrics.hpp"
#include "physmorph/optimizer.hpp"
#include "physmorph/parallel.hpp"
#include "physmorph/snapshot.hpp"

namespace physmorph {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;  // 0 = hardware concurrency
    std::string out_dir;
    int episodes = -1;
    double resolution_scale = 1.0;
};

void apply_flags(ExperimentConfig& cfg, const CommonFlags& flags) {
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.episodes >= 0) cfg.episodes = flags.episodes;
    if (flags.resolution_scale != 1.0) cfg.camera.scale_resolution(flags.resolution_scale);

    int threads = flags.threads;
    if (const char* env = std::getenv("PHYSMORPH_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = int(std::thread::hardware_concurrency());
    set_thread_count(std::max(1, threads));
}

std::string episode_tag(int e) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", e);
    return buf;
}

void write_frames(const Scene& scene, const std::vector<RenderGaussian>& gaussians,
                  const std::string& prefix) {
    RenderTarget rt = render(gaussians, scene.config.camera, scene.config.render);
    write_pgm16(prefix + "_alpha.pgm", rt.alpha, rt.width, rt.height, 0.0, 1.0);
    write_pgm16(prefix + "_depth.pgm", rt.depth, rt.width, rt.height, scene.config.camera.near,
                scene.config.camera.far);
    write_ppm(prefix + "_color.ppm", rt.color, rt.width, rt.height);
}

int cmd_run(const std::string& config_path, const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    apply_flags(cfg, flags);
    fs::create_directories(cfg.out_dir);
    save_config(cfg, cfg.out_dir + "/config_resolved.json");

    Scene scene = build_scene(cfg);
    std::ofstream log(cfg.out_dir + "/train_log.csv", std::ios::binary);
    log << pass_report_csv_header() << "\n";

    TrainState state = TrainState::fresh(scene);
    TrainHooks hooks;
    hooks.on_episode = [&](int episode, const TrainState& s, const EpisodeResult& res) {
        for (const PassReport& r : res.passes) log << pass_report_csv_row(r) << "\n";
        log.flush();
        std::string tag = episode_tag(episode);
        export_snapshot(res.last_tape.final_state(), cfg.out_dir + "/snapshot_" + tag + ".pmgs");
        save_train_state(s, cfg.out_dir + "/checkpoint_" + tag + ".bin");
        std::uint64_t frame_seed =
            cfg.seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t(episode) * 131 + cfg.opt.passes + 1);
        std::vector<RenderGaussian> gs = build_render_gaussians(
            scene, res.last_tape.final_state(), s.opacity_multiplier, frame_seed);
        write_frames(scene, gs, cfg.out_dir + "/frame_" + tag);
        std::printf("episode %d done: L_total %s\n", episode,
                    format_double(res.passes.back().l_total).c_str());
    };

    run_training(scene, state, cfg.episodes, hooks);
    std::printf("run complete: %d episodes, outputs in %s\n", cfg.episodes, cfg.out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& snapshot_path,
             const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    apply_flags(cfg, flags);
    fs::create_directories(cfg.out_dir);

    Scene scene = build_scene(cfg);
    ParticleState state = import_snapshot(snapshot_path);
    std::vector<double> mult(state.size(), 1.0);
    std::vector<RenderGaussian> gs = build_render_gaussians(scene, state, mult, cfg.seed);

    std::vector<double> vis = multiview_visibility(gs, cfg.camera, cfg.render);
    PointSample predicted = sample_cloud_shell(gs, vis, cfg.chamfer_samples, cfg.seed);
    PointSample target = sample_surface(*scene.target_shape, cfg.chamfer_samples, cfg.seed);
    double cd = chamfer(predicted.points, target.points);
    GaussianStats st = stats(gs, state.size());

    std::string csv_path = cfg.out_dir + "/eval.csv";
    bool fresh = !fs::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::binary | std::ios::app);
    if (fresh)
        csv << "snapshot,chamfer,mean_anisotropy,median_anisotropy,n_anchors,n_render\n";
    csv << fs::path(snapshot_path).filename().string() << "," << format_double(cd) << ","
        << format_double(st.mean_anisotropy) << "," << format_double(st.median_anisotropy) << ","
        << st.anchor_count << "," << st.render_count << "\n";

    std::printf("chamfer %s  mean_anisotropy %s  anchors %zu  render %zu\n",
                format_double(cd).c_str(), format_double(st.mean_anisotropy).c_str(),
                st.anchor_count, st.render_count);
    return 0;
}

int cmd_render(const std::string& config_path, const std::string& snapshot_path,
               const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    apply_flags(cfg, flags);
    fs::create_directories(cfg.out_dir);

    Scene scene = build_scene(cfg);
    ParticleState state = import_snapshot(snapshot_path);
    std::vector<double> mult(state.size(), 1.0);
    std::vector<RenderGaussian> gs = build_render_gaussians(scene, state, mult, cfg.seed);
    write_frames(scene, gs, cfg.out_dir + "/render");
    std::printf("frames written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_targets(const std::string& config_path, const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    apply_flags(cfg, flags);
    fs::create_directories(cfg.out_dir);

    Scene scene = build_scene(cfg);
    const auto& t = scene.target_images;
    write_pgm16(cfg.out_dir + "/target_alpha.pgm", t.alpha, t.width, t.height, 0.0, 1.0);
    write_pgm16(cfg.out_dir + "/target_depth.pgm", t.depth, t.width, t.height, cfg.camera.near,
                cfg.camera.far);

    // middle slices of the target mass grid, normalized to the peak
    int res = cfg.sim.grid_resolution;
    double peak = 0.0;
    for (double m : scene.target_mass.mass) peak = std::max(peak, m);
    if (peak <= 0.0) peak = 1.0;
    auto node = [&](int i, int j, int k) {
        return scene.target_mass.mass[(std::size_t(i) * res + j) * res + k];
    };
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> slice(std::size_t(res) * res);
        int mid = res / 2;
        for (int a = 0; a < res; ++a)
            for (int b = 0; b < res; ++b) {
                double v = axis == 0 ? node(mid, a, b) : axis == 1 ? node(a, mid, b)
                                                                   : node(a, b, mid);
                slice[std::size_t(a) * res + b] = v;
            }
        const char* names[3] = {"/target_mass_x.pgm", "/target_mass_y.pgm", "/target_mass_z.pgm"};
        write_pgm16(cfg.out_dir + names[axis], slice, res, res, 0.0, peak);
    }
    std::printf("targets written to %s\n", cfg.out_dir.c_str());
    return 0;
}

// --- gradient check suites -------------------------------------------------

double rel_err(double a, double b) {
    double d = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / d;
}

double suite_svd_backward(Rng& rng) {
    double worst = 0.0;
    const double h = 1e-5;
    int kept = 0;
    while (kept < 20) {
        Mat3 f;
        for (double& e : f.m) e = rng.uniform(-1, 1);
        Svd3 s = svd3(f);
        double gap = std::min({std::abs(s.sigma.x - s.sigma.y), std::abs(s.sigma.y - s.sigma.z)});
        if (gap < 0.05 || s.sigma.z < 0.05) continue;
        ++kept;
        Mat3 wu, wv;
        for (double& e : wu.m) e = rng.uniform(-1, 1);
        for (double& e : wv.m) e = rng.uniform(-1, 1);
        Vec3 ws = rng.normal3();
        auto loss = [&](const Mat3& m) {
            Svd3 sv = svd3(m);
            return frobenius_dot(wu, sv.u) + physmorph::dot(ws, sv.sigma) +
                   frobenius_dot(wv, sv.v);
        };
        Mat3 analytic = svd_backward(s, wu, ws, wv);
        for (int i = 0; i < 9; ++i) {
            Mat3 fp = f, fm = f;
            fp.m[i] += h;
            fm.m[i] -= h;
            worst = std::max(worst, rel_err((loss(fp) - loss(fm)) / (2 * h), analytic.m[i]));
        }
    }
    return worst;
}

double suite_stress_backward(Rng& rng) {
    double worst = 0.0;
    const double h = 1e-6;
    for (int t = 0; t < 20; ++t) {
        Mat3 f = Mat3::identity();
        for (double& e : f.m) e += rng.uniform(-0.25, 0.25);
        if (f.determinant() < 0.3) continue;
        Mat3 w;
        for (double& e : w.m) e = rng.uniform(-1, 1);
        Mat3 analytic = compute_stress_backward(f, w, 1e3, 2e4);
        for (int i = 0; i < 9; ++i) {
            Mat3 fp = f, fm = f;
            fp.m[i] += h;
            fm.m[i] -= h;
            double fd = (frobenius_dot(w, compute_stress(fp, 1e3, 2e4)) -
                         frobenius_dot(w, compute_stress(fm, 1e3, 2e4))) /
                        (2 * h);
            worst = std::max(worst, rel_err(fd, analytic.m[i]));
        }
    }
    return worst;
}

double mass_loss_value(const GridState& g) {
    double s = 0.0;
    for (double m : g.mass) {
        double t = std::log(m + 1.0);
        s += t * t;
    }
    return s;
}

double suite_adjoint(Rng& rng) {
    SimParams p;
    p.grid_resolution = 8;
    p.mu = 1e3;
    p.lambda = 2e3;
    ParticleState s;
    s.resize(27);
    int idx = 0;
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j)
            for (int k = -1; k <= 1; ++k) {
                s.x[idx] = Vec3{i * 0.6, j * 0.6, k * 0.6};
                s.v[idx] = rng.normal3() * 0.05;
                Mat3 jf;
                for (double& e : jf.m) e = rng.uniform(-0.05, 0.05);
                s.F[idx] = Mat3::identity() + jf;
                s.mass[idx] = rng.uniform(0.5, 2.0);
                ++idx;
            }
    const int timesteps = 3;
    ControlField c = ControlField::zeros(27, timesteps, 1);
    for (auto& slot : c.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.03, 0.03);

    Tape tape = simulate(s, c, p, timesteps);
    FinalGradients seed;
    seed.grid_mass.resize(tape.final_grid.node_count());
    for (std::size_t i = 0; i < seed.grid_mass.size(); ++i) {
        double m = tape.final_grid.mass[i];
        seed.grid_mass[i] = 2.0 * std::log(m + 1.0) / (m + 1.0);
    }
    AdjointResult adj = adjoint(tape, seed);

    double worst = 0.0;
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        int slot = int(rng.below(c.steps.size()));
        int particle = int(rng.below(27));
        int entry = int(rng.below(9));
        ControlField cp = c, cm = c;
        cp.steps[slot][particle].m[entry] += h;
        cm.steps[slot][particle].m[entry] -= h;
        double fd = (mass_loss_value(simulate(s, cp, p, timesteps).final_grid) -
                     mass_loss_value(simulate(s, cm, p, timesteps).final_grid)) /
                    (2 * h);
        double an = adj.control_grads.steps[slot][particle].m[entry];
        if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
        worst = std::max(worst, rel_err(fd, an));
    }
    return worst;
}

double suite_covariance(Rng& rng) {
    double worst = 0.0;
    const double h = 1e-5;
    int kept = 0;
    while (kept < 20) {
        Mat3 f = Mat3::identity();
        for (double& e : f.m) e += rng.uniform(-0.45, 0.45);
        Svd3 sv = svd3(f);
        double gap = std::min({std::abs(sv.sigma.x - sv.sigma.y), std::abs(sv.sigma.y - sv.sigma.z)});
        if (gap < 0.08 || sv.sigma.z < 0.45 || sv.sigma.x > 2.3) continue;
        ++kept;
        Mat3 w;
        for (double& e : w.m) e = rng.uniform(-1, 1);
        Mat3 analytic = covariance_backward(f, 0.055, w);
        auto loss = [&](const Mat3& m) { return frobenius_dot(w, build_covariance(m, 0.055)); };
        for (int i = 0; i < 9; ++i) {
            Mat3 fp = f, fm = f;
            fp.m[i] += h;
            fm.m[i] -= h;
            worst = std::max(worst, rel_err((loss(fp) - loss(fm)) / (2 * h), analytic.m[i]));
        }
    }
    return worst;
}

double suite_renderer(Rng& rng) {
    CameraModel cam;
    cam.width = cam.height = 16;
    cam.fx = cam.fy = 24.0;
    cam.cx = cam.cy = 8.0;
    cam.eye = {0, 0, -6};
    cam.target = {0, 0, 0};
    cam.up = {0, 1, 0};
    std::vector<RenderGaussian> scene(6);
    for (auto& g : scene) {
        g.mu = Vec3{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 2.0)};
        Mat3 f = Mat3::identity();
        for (double& e : f.m) e += rng.uniform(-0.3, 0.3);
        g.cov = build_covariance(f, rng.uniform(0.2, 0.6));
        g.opacity = rng.uniform(0.3, 0.9);
    }
    RenderTarget rt = render(scene, cam);
    const std::size_t npix = rt.alpha.size();
    ImageGradients ig;
    ig.alpha.resize(npix);
    ig.depth.resize(npix);
    for (auto& v : ig.alpha) v = rng.uniform(-1, 1);
    for (auto& v : ig.depth) v = rng.uniform(-1, 1);
    auto loss = [&](const std::vector<RenderGaussian>& s) {
        RenderTarget t = render(s, cam);
        double acc = 0.0;
        for (std::size_t i = 0; i < npix; ++i)
            acc += ig.alpha[i] * t.alpha[i] + ig.depth[i] * t.depth[i];
        return acc;
    };
    GaussianGradients gg = render_backward(scene, cam, {}, rt, ig);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t k = 0; k < scene.size(); ++k)
        for (int p = 0; p < 4; ++p) {
            auto sp = scene, sm = scene;
            double an;
            if (p < 3) {
                sp[k].mu[p] += h;
                sm[k].mu[p] -= h;
                an = gg.mu[k][p];
            } else {
                sp[k].opacity += h;
                sm[k].opacity -= h;
                an = gg.opacity[k];
            }
            double fd = (loss(sp) - loss(sm)) / (2 * h);
            if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
            worst = std::max(worst, rel_err(fd, an));
        }
    return worst;
}

ExperimentConfig micro_chain_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.timesteps = 2;
    cfg.particle_count = 8;
    cfg.sim.grid_resolution = 12;
    cfg.sim.mu = 1e3;
    cfg.sim.lambda = 2e3;
    cfg.source_shape.radius = 2.0;
    cfg.target_shape.extents = Vec3{1.5, 1.5, 1.5};
    cfg.bridge.m_child = 16;
    cfg.bridge.k_spacing = 4;
    cfg.camera.width = cfg.camera.height = 16;
    cfg.camera.fx = cfg.camera.fy = 30.0;
    cfg.camera.cx = cfg.camera.cy = 8.0;
    cfg.camera.eye = Vec3{8.0, -10.0, 5.0};
    cfg.cov.sigma_anchor = 0.5;
    cfg.cov.sigma_child = 0.35;
    cfg.weights.w_shrink = 0.0;  // multiplier-only gradient contract
    cfg.target_raster_samples = 20000;
    cfg.target_image_samples = 2000;
    return cfg;
}

double suite_chain(std::uint64_t seed) {
    ExperimentConfig cfg = micro_chain_config(seed);
    Scene scene = build_scene(cfg);
    TrainState state = TrainState::fresh(scene);
    Rng rng(seed + 1);
    for (auto& slot : state.controls.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.02, 0.02);

    Tape tape = simulate(scene.initial, state.controls, cfg.sim, cfg.timesteps);
    RenderPipeline pipe;
    pipe.bridge = build_bridge(tape.final_state().x, tape.final_state().F, cfg.bridge, 7);
    render_pipeline_loss(scene, pipe, tape.final_state().x, tape.final_state().F,
                         state.opacity_multiplier);
    pipe.mask = visibility_mask(pipe.target, pipe.gaussians, cfg.camera, cfg.render, 7);
    render_pipeline_loss(scene, pipe, tape.final_state().x, tape.final_state().F,
                         state.opacity_multiplier);
    RenderChainResult chain = chain_render_to_controls(scene, tape, pipe,
                                                       state.opacity_multiplier);

    auto loss_at = [&](const ControlField& controls) {
        Tape t = simulate(scene.initial, controls, cfg.sim, cfg.timesteps);
        return render_pipeline_loss(scene, pipe, t.final_state().x, t.final_state().F,
                                    state.opacity_multiplier)
            .total;
    };
    double worst = 0.0;
    const double h = 1e-5;
    Rng pick(seed + 2);
    for (int trial = 0; trial < 10; ++trial) {
        int slot = int(pick.below(state.controls.steps.size()));
        int particle = int(pick.below(8));
        int entry = int(pick.below(9));
        ControlField cp = state.controls, cm = state.controls;
        cp.steps[slot][particle].m[entry] += h;
        cm.steps[slot][particle].m[entry] -= h;
        double fd = (loss_at(cp) - loss_at(cm)) / (2 * h);
        std::size_t flat = (std::size_t(slot) * 8 + particle) * 9 + entry;
        double an = chain.grad_controls[flat];
        if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
        worst = std::max(worst, rel_err(fd, an));
    }
    return worst;
}

double suite_bridge_adjoint(Rng& rng) {
    BridgeParams p;
    p.m_child = 40;
    p.k_coarse = 6;
    p.k_fine = 3;
    std::vector<Vec3> anchors(15);
    std::vector<Mat3> fs(15, Mat3::identity());
    for (auto& a : anchors)
        a = Vec3{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    for (auto& f : fs)
        for (double& e : f.m) e += rng.uniform(-0.3, 0.3);
    BridgeState st = build_bridge(anchors, fs, p, 23);
    const std::size_t m = st.render_count();

    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Mat3> gout(m);
        for (auto& g : gout)
            for (double& e : g.m) e = rng.uniform(-1, 1);
        std::vector<Mat3> tangent(anchors.size());
        for (auto& v : tangent)
            for (double& e : v.m) e = rng.uniform(-1, 1);

        // forward JVP via a small central difference in the tangent direction
        const double h = 1e-7;
        auto value = [&](double t) {
            std::vector<Mat3> f2 = fs;
            for (std::size_t i = 0; i < fs.size(); ++i) f2[i] += tangent[i] * t;
            BridgeState tmp = st;
            bridge_forward(tmp, f2);
            double acc = 0.0;
            for (std::size_t jj = 0; jj < m; ++jj) acc += frobenius_dot(gout[jj], tmp.f_final[jj]);
            return acc;
        };
        double lhs = (value(h) - value(-h)) / (2 * h);
        AnchorGradients adj = scatter_gradients(st, gout, std::vector<Vec3>(m, Vec3{}));
        double rhs = 0.0;
        for (std::size_t i = 0; i < anchors.size(); ++i)
            rhs += frobenius_dot(adj.F[i], tangent[i]);
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    return worst;
}

int cmd_gradcheck(const std::string& config_path, const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    apply_flags(cfg, flags);

    struct SuiteResult {
        const char* name;
        double worst;
        double tol;
    };
    Rng rng(cfg.seed + 100);
    std::vector<SuiteResult> suites;
    suites.push_back({"svd_backward", suite_svd_backward(rng), 1e-3});
    suites.push_back({"stress_backward", suite_stress_backward(rng), 1e-3});
    suites.push_back({"mpm_adjoint", suite_adjoint(rng), 1e-3});
    suites.push_back({"covariance_backward", suite_covariance(rng), 1e-3});
    suites.push_back({"splat_backward", suite_renderer(rng), 1e-3});
    suites.push_back({"bridge_adjoint", suite_bridge_adjoint(rng), 1e-6});
    suites.push_back({"render_chain", suite_chain(cfg.seed), 5e-3});

    bool ok = true;
    for (const auto& s : suites) {
        bool pass = s.worst <= s.tol;
        ok &= pass;
        std::printf("%-20s max rel err %-12s tol %-8s %s\n", s.name,
                    format_double(s.worst).c_str(), format_double(s.tol).c_str(),
                    pass ? "PASS" : "FAIL");
    }
    return ok ? 0 : 3;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"differentiable particle-grid shape morphing with gaussian splat supervision"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string config_path, snapshot_path;

    auto add_common = [&](CLI::App* sub, bool with_episodes) {
        sub->add_option("config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", flags.seed, "override the config seed")
            ->each([&](const std::string&) { flags.seed_set = true; });
        sub->add_option("--threads", flags.threads, "worker threads (0 = auto)");
        sub->add_option("--out-dir", flags.out_dir, "override the output directory");
        if (with_episodes) sub->add_option("--episodes", flags.episodes, "override episode count");
        sub->add_option("--resolution-scale", flags.resolution_scale,
                        "scale camera resolution and intrinsics");
    };

    CLI::App* run = app.add_subcommand("run", "full training run");
    add_common(run, true);
    CLI::App* eval = app.add_subcommand("eval", "chamfer distance and statistics of a snapshot");
    add_common(eval, false);
    eval->add_option("snapshot", snapshot_path, "particle snapshot (.pmgs)")->required();
    CLI::App* rnd = app.add_subcommand("render", "render one frame set from a snapshot");
    add_common(rnd, false);
    rnd->add_option("snapshot", snapshot_path, "particle snapshot (.pmgs)")->required();
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    add_common(grad, false);
    CLI::App* targets = app.add_subcommand("targets", "emit target grid slices and images");
    add_common(targets, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            app.exit(e);
            return 0;
        }
        std::fprintf(stderr, "%s\n\n%s\n", e.what(), app.help().c_str());
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, flags);
        if (eval->parsed()) return cmd_eval(config_path, snapshot_path, flags);
        if (rnd->parsed()) return cmd_render(config_path, snapshot_path, flags);
        if (grad->parsed()) return cmd_gradcheck(config_path, flags);
        if (targets->parsed()) return cmd_targets(config_path, flags);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}

}  // namespace physmorph
