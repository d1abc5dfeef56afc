#pragma once

#include <cstdint>
#include <string>

#include "physmorph/bridge.hpp"
#include "physmorph/camera.hpp"
#include "physmorph/covariance.hpp"
#include "physmorph/mpm.hpp"
#include "physmorph/physics_loss.hpp"
#include "physmorph/render_loss.hpp"
#include "physmorph/shapes.hpp"

namespace physmorph {

struct OptimizerParams {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int passes = 3;
    bool pass1_step = true;       // physics-only Adam step in pass 1
    bool line_search = false;     // reserved; plain Adam by default
    double multiplier_lr = 0.1;   // opacity-multiplier descent rate
};

// One experiment, serializable to/from JSON. Defaults reproduce the
// reference table settings; desk-scale configs override what they need.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int episodes = 20;
    int timesteps = 10;
    int control_stride = 1;
    double gamma = 0.955;  // per-episode control decay

    SimParams sim;
    PhysicsLossParams phys;
    LossWeights weights;
    BridgeParams bridge;
    CovarianceParams cov;
    RenderParams render;
    CameraModel camera;
    OptimizerParams opt;

    double opacity = 0.8;
    Vec3 particle_color{0.27, 0.51, 0.71};

    ShapeSpec source_shape;
    ShapeSpec target_shape;
    int particle_count = 1000;
    int target_raster_samples = 200000;
    int target_image_samples = 20000;
    int chamfer_samples = 10000;

    ExperimentConfig() {
        source_shape.kind = ShapeSpec::Kind::Sphere;
        source_shape.radius = 5.0;
        target_shape.kind = ShapeSpec::Kind::Box;
        target_shape.extents = Vec3{4.0, 4.0, 4.0};
    }
};

// JSON round trip. load applies defaults for absent keys, rejects unknown
// keys, and validates ranges; an empty or whitespace-only file is a valid
// all-defaults config.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);
bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace physmorph
