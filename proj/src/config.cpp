#include "physmorph/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace physmorph {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) fail(path + "." + it.key(), "unknown key");
    }
}

double get_num(const json& j, const char* key, double fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

int get_int(const json& j, const char* key, int fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

bool get_bool(const json& j, const char* key, bool fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& fallback,
                    const std::string& path) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

Vec3 get_vec3(const json& j, const char* key, const Vec3& fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 3) fail(path + "." + key, "expected an array of 3 numbers");
    return Vec3{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

const char* kind_name(ShapeSpec::Kind k) {
    switch (k) {
        case ShapeSpec::Kind::Sphere: return "sphere";
        case ShapeSpec::Kind::Box: return "box";
        case ShapeSpec::Kind::Cylinder: return "cylinder";
        case ShapeSpec::Kind::Torus: return "torus";
        case ShapeSpec::Kind::Capsule: return "capsule";
        case ShapeSpec::Kind::Mesh: return "mesh";
        case ShapeSpec::Kind::Union: return "union";
        case ShapeSpec::Kind::Intersection: return "intersection";
    }
    return "sphere";
}

ShapeSpec::Kind kind_from(const std::string& s, const std::string& path) {
    if (s == "sphere") return ShapeSpec::Kind::Sphere;
    if (s == "box") return ShapeSpec::Kind::Box;
    if (s == "cylinder") return ShapeSpec::Kind::Cylinder;
    if (s == "torus") return ShapeSpec::Kind::Torus;
    if (s == "capsule") return ShapeSpec::Kind::Capsule;
    if (s == "mesh") return ShapeSpec::Kind::Mesh;
    if (s == "union") return ShapeSpec::Kind::Union;
    if (s == "intersection") return ShapeSpec::Kind::Intersection;
    fail(path, "unknown shape kind '" + s + "'");
}

ShapeSpec parse_shape(const json& j, const std::string& path) {
    check_keys(j,
               {"kind", "center", "radius", "extents", "half_height", "major_radius", "p0", "p1",
                "mesh_path", "children"},
               path);
    ShapeSpec s;
    s.kind = kind_from(get_str(j, "kind", "sphere", path), path + ".kind");
    s.center = get_vec3(j, "center", s.center, path);
    s.radius = get_num(j, "radius", s.radius, path);
    s.extents = get_vec3(j, "extents", s.extents, path);
    s.half_height = get_num(j, "half_height", s.half_height, path);
    s.major_radius = get_num(j, "major_radius", s.major_radius, path);
    s.p0 = get_vec3(j, "p0", s.p0, path);
    s.p1 = get_vec3(j, "p1", s.p1, path);
    s.mesh_path = get_str(j, "mesh_path", s.mesh_path, path);
    if (j.contains("children")) {
        const json& kids = j.at("children");
        if (!kids.is_array()) fail(path + ".children", "expected an array");
        for (std::size_t i = 0; i < kids.size(); ++i)
            s.children.push_back(parse_shape(kids[i], path + ".children[" + std::to_string(i) + "]"));
    }
    if (s.kind == ShapeSpec::Kind::Mesh && s.mesh_path.empty())
        fail(path + ".mesh_path", "mesh shape needs a path");
    if ((s.kind == ShapeSpec::Kind::Union || s.kind == ShapeSpec::Kind::Intersection) &&
        s.children.empty())
        fail(path + ".children", "composite shape needs children");
    return s;
}

json shape_json(const ShapeSpec& s) {
    json j;
    j["kind"] = kind_name(s.kind);
    j["center"] = vec3_json(s.center);
    j["radius"] = s.radius;
    j["extents"] = vec3_json(s.extents);
    j["half_height"] = s.half_height;
    j["major_radius"] = s.major_radius;
    j["p0"] = vec3_json(s.p0);
    j["p1"] = vec3_json(s.p1);
    j["mesh_path"] = s.mesh_path;
    json kids = json::array();
    for (const auto& c : s.children) kids.push_back(shape_json(c));
    j["children"] = kids;
    return j;
}

void validate(const ExperimentConfig& c) {
    auto require = [&](bool ok, const std::string& path, const std::string& what) {
        if (!ok) fail(path, what);
    };
    require(c.episodes >= 0, "episodes", "must be >= 0");
    require(c.timesteps >= 1, "timesteps", "must be >= 1");
    require(c.control_stride >= 1 && c.control_stride <= 3, "control_stride", "must be in [1,3]");
    require(c.gamma > 0.0 && c.gamma <= 1.0, "gamma", "must be in (0,1]");
    require(c.sim.grid_resolution >= 2 * SimParams::kMargin + 4, "sim.grid_resolution",
            "too small for the particle margin");
    require(c.sim.dx > 0, "sim.dx", "must be positive");
    require(c.sim.dt > 0, "sim.dt", "must be positive");
    require(c.sim.mu > 0, "sim.mu", "must be positive");
    require(c.sim.lambda > 0, "sim.lambda", "must be positive");
    require(c.sim.density > 0, "sim.density", "must be positive");
    require(c.sim.drag >= 0 && c.sim.drag <= 1, "sim.drag", "must be in [0,1]");
    require(c.phys.epsilon > 0, "physics_loss.epsilon", "must be positive");
    require(c.phys.m_min >= 0, "physics_loss.m_min", "must be >= 0");
    require(c.phys.w_mass >= 0 && c.phys.w_min >= 0, "physics_loss", "weights must be >= 0");
    require(c.weights.w_alpha >= 0 && c.weights.w_depth >= 0 && c.weights.w_edge >= 0 &&
                c.weights.w_shrink >= 0,
            "loss_weights", "weights must be >= 0");
    require(c.bridge.m_child >= 0, "bridge.m_child", "must be >= 0");
    require(c.bridge.child_cap >= 1, "bridge.child_cap", "must be >= 1");
    require(c.bridge.k_coarse >= 1 && c.bridge.k_fine >= 1 && c.bridge.k_spacing >= 1, "bridge",
            "neighbor counts must be >= 1");
    require(c.bridge.tau > 0, "bridge.tau", "must be positive");
    require(c.bridge.alpha_min >= 0 && c.bridge.alpha_min <= c.bridge.alpha_max &&
                c.bridge.alpha_max <= 1,
            "bridge", "need 0 <= alpha_min <= alpha_max <= 1");
    require(c.bridge.uniform_mix >= 0 && c.bridge.uniform_mix <= 1, "bridge.uniform_mix",
            "must be in [0,1]");
    require(c.cov.clamp_lo > 0 && c.cov.clamp_lo < c.cov.clamp_hi, "gaussian.clamp",
            "need 0 < lo < hi");
    require(c.cov.sigma_anchor > 0 && c.cov.sigma_child > 0, "gaussian", "scales must be positive");
    require(c.opacity > 0 && c.opacity <= 1, "gaussian.opacity", "must be in (0,1]");
    for (double ch : {c.particle_color.x, c.particle_color.y, c.particle_color.z})
        require(ch >= 0 && ch <= 1, "gaussian.color", "components must be in [0,1]");
    require(c.camera.fx > 0 && c.camera.fy > 0, "camera", "focal lengths must be positive");
    require(c.camera.width >= 1 && c.camera.height >= 1, "camera", "resolution must be >= 1");
    require(c.camera.near > 0 && c.camera.near < c.camera.far, "camera", "need 0 < near < far");
    require(c.render.mask_low >= 0 && c.render.mask_low <= c.render.mask_high &&
                c.render.mask_high <= 1,
            "render", "need 0 <= mask_low <= mask_high <= 1");
    require(c.opt.lr > 0, "optimizer.lr", "must be positive");
    require(c.opt.beta1 >= 0 && c.opt.beta1 < 1 && c.opt.beta2 >= 0 && c.opt.beta2 < 1,
            "optimizer", "betas must be in [0,1)");
    require(c.opt.passes >= 1, "optimizer.passes", "must be >= 1");
    require(c.particle_count >= 1, "particle_count", "must be >= 1");
    require(c.target_raster_samples >= 1, "target_raster_samples", "must be >= 1");
    require(c.target_image_samples >= 1, "target_image_samples", "must be >= 1");
    require(c.chamfer_samples >= 1, "chamfer_samples", "must be >= 1");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;

    bool blank = true;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch))) {
            blank = false;
            break;
        }
    if (blank) return c;

    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }

    check_keys(j,
               {"seed", "out_dir", "episodes", "timesteps", "control_stride", "gamma", "sim",
                "physics_loss", "loss_weights", "bridge", "gaussian", "render", "camera",
                "optimizer", "source_shape", "target_shape", "particle_count",
                "target_raster_samples", "target_image_samples", "chamfer_samples"},
               "");

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            fail("seed", "expected an integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    c.out_dir = get_str(j, "out_dir", c.out_dir, "");
    c.episodes = get_int(j, "episodes", c.episodes, "");
    c.timesteps = get_int(j, "timesteps", c.timesteps, "");
    c.control_stride = get_int(j, "control_stride", c.control_stride, "");
    c.gamma = get_num(j, "gamma", c.gamma, "");

    if (j.contains("sim")) {
        const json& s = j["sim"];
        check_keys(s,
                   {"grid_resolution", "dx", "dt", "mu", "lambda", "density", "drag",
                    "external_force"},
                   "sim");
        c.sim.grid_resolution = get_int(s, "grid_resolution", c.sim.grid_resolution, "sim");
        c.sim.dx = get_num(s, "dx", c.sim.dx, "sim");
        c.sim.dt = get_num(s, "dt", c.sim.dt, "sim");
        c.sim.mu = get_num(s, "mu", c.sim.mu, "sim");
        c.sim.lambda = get_num(s, "lambda", c.sim.lambda, "sim");
        c.sim.density = get_num(s, "density", c.sim.density, "sim");
        c.sim.drag = get_num(s, "drag", c.sim.drag, "sim");
        c.sim.external_force = get_vec3(s, "external_force", c.sim.external_force, "sim");
    }
    if (j.contains("physics_loss")) {
        const json& s = j["physics_loss"];
        check_keys(s, {"epsilon", "m_min", "w_mass", "w_min"}, "physics_loss");
        c.phys.epsilon = get_num(s, "epsilon", c.phys.epsilon, "physics_loss");
        c.phys.m_min = get_num(s, "m_min", c.phys.m_min, "physics_loss");
        c.phys.w_mass = get_num(s, "w_mass", c.phys.w_mass, "physics_loss");
        c.phys.w_min = get_num(s, "w_min", c.phys.w_min, "physics_loss");
    }
    if (j.contains("loss_weights")) {
        const json& s = j["loss_weights"];
        check_keys(s, {"w_alpha", "w_depth", "w_edge", "w_shrink"}, "loss_weights");
        c.weights.w_alpha = get_num(s, "w_alpha", c.weights.w_alpha, "loss_weights");
        c.weights.w_depth = get_num(s, "w_depth", c.weights.w_depth, "loss_weights");
        c.weights.w_edge = get_num(s, "w_edge", c.weights.w_edge, "loss_weights");
        c.weights.w_shrink = get_num(s, "w_shrink", c.weights.w_shrink, "loss_weights");
    }
    if (j.contains("bridge")) {
        const json& s = j["bridge"];
        check_keys(s,
                   {"m_child", "child_cap", "k_coarse", "k_fine", "k_spacing", "tau", "alpha_min",
                    "alpha_max", "jitter", "uniform_mix", "uniform_threshold", "eta",
                    "spacing_floor"},
                   "bridge");
        c.bridge.m_child = get_int(s, "m_child", c.bridge.m_child, "bridge");
        c.bridge.child_cap = get_int(s, "child_cap", c.bridge.child_cap, "bridge");
        c.bridge.k_coarse = get_int(s, "k_coarse", c.bridge.k_coarse, "bridge");
        c.bridge.k_fine = get_int(s, "k_fine", c.bridge.k_fine, "bridge");
        c.bridge.k_spacing = get_int(s, "k_spacing", c.bridge.k_spacing, "bridge");
        c.bridge.tau = get_num(s, "tau", c.bridge.tau, "bridge");
        c.bridge.alpha_min = get_num(s, "alpha_min", c.bridge.alpha_min, "bridge");
        c.bridge.alpha_max = get_num(s, "alpha_max", c.bridge.alpha_max, "bridge");
        c.bridge.jitter = get_num(s, "jitter", c.bridge.jitter, "bridge");
        c.bridge.uniform_mix = get_num(s, "uniform_mix", c.bridge.uniform_mix, "bridge");
        c.bridge.uniform_threshold =
            get_num(s, "uniform_threshold", c.bridge.uniform_threshold, "bridge");
        c.bridge.eta = get_num(s, "eta", c.bridge.eta, "bridge");
        c.bridge.spacing_floor = get_num(s, "spacing_floor", c.bridge.spacing_floor, "bridge");
    }
    if (j.contains("gaussian")) {
        const json& s = j["gaussian"];
        check_keys(s, {"clamp_lo", "clamp_hi", "sigma_anchor", "sigma_child", "opacity", "color"},
                   "gaussian");
        c.cov.clamp_lo = get_num(s, "clamp_lo", c.cov.clamp_lo, "gaussian");
        c.cov.clamp_hi = get_num(s, "clamp_hi", c.cov.clamp_hi, "gaussian");
        c.cov.sigma_anchor = get_num(s, "sigma_anchor", c.cov.sigma_anchor, "gaussian");
        c.cov.sigma_child = get_num(s, "sigma_child", c.cov.sigma_child, "gaussian");
        c.opacity = get_num(s, "opacity", c.opacity, "gaussian");
        c.particle_color = get_vec3(s, "color", c.particle_color, "gaussian");
    }
    if (j.contains("render")) {
        const json& s = j["render"];
        check_keys(s,
                   {"background", "light_dir", "ambient", "diffuse", "aa_floor", "cutoff",
                    "g_max", "g_min", "chi2_cutoff", "edge_threshold", "dilate_radius",
                    "mask_low", "mask_high", "visible_contribution"},
                   "render");
        c.render.background = get_vec3(s, "background", c.render.background, "render");
        c.render.light_dir = get_vec3(s, "light_dir", c.render.light_dir, "render");
        c.render.ambient = get_num(s, "ambient", c.render.ambient, "render");
        c.render.diffuse = get_num(s, "diffuse", c.render.diffuse, "render");
        c.render.aa_floor = get_num(s, "aa_floor", c.render.aa_floor, "render");
        c.render.cutoff = get_num(s, "cutoff", c.render.cutoff, "render");
        c.render.g_max = get_num(s, "g_max", c.render.g_max, "render");
        c.render.g_min = get_num(s, "g_min", c.render.g_min, "render");
        c.render.chi2_cutoff = get_num(s, "chi2_cutoff", c.render.chi2_cutoff, "render");
        c.render.edge_threshold = get_num(s, "edge_threshold", c.render.edge_threshold, "render");
        c.render.dilate_radius = get_int(s, "dilate_radius", c.render.dilate_radius, "render");
        c.render.mask_low = get_num(s, "mask_low", c.render.mask_low, "render");
        c.render.mask_high = get_num(s, "mask_high", c.render.mask_high, "render");
        c.render.visible_contribution =
            get_num(s, "visible_contribution", c.render.visible_contribution, "render");
    }
    if (j.contains("camera")) {
        const json& s = j["camera"];
        check_keys(s, {"fx", "fy", "cx", "cy", "width", "height", "near", "far", "eye", "target",
                       "up"},
                   "camera");
        c.camera.fx = get_num(s, "fx", c.camera.fx, "camera");
        c.camera.fy = get_num(s, "fy", c.camera.fy, "camera");
        c.camera.cx = get_num(s, "cx", c.camera.cx, "camera");
        c.camera.cy = get_num(s, "cy", c.camera.cy, "camera");
        c.camera.width = get_int(s, "width", c.camera.width, "camera");
        c.camera.height = get_int(s, "height", c.camera.height, "camera");
        c.camera.near = get_num(s, "near", c.camera.near, "camera");
        c.camera.far = get_num(s, "far", c.camera.far, "camera");
        c.camera.eye = get_vec3(s, "eye", c.camera.eye, "camera");
        c.camera.target = get_vec3(s, "target", c.camera.target, "camera");
        c.camera.up = get_vec3(s, "up", c.camera.up, "camera");
    }
    if (j.contains("optimizer")) {
        const json& s = j["optimizer"];
        check_keys(s, {"lr", "beta1", "beta2", "eps", "passes", "pass1_step", "line_search",
                       "multiplier_lr"},
                   "optimizer");
        c.opt.lr = get_num(s, "lr", c.opt.lr, "optimizer");
        c.opt.beta1 = get_num(s, "beta1", c.opt.beta1, "optimizer");
        c.opt.beta2 = get_num(s, "beta2", c.opt.beta2, "optimizer");
        c.opt.eps = get_num(s, "eps", c.opt.eps, "optimizer");
        c.opt.passes = get_int(s, "passes", c.opt.passes, "optimizer");
        c.opt.pass1_step = get_bool(s, "pass1_step", c.opt.pass1_step, "optimizer");
        c.opt.line_search = get_bool(s, "line_search", c.opt.line_search, "optimizer");
        c.opt.multiplier_lr = get_num(s, "multiplier_lr", c.opt.multiplier_lr, "optimizer");
    }
    if (j.contains("source_shape")) c.source_shape = parse_shape(j["source_shape"], "source_shape");
    if (j.contains("target_shape")) c.target_shape = parse_shape(j["target_shape"], "target_shape");
    c.particle_count = get_int(j, "particle_count", c.particle_count, "");
    c.target_raster_samples = get_int(j, "target_raster_samples", c.target_raster_samples, "");
    c.target_image_samples = get_int(j, "target_image_samples", c.target_image_samples, "");
    c.chamfer_samples = get_int(j, "chamfer_samples", c.chamfer_samples, "");

    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["episodes"] = c.episodes;
    j["timesteps"] = c.timesteps;
    j["control_stride"] = c.control_stride;
    j["gamma"] = c.gamma;
    j["sim"] = {{"grid_resolution", c.sim.grid_resolution},
                {"dx", c.sim.dx},
                {"dt", c.sim.dt},
                {"mu", c.sim.mu},
                {"lambda", c.sim.lambda},
                {"density", c.sim.density},
                {"drag", c.sim.drag},
                {"external_force", vec3_json(c.sim.external_force)}};
    j["physics_loss"] = {{"epsilon", c.phys.epsilon},
                         {"m_min", c.phys.m_min},
                         {"w_mass", c.phys.w_mass},
                         {"w_min", c.phys.w_min}};
    j["loss_weights"] = {{"w_alpha", c.weights.w_alpha},
                         {"w_depth", c.weights.w_depth},
                         {"w_edge", c.weights.w_edge},
                         {"w_shrink", c.weights.w_shrink}};
    j["bridge"] = {{"m_child", c.bridge.m_child},
                   {"child_cap", c.bridge.child_cap},
                   {"k_coarse", c.bridge.k_coarse},
                   {"k_fine", c.bridge.k_fine},
                   {"k_spacing", c.bridge.k_spacing},
                   {"tau", c.bridge.tau},
                   {"alpha_min", c.bridge.alpha_min},
                   {"alpha_max", c.bridge.alpha_max},
                   {"jitter", c.bridge.jitter},
                   {"uniform_mix", c.bridge.uniform_mix},
                   {"uniform_threshold", c.bridge.uniform_threshold},
                   {"eta", c.bridge.eta},
                   {"spacing_floor", c.bridge.spacing_floor}};
    j["gaussian"] = {{"clamp_lo", c.cov.clamp_lo},
                     {"clamp_hi", c.cov.clamp_hi},
                     {"sigma_anchor", c.cov.sigma_anchor},
                     {"sigma_child", c.cov.sigma_child},
                     {"opacity", c.opacity},
                     {"color", vec3_json(c.particle_color)}};
    j["render"] = {{"background", vec3_json(c.render.background)},
                   {"light_dir", vec3_json(c.render.light_dir)},
                   {"ambient", c.render.ambient},
                   {"diffuse", c.render.diffuse},
                   {"aa_floor", c.render.aa_floor},
                   {"cutoff", c.render.cutoff},
                   {"g_max", c.render.g_max},
                   {"g_min", c.render.g_min},
                   {"chi2_cutoff", c.render.chi2_cutoff},
                   {"edge_threshold", c.render.edge_threshold},
                   {"dilate_radius", c.render.dilate_radius},
                   {"mask_low", c.render.mask_low},
                   {"mask_high", c.render.mask_high},
                   {"visible_contribution", c.render.visible_contribution}};
    j["camera"] = {{"fx", c.camera.fx},
                   {"fy", c.camera.fy},
                   {"cx", c.camera.cx},
                   {"cy", c.camera.cy},
                   {"width", c.camera.width},
                   {"height", c.camera.height},
                   {"near", c.camera.near},
                   {"far", c.camera.far},
                   {"eye", vec3_json(c.camera.eye)},
                   {"target", vec3_json(c.camera.target)},
                   {"up", vec3_json(c.camera.up)}};
    j["optimizer"] = {{"lr", c.opt.lr},
                      {"beta1", c.opt.beta1},
                      {"beta2", c.opt.beta2},
                      {"eps", c.opt.eps},
                      {"passes", c.opt.passes},
                      {"pass1_step", c.opt.pass1_step},
                      {"line_search", c.opt.line_search},
                      {"multiplier_lr", c.opt.multiplier_lr}};
    j["source_shape"] = shape_json(c.source_shape);
    j["target_shape"] = shape_json(c.target_shape);
    j["particle_count"] = c.particle_count;
    j["target_raster_samples"] = c.target_raster_samples;
    j["target_image_samples"] = c.target_image_samples;
    j["chamfer_samples"] = c.chamfer_samples;
    return j.dump(2) + "\n";
}

void save_config(const ExperimentConfig& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_config: cannot open " + path);
    f << config_to_json(c);
}

bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b) {
    return config_to_json(a) == config_to_json(b);
}

}  // namespace physmorph
