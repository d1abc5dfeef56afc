#include "physmorph/scene.hpp"

#include <stdexcept>

namespace physmorph {

ParticleState init_particles(const Shape& shape, int count, double density,
                             const SimParams& params, std::uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("init_particles: count must be positive");
    Aabb b = shape.bounds();
    Vec3 origin = params.grid_origin();
    double lo = params.margin_lo() * params.dx, hi = params.margin_hi() * params.dx;
    for (int a = 0; a < 3; ++a) {
        if (b.lo[a] - origin[a] < lo || b.hi[a] - origin[a] > hi)
            throw std::invalid_argument("init_particles: shape exceeds grid margin");
    }

    Rng rng = Rng::stream(seed, 0xf111);
    std::vector<Vec3> pts = shape.sample_interior(count, rng);
    double volume = shape.volume();
    double mass_each = density * volume / count;

    ParticleState s;
    s.resize(count);
    s.x = std::move(pts);
    for (double& m : s.mass) m = mass_each;
    return s;
}

Scene build_scene(const ExperimentConfig& config) {
    Scene scene;
    scene.config = config;
    scene.source_shape = std::make_shared<Shape>(config.source_shape);
    scene.target_shape = std::make_shared<Shape>(config.target_shape);

    scene.initial = init_particles(*scene.source_shape, config.particle_count,
                                   config.sim.density, config.sim, config.seed);

    double total_mass = 0.0;
    for (double m : scene.initial.mass) total_mass += m;
    scene.target_mass = rasterize_target(*scene.target_shape, config.sim, total_mass,
                                         config.target_raster_samples, config.seed,
                                         config.phys.epsilon);

    scene.target_images =
        make_target_images(*scene.target_shape, config.camera, config.render,
                           config.cov.sigma_child, config.opacity,
                           config.target_image_samples, config.seed);
    return scene;
}

}  // namespace physmorph
