#pragma once

#include <memory>

#include "physmorph/config.hpp"

namespace physmorph {

// Uniform interior fill with mass = density * volume / count; F = I,
// velocities and affine state zero.
ParticleState init_particles(const Shape& shape, int count, double density,
                             const SimParams& params, std::uint64_t seed);

// Runtime experiment state derived from a config: initial particles, the
// rasterized target mass grid, and cached target images.
struct Scene {
    ExperimentConfig config;
    std::shared_ptr<Shape> source_shape;
    std::shared_ptr<Shape> target_shape;
    ParticleState initial;
    TargetMassGrid target_mass;
    TargetImages target_images;
};

Scene build_scene(const ExperimentConfig& config);

}  // namespace physmorph
