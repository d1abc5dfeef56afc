#pragma once

#include <vector>

#include "physmorph/mpm.hpp"
#include "physmorph/shapes.hpp"

namespace physmorph {

// Target mass distribution on the same lattice as GridState.
struct TargetMassGrid {
    std::vector<double> mass;
    double epsilon = 1e-6;
    double total() const {
        double s = 0.0;
        for (double m : mass) s += m;
        return s;
    }
};

struct PhysicsLossParams {
    double epsilon = 1e-6;   // log stabilizer in the mass loss
    double m_min = 1e-3;     // minimum allowed grid mass
    double w_mass = 1.0;
    double w_min = 5.0;
};

// Deposit total_mass worth of uniformly sampled interior points through the
// same B-spline kernel the simulation uses, then rescale exactly.
TargetMassGrid rasterize_target(const Shape& shape, const SimParams& params, double total_mass,
                                int sample_count = 200000, uint64_t seed = 12345,
                                double epsilon = 1e-6);

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // per grid node
};

// sum_i [ln(m_i + 1 + eps) - ln(m*_i + 1 + eps)]^2
LossValue mass_loss(const std::vector<double>& m, const TargetMassGrid& target);

// sum over nodes with m_i < m_min of (m_min - m_i)^2
LossValue min_mass_penalty(const std::vector<double>& m, double m_min);

// w_mass * mass_loss + w_min * min_mass_penalty
struct PhysicsLoss {
    double total = 0.0;
    double mass_term = 0.0;   // unweighted
    double min_term = 0.0;    // unweighted
    std::vector<double> grad;
};
PhysicsLoss physics_loss(const std::vector<double>& m, const TargetMassGrid& target,
                         const PhysicsLossParams& params);

// deterministic pairwise tree reduction
double pairwise_sum(const double* data, std::size_t n);

}  // namespace physmorph
