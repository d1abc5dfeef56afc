#include "physmorph/physics_loss.hpp"

#include <cmath>
#include <stdexcept>

#include "physmorph/parallel.hpp"

namespace physmorph {

double pairwise_sum(const double* data, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

TargetMassGrid rasterize_target(const Shape& shape, const SimParams& params, double total_mass,
                                int sample_count, uint64_t seed, double epsilon) {
    if (shape.is_empty()) throw std::invalid_argument("rasterize_target: empty shape");
    Aabb b = shape.bounds();
    Vec3 origin = params.grid_origin();
    double lo = params.margin_lo() * params.dx, hi = params.margin_hi() * params.dx;
    for (int a = 0; a < 3; ++a) {
        if (b.lo[a] - origin[a] < lo || b.hi[a] - origin[a] > hi)
            throw std::invalid_argument("rasterize_target: shape exceeds grid margin");
    }

    Rng rng = Rng::stream(seed, 0x7a5);
    std::vector<Vec3> pts = shape.sample_interior(sample_count, rng);

    ParticleState deposit;
    deposit.resize(pts.size());
    deposit.x = std::move(pts);
    double m_each = total_mass / sample_count;
    for (double& m : deposit.mass) m = m_each;

    GridState grid;
    p2g(deposit, params, grid, nullptr, /*mass_only=*/true);

    TargetMassGrid target;
    target.epsilon = epsilon;
    target.mass = std::move(grid.mass);
    double sum = pairwise_sum(target.mass.data(), target.mass.size());
    if (sum > 0.0) {
        double scale = total_mass / sum;
        for (double& m : target.mass) m *= scale;
    }
    return target;
}

LossValue mass_loss(const std::vector<double>& m, const TargetMassGrid& target) {
    if (m.size() != target.mass.size())
        throw std::invalid_argument("mass_loss: grid size mismatch");
    const double eps = target.epsilon;
    LossValue out;
    out.grad.resize(m.size());
    std::vector<double> terms(m.size());
    parallel_ranges(m.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double a = m[i] + 1.0 + eps;
            double d = std::log(a) - std::log(target.mass[i] + 1.0 + eps);
            terms[i] = d * d;
            out.grad[i] = 2.0 * d / a;
        }
    });
    out.value = pairwise_sum(terms.data(), terms.size());
    return out;
}

LossValue min_mass_penalty(const std::vector<double>& m, double m_min) {
    LossValue out;
    out.grad.resize(m.size());
    std::vector<double> terms(m.size(), 0.0);
    parallel_ranges(m.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double g = 0.0;
            if (m[i] < m_min) {
                double d = m_min - m[i];
                terms[i] = d * d;
                g = -2.0 * d;
            }
            out.grad[i] = g;
        }
    });
    out.value = pairwise_sum(terms.data(), terms.size());
    return out;
}

PhysicsLoss physics_loss(const std::vector<double>& m, const TargetMassGrid& target,
                         const PhysicsLossParams& params) {
    TargetMassGrid t = target;
    t.epsilon = params.epsilon;
    LossValue lm = mass_loss(m, t);
    LossValue ln = min_mass_penalty(m, params.m_min);

    PhysicsLoss out;
    out.mass_term = lm.value;
    out.min_term = ln.value;
    out.total = params.w_mass * lm.value + params.w_min * ln.value;
    out.grad.resize(m.size());
    parallel_ranges(m.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            out.grad[i] = params.w_mass * lm.grad[i] + params.w_min * ln.grad[i];
    });
    return out;
}

}  // namespace physmorph
