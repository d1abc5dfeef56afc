#pragma once

#include <cstdint>
#include <vector>

#include "physmorph/linalg.hpp"

namespace physmorph {

// Anchor particle arrays (SoA). Masses are constant over an episode;
// anchors are never created or destroyed.
struct ParticleState {
    std::vector<Vec3> x;        // position, grid units
    std::vector<Vec3> v;        // velocity, grid units / s
    std::vector<Mat3> C;        // affine velocity tensor, 1/s
    std::vector<Mat3> F;        // deformation gradient
    std::vector<double> mass;   // > 0

    std::size_t size() const { return x.size(); }
    void resize(std::size_t n) {
        x.resize(n);
        v.assign(n, Vec3{});
        C.assign(n, Mat3::zero());
        F.assign(n, Mat3::identity());
        mass.assign(n, 1.0);
    }
};

struct SimParams {
    int grid_resolution = 32;        // nodes per axis
    double dx = 1.0;                 // grid spacing
    double dt = 1.0 / 120.0;
    double mu = 1.0e4;               // Lame mu
    double lambda = 2.0e4;           // Lame lambda
    double density = 60.0;
    double drag = 0.5;
    Vec3 external_force{0, 0, 0};    // acceleration, applied at grid nodes

    static constexpr int kMargin = 2;          // particle-free band, cells
    static constexpr int kBoundaryWidth = 2;   // sticky nodes per side

    Vec3 grid_origin() const {
        double half = 0.5 * grid_resolution * dx;
        return {-half, -half, -half};
    }
    // inclusive range of valid particle positions in grid coordinates
    double margin_lo() const { return kMargin; }
    double margin_hi() const { return grid_resolution - 1.0 - kMargin; }

    void validate() const;
};

// Eulerian scratch state: one cubic lattice of nodes.
struct GridState {
    int res = 0;
    double dx = 1.0;
    Vec3 origin{};
    std::vector<double> mass;
    std::vector<Vec3> momentum;
    std::vector<Vec3> velocity;

    void reset(const SimParams& p) {
        res = p.grid_resolution;
        dx = p.dx;
        origin = p.grid_origin();
        std::size_t n = std::size_t(res) * res * res;
        mass.assign(n, 0.0);
        momentum.assign(n, Vec3{});
        velocity.assign(n, Vec3{});
    }
    std::size_t node_count() const { return mass.size(); }
    std::size_t index(int i, int j, int k) const {
        return (std::size_t(i) * res + j) * res + k;
    }
    bool is_boundary(int i, int j, int k) const {
        int b = SimParams::kBoundaryWidth;
        return i < b || j < b || k < b || i >= res - b || j >= res - b || k >= res - b;
    }
    double total_mass() const;
};

// Learnable control increments, one Mat3 per particle per control step.
// A control step fires every `stride`-th simulation step, starting at step 0.
struct ControlField {
    int stride = 1;
    std::vector<std::vector<Mat3>> steps;  // [slot][particle]

    static int slot_count(int timesteps, int stride) {
        return (timesteps + stride - 1) / stride;
    }
    static ControlField zeros(std::size_t particles, int timesteps, int stride) {
        ControlField c;
        c.stride = stride;
        c.steps.assign(slot_count(timesteps, stride), std::vector<Mat3>(particles, Mat3::zero()));
        return c;
    }
    int slot_for_step(int step) const { return step % stride == 0 ? step / stride : -1; }
    std::size_t entry_count() const {
        return steps.empty() ? 0 : steps.size() * steps.front().size() * 9;
    }
    // flat views used by the optimizer (slot-major, particle-major, row-major)
    std::vector<double> to_flat() const;
    void from_flat(const std::vector<double>& v);
};

// Fixed-corotational first Piola-Kirchhoff stress
// P(F) = 2 mu (F - R) + lambda (J - 1) cof(F),  cof(F) = J F^{-T}.
// J below 1e-8 is clamped in the (J - 1) factor and counted in *clamped.
Mat3 compute_stress(const Mat3& F, double mu, double lambda, int* clamped = nullptr);

// Adjoint of compute_stress: dL/dF given dL/dP.
Mat3 compute_stress_backward(const Mat3& F, const Mat3& grad_p, double mu, double lambda);

// F update of one step: (I + dt*C) (F + Fc).
Mat3 apply_control(const Mat3& F, const Mat3& control, const Mat3& C, double dt);

// Quadratic B-spline stencil of one particle.
struct SplineStencil {
    int base[3];
    double w[3][3];    // [axis][offset]
    double dw[3][3];   // d w / d fx
    Vec3 fx;

    double weight(int i, int j, int k) const { return w[0][i] * w[1][j] * w[2][k]; }
    Vec3 weight_grad(int i, int j, int k, double inv_dx) const {
        return Vec3{dw[0][i] * w[1][j] * w[2][k],
                    w[0][i] * dw[1][j] * w[2][k],
                    w[0][i] * w[1][j] * dw[2][k]} * inv_dx;
    }
    Vec3 dpos(int i, int j, int k, double dx) const {
        return Vec3{(i - fx.x) * dx, (j - fx.y) * dx, (k - fx.z) * dx};
    }
};
SplineStencil make_stencil(const Vec3& x, const Vec3& origin, double dx);

// Reusable per-chunk accumulators for the deterministic P2G scatter.
struct P2gScratch {
    struct Accum {
        std::vector<double> mass;
        std::vector<Vec3> momentum;
    };
    std::vector<Accum> chunks;
};

// Particle-to-grid scatter: mass plus APIC momentum with the MLS-MPM fused
// stress force. Throws if a particle sits outside the 2-cell margin.
// mass_only skips stress and velocity (used for the final mass snapshot
// and target rasterization). Returns the number of Jacobian clamps hit in
// the stress evaluation.
int p2g(const ParticleState& particles, const SimParams& params, GridState& grid,
        P2gScratch* scratch = nullptr, bool mass_only = false);

// Node update: momentum -> velocity, drag, external force, sticky boundary.
void grid_update(GridState& grid, const SimParams& params);

// Grid-to-particle gather + advection + F update. controls may be null
// (treated as zero). Returns the number of advection clamps against the
// margin.
int g2p(const GridState& grid, ParticleState& particles, const SimParams& params,
        const std::vector<Mat3>* controls);

struct StepStats {
    std::int64_t advection_clamps = 0;
    std::int64_t jacobian_clamps = 0;
};

// Recorded trajectory: checkpoints at every step boundary, enough to replay
// any step bit-exactly for the adjoint pass.
struct Tape {
    SimParams params;
    ControlField controls;              // the controls the trajectory was run with
    std::vector<ParticleState> states;  // T+1 entries
    std::vector<int> control_slot;      // per step, -1 when no control fires
    GridState final_grid;               // mass scatter of states.back()
    StepStats stats;

    int timesteps() const { return int(control_slot.size()); }
    const ParticleState& initial() const { return states.front(); }
    const ParticleState& final_state() const { return states.back(); }
};

Tape simulate(const ParticleState& state0, const ControlField& controls,
              const SimParams& params, int timesteps);

// Gradient seeds on the final state / final grid.
struct FinalGradients {
    std::vector<Vec3> x;        // dL/dx_p at the final step (may be empty)
    std::vector<Mat3> F;        // dL/dF_p at the final step (may be empty)
    std::vector<double> grid_mass;  // dL/dm_i on the final grid (may be empty)
};

struct AdjointResult {
    ControlField control_grads;       // same shape as the forward controls
    std::vector<Vec3> x0, v0;         // dL/d state0
    std::vector<Mat3> C0, F0;
};

AdjointResult adjoint(const Tape& tape, const FinalGradients& grad_final);

double kinetic_energy(const ParticleState& s);

}  // namespace physmorph
