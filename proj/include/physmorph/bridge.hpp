#pragma once

#include <cstdint>
#include <vector>

#include "physmorph/knn.hpp"
#include "physmorph/linalg.hpp"

namespace physmorph {

struct BridgeParams {
    int m_child = 8000;              // children to allocate (M - N)
    int child_cap = 20;              // per-anchor cap
    int k_coarse = 64;
    int k_fine = 16;
    int k_spacing = 8;
    double tau = 0.1;                // blend temperature
    double alpha_min = 0.2;
    double alpha_max = 0.8;
    double jitter = 0.1;             // child offset scale
    double uniform_mix = 0.02;       // fraction of children placed uniformly
    double uniform_threshold = 1e-4; // mean |det-1| below which subdivision is uniform
    double eta = 1e-9;               // inverse-distance weight regularizer
    double spacing_floor = 1e-6;     // absolute floor for degenerate spacing
};

// |det(F) - 1|; compression and expansion both count.
double deformation_magnitude(const Mat3& F);

// Children per anchor, proportional to deformation, capped, with a uniform
// fallback when mean deformation is negligible.
std::vector<int> allocate_children(const std::vector<double>& d, int m_child, int cap,
                                   double uniform_threshold);

// Mean distance to the k nearest other anchors (self excluded).
std::vector<double> local_spacing(const std::vector<Vec3>& anchors, int k_spacing,
                                  double dist_floor);

// Frozen subdivision pattern: jitter offsets are drawn once per plan, so
// child positions stay differentiable in the parent position with a unit
// Jacobian.
struct SubdivisionPlan {
    struct Child {
        int parent;
        Vec3 offset;  // jitter * h_parent * unit direction
    };
    std::vector<Child> children;
    std::vector<int> counts;
    std::vector<double> spacing;
};

SubdivisionPlan make_plan(const std::vector<Vec3>& anchor_x, const std::vector<Mat3>& anchor_F,
                          const BridgeParams& params, std::uint64_t seed);

std::vector<Vec3> spawn_children(const SubdivisionPlan& plan, const std::vector<Vec3>& anchor_x);

// Per-render-particle interpolation neighborhoods, weights frozen.
struct InterpFootprint {
    int k_coarse = 0, k_fine = 0;
    std::size_t render_count = 0;
    std::vector<int> coarse_idx;
    std::vector<double> coarse_w;
    std::vector<int> fine_idx;
    std::vector<double> fine_w;
};

InterpFootprint build_footprint(const std::vector<Vec3>& anchor_x,
                                const std::vector<Vec3>& render_x, const BridgeParams& params);

void interpolate_F(const std::vector<Mat3>& anchor_F, const InterpFootprint& fp,
                   std::vector<Mat3>& f_coarse, std::vector<Mat3>& f_fine);

struct BlendResult {
    Mat3 f_final;
    double alpha;
};
BlendResult blend(const Mat3& f_coarse, const Mat3& f_fine, const BridgeParams& params);

// Everything the render path needs, frozen for one optimization pass.
// Render particles are the anchors (first), then the plan's children.
struct BridgeState {
    BridgeParams params;
    std::size_t anchor_count = 0;
    SubdivisionPlan plan;
    std::vector<Vec3> render_x;
    InterpFootprint footprint;
    std::vector<Mat3> f_coarse, f_fine, f_final;
    std::vector<double> alpha;

    std::size_t render_count() const { return render_x.size(); }
    bool is_child(std::size_t j) const { return j >= anchor_count; }
    int parent_of(std::size_t j) const {
        return is_child(j) ? plan.children[j - anchor_count].parent : int(j);
    }
};

BridgeState build_bridge(const std::vector<Vec3>& anchor_x, const std::vector<Mat3>& anchor_F,
                         const BridgeParams& params, std::uint64_t seed);

// Re-evaluate the differentiable tail of the bridge (interpolation + blend)
// for new anchor deformation gradients, keeping the frozen footprint.
void bridge_forward(BridgeState& state, const std::vector<Mat3>& anchor_F);

struct AnchorGradients {
    std::vector<Mat3> F;
    std::vector<Vec3> x;
};

// Exact adjoint of (interpolate_F then blend) plus the unit-Jacobian child
// position path: gradients on F_final and on render means land on anchors.
AnchorGradients scatter_gradients(const BridgeState& state, const std::vector<Mat3>& grad_f_final,
                                  const std::vector<Vec3>& grad_mu);

}  // namespace physmorph
