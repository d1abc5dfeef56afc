#include "physmorph/mpm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "physmorph/parallel.hpp"
#include "physmorph/svd3.hpp"

namespace physmorph {

void SimParams::validate() const {
    if (grid_resolution < 2 * kMargin + 4) throw std::invalid_argument("SimParams: grid_resolution too small");
    if (!(dx > 0.0)) throw std::invalid_argument("SimParams: dx must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("SimParams: dt must be positive");
    if (!(mu > 0.0)) throw std::invalid_argument("SimParams: mu must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("SimParams: lambda must be positive");
    if (!(density > 0.0)) throw std::invalid_argument("SimParams: density must be positive");
    if (drag < 0.0 || drag > 1.0) throw std::invalid_argument("SimParams: drag must be in [0,1]");
}

double GridState::total_mass() const {
    // fixed-order pairwise reduction, deterministic regardless of threads
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
}

std::vector<double> ControlField::to_flat() const {
    std::vector<double> out;
    out.reserve(entry_count());
    for (const auto& slot : steps)
        for (const Mat3& m : slot) out.insert(out.end(), m.m.begin(), m.m.end());
    return out;
}

void ControlField::from_flat(const std::vector<double>& v) {
    std::size_t i = 0;
    for (auto& slot : steps)
        for (Mat3& m : slot)
            for (double& e : m.m) e = v[i++];
}

Mat3 compute_stress(const Mat3& F, double mu, double lambda, int* clamped) {
    double j = F.determinant();
    double jc = j;
    if (j <= 1e-8) {
        jc = 1e-8;
        if (clamped) ++*clamped;
    }
    PolarDecomposition pd = polar_decompose(F);
    return (F - pd.r) * (2.0 * mu) + F.cofactor() * (lambda * (jc - 1.0));
}

namespace {

// Adjoint of F -> cof(F). cof(F)_ij = 1/2 eps_ipq eps_jrs F_pr F_qs, so
// d cof_ij = eps_ipq eps_jrs F_pr dF_qs.
constexpr int kEps[6][4] = {
    {0, 1, 2, 1}, {1, 2, 0, 1}, {2, 0, 1, 1},
    {0, 2, 1, -1}, {2, 1, 0, -1}, {1, 0, 2, -1},
};

Mat3 cofactor_backward(const Mat3& F, const Mat3& grad_cof) {
    Mat3 out = Mat3::zero();
    for (const auto& a : kEps) {
        int i = a[0], p = a[1], q = a[2], s1 = a[3];
        for (const auto& b : kEps) {
            int j = b[0], r = b[1], s = b[2], s2 = b[3];
            out(q, s) += s1 * s2 * grad_cof(i, j) * F(p, r);
        }
    }
    return out;
}

}  // namespace

Mat3 compute_stress_backward(const Mat3& F, const Mat3& grad_p, double mu, double lambda) {
    double j = F.determinant();
    double jc = std::max(j, 1e-8);
    Mat3 cof = F.cofactor();

    Mat3 out = grad_p * (2.0 * mu);
    PolarDecomposition pd = polar_decompose(F);
    out += polar_rotation_backward(pd, grad_p * (-2.0 * mu));
    if (j > 1e-8) out += cof * (lambda * frobenius_dot(grad_p, cof));
    out += cofactor_backward(F, grad_p * (lambda * (jc - 1.0)));
    return out;
}

Mat3 apply_control(const Mat3& F, const Mat3& control, const Mat3& C, double dt) {
    return (Mat3::identity() + C * dt) * (F + control);
}

SplineStencil make_stencil(const Vec3& x, const Vec3& origin, double dx) {
    SplineStencil st;
    Vec3 gx = (x - origin) / dx;
    for (int a = 0; a < 3; ++a) {
        double b = std::floor(gx[a] - 0.5);
        st.base[a] = int(b);
        double t = gx[a] - b;  // in [0.5, 1.5]
        st.fx[a] = t;
        st.w[a][0] = 0.5 * (1.5 - t) * (1.5 - t);
        st.w[a][1] = 0.75 - (t - 1.0) * (t - 1.0);
        st.w[a][2] = 0.5 * (t - 0.5) * (t - 0.5);
        st.dw[a][0] = t - 1.5;
        st.dw[a][1] = -2.0 * (t - 1.0);
        st.dw[a][2] = t - 0.5;
    }
    return st;
}

namespace {

void check_margin(const ParticleState& particles, const SimParams& params, const char* op) {
    Vec3 origin = params.grid_origin();
    double lo = params.margin_lo(), hi = params.margin_hi();
    for (std::size_t p = 0; p < particles.size(); ++p) {
        Vec3 gx = (particles.x[p] - origin) / params.dx;
        for (int a = 0; a < 3; ++a) {
            if (!(gx[a] >= lo && gx[a] <= hi)) {
                throw std::runtime_error(std::string(op) + ": particle " + std::to_string(p) +
                                         " outside grid margin");
            }
        }
    }
}

}  // namespace

int p2g(const ParticleState& particles, const SimParams& params, GridState& grid,
        P2gScratch* scratch, bool mass_only) {
    grid.reset(params);
    const std::size_t n = particles.size();
    if (n == 0) return 0;
    check_margin(particles, params, "p2g");

    const double dx = params.dx;
    const double inv_dx = 1.0 / dx;
    const Vec3 origin = grid.origin;
    // MLS-MPM fused force: affine += -dt * vol * 4/dx^2 * P F^T, vol = mass/rho
    const double stress_coeff = -params.dt * 4.0 * inv_dx * inv_dx / params.density;
    const std::size_t nodes = grid.node_count();

    P2gScratch local;
    P2gScratch& sc = scratch ? *scratch : local;
    const std::size_t chunks = chunk_count(n);
    if (sc.chunks.size() < chunks) sc.chunks.resize(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        sc.chunks[c].mass.assign(nodes, 0.0);
        sc.chunks[c].momentum.assign(nodes, Vec3{});
    }

    std::vector<int> clamp_counts(chunks, 0);
    parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        auto& acc = sc.chunks[c];
        for (std::size_t p = begin; p < end; ++p) {
            SplineStencil st = make_stencil(particles.x[p], origin, dx);
            double m = particles.mass[p];
            Mat3 affine;  // per-unit-mass
            if (!mass_only) {
                Mat3 stress =
                    compute_stress(particles.F[p], params.mu, params.lambda, &clamp_counts[c]);
                affine = particles.C[p] +
                         stress * particles.F[p].transposed() * stress_coeff;
            }
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        double w = st.weight(i, j, k);
                        std::size_t node =
                            grid.index(st.base[0] + i, st.base[1] + j, st.base[2] + k);
                        acc.mass[node] += w * m;
                        if (!mass_only) {
                            Vec3 dpos = st.dpos(i, j, k, dx);
                            acc.momentum[node] += (particles.v[p] + affine * dpos) * (w * m);
                        }
                    }
        }
    });

    // chunk-ordered reduction keeps the sum order independent of thread count
    parallel_ranges(nodes, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double m = 0.0;
            Vec3 mom{};
            for (std::size_t c = 0; c < chunks; ++c) {
                m += sc.chunks[c].mass[i];
                mom += sc.chunks[c].momentum[i];
            }
            grid.mass[i] = m;
            grid.momentum[i] = mom;
        }
    });
    int total_clamps = 0;
    for (int v : clamp_counts) total_clamps += v;
    return total_clamps;
}

void grid_update(GridState& grid, const SimParams& params) {
    const double decay = 1.0 - params.drag * params.dt;
    const Vec3 dv = params.external_force * params.dt;
    const int res = grid.res;
    parallel_ranges(grid.node_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            int i = int(n / (res * res));
            int j = int((n / res) % res);
            int k = int(n % res);
            Vec3 vel{};
            if (grid.mass[n] > 0.0 && !grid.is_boundary(i, j, k)) {
                vel = grid.momentum[n] / grid.mass[n] * decay + dv;
            }
            grid.velocity[n] = vel;
        }
    });
}

int g2p(const GridState& grid, ParticleState& particles, const SimParams& params,
        const std::vector<Mat3>* controls) {
    const double dx = params.dx;
    const double inv_dx = 1.0 / dx;
    const double d_inv = 4.0 * inv_dx * inv_dx;  // inverse inertia of the quadratic spline
    const Vec3 origin = grid.origin;
    const double lo = params.margin_lo(), hi = params.margin_hi();

    std::vector<std::int64_t> clamp_counts(chunk_count(particles.size()), 0);
    parallel_chunks(particles.size(), [&](std::size_t c, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            SplineStencil st = make_stencil(particles.x[p], origin, dx);
            Vec3 v{};
            Mat3 b = Mat3::zero();
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        double w = st.weight(i, j, k);
                        Vec3 u = grid.velocity[grid.index(st.base[0] + i, st.base[1] + j,
                                                          st.base[2] + k)];
                        v += u * w;
                        b += Mat3::outer(u * w, st.dpos(i, j, k, dx));
                    }
            Mat3 cnew = b * d_inv;
            Vec3 xnew = particles.x[p] + v * params.dt;
            // keep advected particles inside the margin (sticky world)
            Vec3 gx = (xnew - origin) / dx;
            bool clamped = false;
            for (int a = 0; a < 3; ++a) {
                if (gx[a] < lo) { gx[a] = lo; clamped = true; }
                if (gx[a] > hi) { gx[a] = hi; clamped = true; }
            }
            if (clamped) {
                xnew = origin + gx * dx;
                ++clamp_counts[c];
            }
            particles.v[p] = v;
            particles.C[p] = cnew;
            particles.x[p] = xnew;
            particles.F[p] = apply_control(particles.F[p],
                                           controls ? (*controls)[p] : Mat3::zero(), cnew,
                                           params.dt);
        }
    });
    std::int64_t total = 0;
    for (auto c : clamp_counts) total += c;
    return int(total);
}

Tape simulate(const ParticleState& state0, const ControlField& controls,
              const SimParams& params, int timesteps) {
    params.validate();
    if (timesteps < 1) throw std::invalid_argument("simulate: timesteps must be >= 1");
    if (controls.stride < 1) throw std::invalid_argument("simulate: control stride must be >= 1");

    Tape tape;
    tape.params = params;
    tape.controls = controls;
    tape.states.reserve(timesteps + 1);
    tape.states.push_back(state0);

    P2gScratch scratch;
    GridState grid;
    ParticleState cur = state0;
    for (int t = 0; t < timesteps; ++t) {
        tape.stats.jacobian_clamps += p2g(cur, params, grid, &scratch);
        grid_update(grid, params);
        int slot = controls.slot_for_step(t);
        const std::vector<Mat3>* ctrl =
            (slot >= 0 && slot < int(controls.steps.size())) ? &controls.steps[slot] : nullptr;
        tape.stats.advection_clamps += g2p(grid, cur, params, ctrl);
        tape.control_slot.push_back(ctrl ? slot : -1);
        tape.states.push_back(cur);
    }
    p2g(cur, params, tape.final_grid, &scratch, /*mass_only=*/true);
    return tape;
}

namespace {

struct AdjointBuffers {
    std::vector<Vec3> x, v;
    std::vector<Mat3> C, F;
    void resize(std::size_t n) {
        x.assign(n, Vec3{});
        v.assign(n, Vec3{});
        C.assign(n, Mat3::zero());
        F.assign(n, Mat3::zero());
    }
};

// Reverse of one forward step t -> t+1. `in` holds the adjoint of state
// t+1 and is consumed; `out` receives the adjoint of state t.
void reverse_step(const ParticleState& state, const ParticleState& next,
                  const std::vector<Mat3>* controls, std::vector<Mat3>* control_grads,
                  const SimParams& params, GridState& grid, P2gScratch& scratch,
                  const AdjointBuffers& in, AdjointBuffers& out) {
    const std::size_t n = state.size();
    const double dx = params.dx;
    const double inv_dx = 1.0 / dx;
    const double d_inv = 4.0 * inv_dx * inv_dx;
    const double dt = params.dt;
    const Vec3 origin = params.grid_origin();
    const double stress_coeff = -dt * 4.0 * inv_dx * inv_dx / params.density;
    const double lo = params.margin_lo(), hi = params.margin_hi();

    // replay the grid of this step
    p2g(state, params, grid, &scratch);
    grid_update(grid, params);

    out.resize(n);
    std::vector<Mat3> b_bar(n);        // adjoint of the APIC gather matrix
    std::vector<Vec3> v_gather_bar(n); // adjoint of the gathered velocity

    // --- reverse F update and advection (pure map) ---
    parallel_ranges(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            Mat3 g = state.F[p] + (controls ? (*controls)[p] : Mat3::zero());
            Mat3 m = Mat3::identity() + next.C[p] * dt;
            Mat3 g_bar = m.transposed() * in.F[p];
            out.F[p] = g_bar;
            if (control_grads) (*control_grads)[p] += g_bar;
            Mat3 c_next_bar = in.C[p] + in.F[p] * g.transposed() * dt;
            b_bar[p] = c_next_bar * d_inv;

            // advection x' = clamp(x + dt v'); clamped components block flow
            Vec3 x_adv = state.x[p] + next.v[p] * dt;
            Vec3 gx = (x_adv - origin) / dx;
            Vec3 xb{}, vb = in.v[p];
            for (int a = 0; a < 3; ++a) {
                bool clamped = gx[a] < lo || gx[a] > hi;
                if (!clamped) {
                    xb[a] = in.x[p][a];
                    vb[a] += dt * in.x[p][a];
                }
            }
            out.x[p] = xb;
            v_gather_bar[p] = vb;
        }
    });

    // --- reverse G2P: scatter adjoint velocity to nodes, gather the
    // position term through the weight derivatives ---
    const std::size_t nodes = grid.node_count();
    const std::size_t chunks = chunk_count(n);
    std::vector<std::vector<Vec3>> u_bar_chunks(chunks);
    for (auto& cbuf : u_bar_chunks) cbuf.assign(nodes, Vec3{});

    parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        auto& ub = u_bar_chunks[c];
        for (std::size_t p = begin; p < end; ++p) {
            SplineStencil st = make_stencil(state.x[p], origin, dx);
            Vec3 x_accum{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        std::size_t node =
                            grid.index(st.base[0] + i, st.base[1] + j, st.base[2] + k);
                        double w = st.weight(i, j, k);
                        Vec3 dpos = st.dpos(i, j, k, dx);
                        Vec3 u = grid.velocity[node];
                        ub[node] += v_gather_bar[p] * w + (b_bar[p] * dpos) * w;
                        double coef = dot(u, v_gather_bar[p]) + dot(u, b_bar[p] * dpos);
                        x_accum += st.weight_grad(i, j, k, inv_dx) * coef;
                        x_accum -= (b_bar[p].transposed() * u) * w;
                    }
            out.x[p] += x_accum;
        }
    });

    std::vector<Vec3> u_bar(nodes);
    parallel_ranges(nodes, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Vec3 s{};
            for (std::size_t c = 0; c < chunks; ++c) s += u_bar_chunks[c][i];
            u_bar[i] = s;
        }
    });

    // --- reverse grid update: velocity back to momentum and mass ---
    std::vector<Vec3> mom_bar(nodes);
    std::vector<double> mass_bar(nodes);
    const double decay = 1.0 - params.drag * dt;
    const int res = grid.res;
    parallel_ranges(nodes, [&](std::size_t begin, std::size_t end) {
        for (std::size_t nd = begin; nd < end; ++nd) {
            int i = int(nd / (res * res));
            int j = int((nd / res) % res);
            int k = int(nd % res);
            Vec3 mb{};
            double sb = 0.0;
            double m = grid.mass[nd];
            if (m > 0.0 && !grid.is_boundary(i, j, k)) {
                mb = u_bar[nd] * (decay / m);
                sb = -(decay / (m * m)) * dot(grid.momentum[nd], u_bar[nd]);
            }
            mom_bar[nd] = mb;
            mass_bar[nd] = sb;
        }
    });

    // --- reverse P2G: pure gather per particle ---
    parallel_ranges(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            SplineStencil st = make_stencil(state.x[p], origin, dx);
            double m = state.mass[p];
            int clamp_flag = 0;
            Mat3 stress = compute_stress(state.F[p], params.mu, params.lambda, &clamp_flag);
            Mat3 affine = state.C[p] + stress * state.F[p].transposed() * stress_coeff;

            Vec3 vbar{};
            Mat3 abar = Mat3::zero();  // adjoint of the per-mass affine matrix
            Vec3 xbar{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        std::size_t node =
                            grid.index(st.base[0] + i, st.base[1] + j, st.base[2] + k);
                        double w = st.weight(i, j, k);
                        Vec3 dpos = st.dpos(i, j, k, dx);
                        const Vec3& mb = mom_bar[node];
                        vbar += mb * (w * m);
                        abar += Mat3::outer(mb, dpos) * (w * m);
                        double coef = m * mass_bar[node] +
                                      m * dot(mb, state.v[p] + affine * dpos);
                        xbar += st.weight_grad(i, j, k, inv_dx) * coef;
                        xbar -= (affine.transposed() * mb) * (w * m);
                    }
            out.v[p] = vbar;
            out.C[p] = abar;
            out.x[p] += xbar;
            Mat3 p_bar = abar * state.F[p] * stress_coeff;
            out.F[p] += abar.transposed() * stress * stress_coeff;
            out.F[p] += compute_stress_backward(state.F[p], p_bar, params.mu, params.lambda);
        }
    });
}

}  // namespace

AdjointResult adjoint(const Tape& tape, const FinalGradients& grad_final) {
    const int timesteps = tape.timesteps();
    if (timesteps < 1 || tape.states.size() != std::size_t(timesteps) + 1)
        throw std::invalid_argument("adjoint: tape/trajectory mismatch");
    const std::size_t n = tape.initial().size();
    auto check = [&](std::size_t sz, const char* what) {
        if (sz != 0 && sz != n) throw std::invalid_argument(std::string("adjoint: bad seed size for ") + what);
    };
    check(grad_final.x.size(), "x");
    check(grad_final.F.size(), "F");
    if (!grad_final.grid_mass.empty() &&
        grad_final.grid_mass.size() != tape.final_grid.node_count())
        throw std::invalid_argument("adjoint: bad grid_mass seed size");

    const SimParams& params = tape.params;
    AdjointBuffers cur, prev;
    cur.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        if (!grad_final.x.empty()) cur.x[p] = grad_final.x[p];
        if (!grad_final.F.empty()) cur.F[p] = grad_final.F[p];
    }

    // final mass snapshot backward: grid-mass gradient lands on positions
    if (!grad_final.grid_mass.empty()) {
        const ParticleState& fin = tape.final_state();
        const GridState& grid = tape.final_grid;
        const double inv_dx = 1.0 / params.dx;
        parallel_ranges(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                SplineStencil st = make_stencil(fin.x[p], grid.origin, params.dx);
                Vec3 acc{};
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        for (int k = 0; k < 3; ++k) {
                            std::size_t node =
                                grid.index(st.base[0] + i, st.base[1] + j, st.base[2] + k);
                            acc += st.weight_grad(i, j, k, inv_dx) *
                                   (fin.mass[p] * grad_final.grid_mass[node]);
                        }
                cur.x[p] += acc;
            }
        });
    }

    AdjointResult result;
    result.control_grads = ControlField::zeros(n, timesteps, tape.controls.stride);

    GridState grid;
    P2gScratch scratch;
    for (int t = timesteps - 1; t >= 0; --t) {
        int slot = tape.control_slot[t];
        const std::vector<Mat3>* control = nullptr;
        std::vector<Mat3>* control_grad = nullptr;
        if (slot >= 0) {
            control = &tape.controls.steps[slot];
            control_grad = &result.control_grads.steps[slot];
        }
        reverse_step(tape.states[t], tape.states[t + 1],
                     control, control_grad, params, grid, scratch, cur, prev);
        std::swap(cur, prev);
    }

    result.x0 = std::move(cur.x);
    result.v0 = std::move(cur.v);
    result.C0 = std::move(cur.C);
    result.F0 = std::move(cur.F);
    return result;
}

double kinetic_energy(const ParticleState& s) {
    double e = 0.0;
    for (std::size_t p = 0; p < s.size(); ++p) e += 0.5 * s.mass[p] * squared_norm(s.v[p]);
    return e;
}

}  // namespace physmorph
