#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "physmorph/mpm.hpp"
#include "physmorph/parallel.hpp"
#include "physmorph/rng.hpp"

using namespace physmorph;

namespace {

SimParams small_params() {
    SimParams p;
    p.grid_resolution = 8;
    p.dx = 1.0;
    p.mu = 1e3;
    p.lambda = 2e3;
    p.density = 60.0;
    return p;
}

// random cloud inside the margin of a given params box
ParticleState random_cloud(const SimParams& p, std::size_t n, uint64_t seed,
                           double vel_scale = 0.0, double f_jitter = 0.0) {
    Rng rng(seed);
    ParticleState s;
    s.resize(n);
    Vec3 origin = p.grid_origin();
    double lo = p.margin_lo() + 0.25, hi = p.margin_hi() - 0.25;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 gx{rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
        s.x[i] = origin + gx * p.dx;
        s.v[i] = rng.normal3() * vel_scale;
        s.mass[i] = rng.uniform(0.5, 2.0);
        if (f_jitter > 0.0) {
            Mat3 j;
            for (double& e : j.m) e = rng.uniform(-f_jitter, f_jitter);
            s.F[i] = Mat3::identity() + j;
        }
    }
    return s;
}

// 3x3x3 lattice of particles centered in the grid
ParticleState lattice27(const SimParams& p, double spacing, uint64_t seed) {
    ParticleState s = random_cloud(p, 27, seed, 0.05, 0.05);
    int idx = 0;
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j)
            for (int k = -1; k <= 1; ++k) s.x[idx++] = Vec3{i * spacing, j * spacing, k * spacing};
    return s;
}

double rel_err(double a, double b) {
    double d = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / d;
}

double total_particle_mass(const ParticleState& s) {
    double m = 0.0;
    for (double v : s.mass) m += v;
    return m;
}

}  // namespace

TEST_CASE("compute_stress rest state and rotations give zero") {
    CHECK(frobenius_norm(compute_stress(Mat3::identity(), 1e3, 2e4)) < 1e-9);
    Mat3 r = axis_rotation(2, 0.7);
    CHECK(frobenius_norm(compute_stress(r, 1e3, 2e4)) < 1e-8);
}

TEST_CASE("compute_stress matches direct evaluation for a uniaxial stretch") {
    // F = diag(1.1, 1, 1): R = I, J = 1.1, cof(F) = diag(1, 1.1, 1.1)
    // P = 2 mu (F - I) + lambda (J - 1) cof(F)
    double mu = 1e3, lambda = 2e4;
    Mat3 expected = Mat3::diag(2 * mu * 0.1 + lambda * 0.1 * 1.0,
                               lambda * 0.1 * 1.1,
                               lambda * 0.1 * 1.1);
    Mat3 p = compute_stress(Mat3::diag(1.1, 1, 1), mu, lambda);
    CHECK(frobenius_norm(p - expected) / frobenius_norm(expected) < 1e-12);
}

TEST_CASE("compute_stress_backward matches finite differences") {
    Rng rng(5);
    const double h = 1e-6;
    for (int trial = 0; trial < 30; ++trial) {
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
            CHECK(rel_err(fd, analytic.m[i]) < 1e-4);
        }
    }
}

TEST_CASE("apply_control hand values") {
    CHECK(apply_control(Mat3::diag(2, 3, 4), Mat3::zero(), Mat3::zero(), 0.01) ==
          Mat3::diag(2, 3, 4));
    Mat3 r = apply_control(Mat3::identity(), Mat3::identity() * 0.1, Mat3::zero(), 0.01);
    CHECK(frobenius_norm(r - Mat3::identity() * 1.1) < 1e-15);
    r = apply_control(Mat3::identity(), Mat3::zero(), Mat3::diag(1, 0, 0), 1.0 / 120.0);
    CHECK(frobenius_norm(r - Mat3::diag(1.0 + 1.0 / 120.0, 1, 1)) < 1e-15);
}

TEST_CASE("spline weights: partition of unity and cell-center pattern") {
    SimParams p = small_params();
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        Vec3 x{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        SplineStencil st = make_stencil(x, p.grid_origin(), p.dx);
        double sum = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) sum += st.weight(i, j, k);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    // particle at a cell center: per-axis weights (0.5, 0.5, 0)
    Vec3 center = p.grid_origin() + Vec3{4.5, 4.5, 4.5} * p.dx;
    SplineStencil st = make_stencil(center, p.grid_origin(), p.dx);
    CHECK(st.w[0][0] == doctest::Approx(0.5));
    CHECK(st.w[0][1] == doctest::Approx(0.5));
    CHECK(st.w[0][2] == doctest::Approx(0.0));
}

TEST_CASE("p2g conserves mass and is linear in particles") {
    SimParams p = small_params();
    GridState grid;
    ParticleState s = random_cloud(p, 40, 11);
    p2g(s, p, grid);
    CHECK(rel_err(grid.total_mass(), total_particle_mass(s)) < 1e-10);

    // duplicating every particle doubles the grid mass
    ParticleState s2 = s;
    for (std::size_t i = 0; i < s.size(); ++i) {
        s2.x.push_back(s.x[i]);
        s2.v.push_back(s.v[i]);
        s2.C.push_back(s.C[i]);
        s2.F.push_back(s.F[i]);
        s2.mass.push_back(s.mass[i]);
    }
    GridState grid2;
    p2g(s2, p, grid2);
    CHECK(rel_err(grid2.total_mass(), 2.0 * grid.total_mass()) < 1e-12);
}

TEST_CASE("p2g mass conservation across 50 random clouds") {
    SimParams p = small_params();
    GridState grid;
    for (int trial = 0; trial < 50; ++trial) {
        ParticleState s = random_cloud(p, 64, 1000 + trial, 0.1, 0.05);
        p2g(s, p, grid);
        CHECK(rel_err(grid.total_mass(), total_particle_mass(s)) < 1e-10);
    }
}

TEST_CASE("p2g rejects out-of-margin particles naming the index") {
    SimParams p = small_params();
    ParticleState s = random_cloud(p, 3, 2);
    s.x[1] = p.grid_origin();  // on the corner, outside margin
    GridState grid;
    CHECK_THROWS_WITH_AS(p2g(s, p, grid), doctest::Contains("particle 1"), std::runtime_error);
}

TEST_CASE("grid_update: drag scaling and sticky boundary") {
    SimParams p = small_params();
    GridState grid;
    grid.reset(p);
    std::size_t inner = grid.index(4, 4, 4);
    std::size_t wall = grid.index(0, 4, 4);
    grid.mass[inner] = 2.0;
    grid.momentum[inner] = Vec3{2.0, 0, 0};
    grid.mass[wall] = 1.0;
    grid.momentum[wall] = Vec3{1, 1, 1};

    SUBCASE("no drag, no force leaves velocity untouched") {
        p.drag = 0.0;
        grid_update(grid, p);
        CHECK(grid.velocity[inner].x == doctest::Approx(1.0));
    }
    SUBCASE("drag 0.5 at dt=1/120 scales by (1 - 0.5/120)") {
        p.drag = 0.5;
        p.dt = 1.0 / 120.0;
        grid_update(grid, p);
        CHECK(grid.velocity[inner].x == doctest::Approx(1.0 * (1.0 - 0.5 / 120.0)));
    }
    SUBCASE("boundary nodes are zeroed") {
        grid_update(grid, p);
        CHECK(norm(grid.velocity[wall]) == 0.0);
    }
}

TEST_CASE("g2p reproduces constant and linear grid fields") {
    SimParams p = small_params();
    GridState grid;
    grid.reset(p);
    Vec3 u{0.3, -0.2, 0.1};
    for (auto& v : grid.velocity) v = u;

    ParticleState s = random_cloud(p, 30, 17);
    ParticleState before = s;
    g2p(grid, s, p, nullptr);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(norm(s.v[i] - u) < 1e-12);
        CHECK(frobenius_norm(s.C[i]) < 1e-12);
        CHECK(norm(s.x[i] - (before.x[i] + u * p.dt)) < 1e-12);
    }

    // zero grid leaves positions unchanged
    grid.reset(p);
    s = before;
    g2p(grid, s, p, nullptr);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.x[i] == before.x[i]);

    // linear field v(x) = A x recovers C = A on interior particles
    Mat3 a{{0.01, 0.02, -0.01, 0.0, -0.02, 0.01, 0.03, 0.0, 0.01}};
    for (int i = 0; i < grid.res; ++i)
        for (int j = 0; j < grid.res; ++j)
            for (int k = 0; k < grid.res; ++k) {
                Vec3 xn = grid.origin + Vec3{double(i), double(j), double(k)} * grid.dx;
                grid.velocity[grid.index(i, j, k)] = a * xn;
            }
    s = before;
    g2p(grid, s, p, nullptr);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(frobenius_norm(s.C[i] - a) < 1e-6);
}

TEST_CASE("simulate: equilibrium stays put and T=1 equals manual composition") {
    SimParams p = small_params();
    ParticleState s = random_cloud(p, 20, 23);  // zero velocity, F = I
    ControlField zero = ControlField::zeros(s.size(), 4, 1);
    Tape tape = simulate(s, zero, p, 4);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(tape.final_state().x[i] == s.x[i]);
        CHECK(norm(tape.final_state().v[i]) == 0.0);
    }

    ParticleState moving = random_cloud(p, 20, 29, 0.2, 0.02);
    ControlField one = ControlField::zeros(moving.size(), 1, 1);
    Rng rng(31);
    for (auto& m : one.steps[0])
        for (double& e : m.m) e = rng.uniform(-0.01, 0.01);
    Tape t1 = simulate(moving, one, p, 1);

    ParticleState manual = moving;
    GridState grid;
    p2g(manual, p, grid);
    grid_update(grid, p);
    g2p(grid, manual, p, &one.steps[0]);
    for (std::size_t i = 0; i < manual.size(); ++i) {
        CHECK(t1.final_state().x[i] == manual.x[i]);
        CHECK(t1.final_state().v[i] == manual.v[i]);
        CHECK(t1.final_state().F[i] == manual.F[i]);
    }
}

TEST_CASE("kinetic energy decays under drag for a rigid translation") {
    SimParams p = small_params();
    p.drag = 0.5;
    ParticleState s = random_cloud(p, 27, 37);
    for (auto& v : s.v) v = Vec3{0.5, 0.2, -0.1};
    ControlField zero = ControlField::zeros(s.size(), 10, 1);
    Tape tape = simulate(s, zero, p, 10);
    double prev = kinetic_energy(tape.states[0]);
    for (int t = 1; t <= 10; ++t) {
        double e = kinetic_energy(tape.states[t]);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("energy trace decays for a gentle random cloud") {
    SimParams p = small_params();
    p.drag = 0.5;
    ParticleState s = random_cloud(p, 64, 41, 0.3);
    ControlField zero = ControlField::zeros(s.size(), 10, 1);
    Tape tape = simulate(s, zero, p, 10);
    double first = kinetic_energy(tape.states[0]);
    double last = kinetic_energy(tape.states[10]);
    CHECK(last < first);
}

TEST_CASE("translation equivariance by one full cell") {
    SimParams p = small_params();
    p.grid_resolution = 16;
    ParticleState s = random_cloud(p, 27, 43, 0.1, 0.05);
    // park the cloud deep in the interior so neither copy sees the boundary
    Vec3 origin = p.grid_origin();
    for (auto& x : s.x) {
        Vec3 gx = (x - origin) / p.dx;
        for (int a = 0; a < 3; ++a) gx[a] = 5.0 + 0.2 * (gx[a] - p.margin_lo());
        x = origin + gx * p.dx;
    }
    ParticleState shifted = s;
    for (auto& x : shifted.x) x += Vec3{p.dx, 0, 0};

    ControlField c = ControlField::zeros(s.size(), 3, 1);
    Rng rng(47);
    for (auto& slot : c.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.02, 0.02);

    Tape a = simulate(s, c, p, 3);
    Tape b = simulate(shifted, c, p, 3);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(norm(b.final_state().x[i] - a.final_state().x[i] - Vec3{p.dx, 0, 0}) < 1e-9);
        CHECK(norm(b.final_state().v[i] - a.final_state().v[i]) < 1e-9);
        CHECK(frobenius_norm(b.final_state().F[i] - a.final_state().F[i]) < 1e-9);
    }
}

TEST_CASE("simulate is bit-identical in serial and parallel modes") {
    SimParams p = small_params();
    ParticleState s = random_cloud(p, 64, 53, 0.2, 0.05);
    ControlField c = ControlField::zeros(s.size(), 5, 2);
    Rng rng(59);
    for (auto& slot : c.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.02, 0.02);

    set_thread_count(1);
    Tape serial = simulate(s, c, p, 5);
    set_thread_count(4);
    Tape parallel = simulate(s, c, p, 5);
    set_thread_count(1);

    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(serial.final_state().x[i] == parallel.final_state().x[i]);
        CHECK(serial.final_state().v[i] == parallel.final_state().v[i]);
        CHECK(serial.final_state().C[i] == parallel.final_state().C[i]);
        CHECK(serial.final_state().F[i] == parallel.final_state().F[i]);
    }
    for (std::size_t i = 0; i < serial.final_grid.node_count(); ++i)
        CHECK(serial.final_grid.mass[i] == parallel.final_grid.mass[i]);
}

namespace {

// scalar loss of the final grid mass used by the adjoint FD tests:
// sum_i log(m_i + 1)^2 (same shape as the grid mass objective)
double mass_style_loss(const GridState& g) {
    double s = 0.0;
    for (double m : g.mass) {
        double t = std::log(m + 1.0);
        s += t * t;
    }
    return s;
}

std::vector<double> mass_style_loss_grad(const GridState& g) {
    std::vector<double> out(g.node_count());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = 2.0 * std::log(g.mass[i] + 1.0) / (g.mass[i] + 1.0);
    return out;
}

}  // namespace

TEST_CASE("adjoint: zero seed gives zero gradients") {
    SimParams p = small_params();
    ParticleState s = random_cloud(p, 8, 61, 0.1, 0.02);
    ControlField c = ControlField::zeros(s.size(), 3, 1);
    Tape tape = simulate(s, c, p, 3);
    AdjointResult r = adjoint(tape, FinalGradients{});
    for (const auto& slot : r.control_grads.steps)
        for (const auto& m : slot) CHECK(frobenius_norm(m) == 0.0);
    for (const auto& v : r.x0) CHECK(norm(v) == 0.0);
}

TEST_CASE("adjoint matches finite differences on control entries") {
    SimParams p = small_params();
    p.mu = 1e3;
    p.lambda = 2e3;
    ParticleState s = lattice27(p, 0.6, 67);
    const int timesteps = 3;
    ControlField c = ControlField::zeros(s.size(), timesteps, 1);
    Rng rng(71);
    for (auto& slot : c.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.03, 0.03);

    Tape tape = simulate(s, c, p, timesteps);
    FinalGradients seed;
    seed.grid_mass = mass_style_loss_grad(tape.final_grid);
    AdjointResult r = adjoint(tape, seed);

    const double h = 1e-5;
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        int slot = int(rng.below(c.steps.size()));
        int particle = int(rng.below(s.size()));
        int entry = int(rng.below(9));

        ControlField cp = c, cm = c;
        cp.steps[slot][particle].m[entry] += h;
        cm.steps[slot][particle].m[entry] -= h;
        double lp = mass_style_loss(simulate(s, cp, p, timesteps).final_grid);
        double lm = mass_style_loss(simulate(s, cm, p, timesteps).final_grid);
        double fd = (lp - lm) / (2 * h);
        double an = r.control_grads.steps[slot][particle].m[entry];
        if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
        CHECK(rel_err(fd, an) < 1e-3);
        ++checked;
    }
    CHECK(checked >= 10);
}

TEST_CASE("adjoint matches finite differences on initial position and velocity") {
    SimParams p = small_params();
    ParticleState s = lattice27(p, 0.6, 73);
    const int timesteps = 2;
    ControlField c = ControlField::zeros(s.size(), timesteps, 1);
    Rng rng(79);
    for (auto& slot : c.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.02, 0.02);

    Tape tape = simulate(s, c, p, timesteps);
    FinalGradients seed;
    seed.grid_mass = mass_style_loss_grad(tape.final_grid);
    AdjointResult r = adjoint(tape, seed);

    const double h = 1e-5;
    for (int trial = 0; trial < 12; ++trial) {
        int particle = int(rng.below(s.size()));
        int axis = int(rng.below(3));
        bool test_velocity = trial % 2 == 0;

        ParticleState sp = s, sm = s;
        (test_velocity ? sp.v : sp.x)[particle][axis] += h;
        (test_velocity ? sm.v : sm.x)[particle][axis] -= h;
        double lp = mass_style_loss(simulate(sp, c, p, timesteps).final_grid);
        double lm = mass_style_loss(simulate(sm, c, p, timesteps).final_grid);
        double fd = (lp - lm) / (2 * h);
        double an = test_velocity ? r.v0[particle][axis] : r.x0[particle][axis];
        if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
        CHECK(rel_err(fd, an) < 1e-3);
    }
}

TEST_CASE("adjoint carries final-state F and x seeds") {
    SimParams p = small_params();
    ParticleState s = lattice27(p, 0.6, 83);
    const int timesteps = 2;
    ControlField c = ControlField::zeros(s.size(), timesteps, 1);
    Rng rng(89);
    for (auto& slot : c.steps)
        for (auto& m : slot)
            for (double& e : m.m) e = rng.uniform(-0.03, 0.03);

    // loss = <W, F_final> + <u, x_final> over all particles
    std::vector<Mat3> wf(s.size());
    std::vector<Vec3> wx(s.size());
    for (auto& m : wf)
        for (double& e : m.m) e = rng.uniform(-1, 1);
    for (auto& v : wx) v = rng.normal3();

    auto loss = [&](const Tape& t) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            acc += frobenius_dot(wf[i], t.final_state().F[i]);
            acc += dot(wx[i], t.final_state().x[i]);
        }
        return acc;
    };

    Tape tape = simulate(s, c, p, timesteps);
    FinalGradients seed;
    seed.F = wf;
    seed.x = wx;
    AdjointResult r = adjoint(tape, seed);

    const double h = 1e-5;
    for (int trial = 0; trial < 15; ++trial) {
        int slot = int(rng.below(c.steps.size()));
        int particle = int(rng.below(s.size()));
        int entry = int(rng.below(9));
        ControlField cp = c, cm = c;
        cp.steps[slot][particle].m[entry] += h;
        cm.steps[slot][particle].m[entry] -= h;
        double fd = (loss(simulate(s, cp, p, timesteps)) - loss(simulate(s, cm, p, timesteps))) / (2 * h);
        double an = r.control_grads.steps[slot][particle].m[entry];
        if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
        CHECK(rel_err(fd, an) < 1e-3);
    }
}

TEST_CASE("adjoint rejects mismatched seeds") {
    SimParams p = small_params();
    ParticleState s = random_cloud(p, 5, 97);
    ControlField c = ControlField::zeros(s.size(), 2, 1);
    Tape tape = simulate(s, c, p, 2);
    FinalGradients bad;
    bad.x.resize(3);
    CHECK_THROWS(adjoint(tape, bad));
}
