#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "upwind/stochastic.hpp"

using namespace upwind;

namespace {

TransitionTable half_courant_line(CellIndex cells, Boundary boundary) {
    const auto line = build_mesh(1, {1.0, 0.0}, {cells, 1}, boundary);
    const double dt = line.width(0) / 2;
    return assemble_transitions(assemble_fluxes(builtin_constant({1.0, 0.0}, 1), line, 0, 0.0, dt), dt);
}

/// Kolmogorov-Smirnov statistic of samples against U(lo, lo + w).
double ks_uniform(std::vector<double> xs, double lo, double w) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / w;
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

}  // namespace

TEST_CASE("identity transitions never move a particle") {
    const auto mesh = unit_torus(2, 4);
    const TransitionTable identity(mesh, 0, 0.1);
    CounterRng rng(1, 0);
    const Point x{0.3, 0.6};
    for (int i = 0; i < 1000; ++i) {
        const auto out = jump(x, locate_cell(mesh, x), identity, rng);
        CHECK_FALSE(out.moved);
        CHECK(out.position == x);
    }
}

TEST_CASE("jump frequency and landing distribution") {
    const auto table = half_courant_line(16, Boundary::Periodic);
    const auto& mesh = table.mesh();
    const int samples = 1000000;
    int moved = 0;
    std::vector<double> landed;
    const Point x{0.5 * mesh.width(0) + 3 * mesh.width(0), 0.0};
    for (int i = 0; i < samples; ++i) {
        CounterRng rng(42, std::uint64_t(i));
        const auto out = jump(x, 3, table, rng);
        if (out.moved) {
            ++moved;
            CHECK(out.cell == 4);
            if (landed.size() < 20000) landed.push_back(out.position[0]);
        }
    }
    const double sigma = std::sqrt(0.25 / samples);
    CHECK(std::abs(double(moved) / samples - 0.5) <= 3 * sigma);
    // 1% critical value of the KS statistic.
    CHECK(ks_uniform(landed, 4 * mesh.width(0), mesh.width(0)) <= 1.63 / std::sqrt(double(landed.size())));
}

TEST_CASE("initial sampling") {
    const auto mesh = unit_torus(2, 4);
    std::vector<double> v(16, 0.0);
    v[5] = 2.0;
    v[6] = 1.0;
    const auto ens = sample_initial(CellField(mesh, v), 3000, 9);
    CHECK(ens.weight * 3000 == doctest::Approx(3.0 / 16));
    for (std::size_t i = 0; i < ens.positions.size(); ++i) {
        CHECK((ens.cells[i] == 5 || ens.cells[i] == 6));
        CHECK(locate_cell(mesh, ens.positions[i]) == ens.cells[i]);
    }
    v[0] = -1.0;
    CHECK_THROWS_AS(sample_initial(CellField(mesh, v), 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_initial(constant_field(mesh, 0.0), 10, 1), std::invalid_argument);
}

TEST_CASE("zero field freezes the ensemble") {
    const auto mesh = unit_torus(2, 8);
    const auto sim = simulate(constant_field(mesh, 1.0), field_by_name("zero"), 0.01, 10, 5000, 3);
    CHECK(sim.max_increment == 0.0);
    for (double s : sim.martingale_sup) CHECK(s == 0.0);
    for (std::size_t n = 1; n < sim.histograms.size(); ++n) CHECK(sim.histograms[n] == sim.histograms[0]);
}

TEST_CASE("increments are bounded by 4h and centered per cell") {
    for (const char* name : {"constant", "sobolev"}) {
        const auto mesh = unit_torus(2, 16);
        const double dt = mesh.width(0) / 4;
        const auto sim = simulate(constant_field(mesh, 1.0), field_by_name(name), dt, 12, 200000, 17);
        CHECK(sim.max_increment <= 4 * mesh.diameter());
        const auto centering = centering_check(sim);
        CHECK(centering.checked > 0);
        CHECK(centering.pass);
    }
}

TEST_CASE("1-D drift equals dt times the net flow") {
    const auto table = half_courant_line(32, Boundary::Periodic);
    const auto& mesh = table.mesh();
    const double dt = mesh.width(0) / 2;
    const auto sim = simulate(constant_field(mesh, 1.0), builtin_constant({1.0, 0.0}, 1), dt, 8, 200000, 5);
    std::int64_t count = 0;
    double disp = 0.0, drift = 0.0;
    for (std::size_t k = 0; k < sim.cell_count.size(); ++k) {
        count += sim.cell_count[k];
        disp += sim.cell_displacement_sum[k][0];
        drift += sim.cell_drift_sum[k][0];
    }
    CHECK(drift / count == doctest::Approx(dt).epsilon(1e-12));
    // Displacement variance per step is at most (2h)^2.
    const double sigma = 2 * mesh.width(0) / std::sqrt(double(count));
    CHECK(std::abs(disp / count - dt) <= 4 * sigma);
}

TEST_CASE("cell law after two half-Courant steps") {
    const auto line = build_mesh(1, {1.0, 0.0}, {16, 1}, Boundary::NoFlux);
    std::vector<double> e0(16, 0.0);
    e0[0] = 16.0;
    const CellField rho0(line, e0);
    const double dt = line.width(0) / 2;
    const auto f = builtin_constant({1.0, 0.0}, 1);
    const std::int64_t m = 400000;
    const auto sim = simulate(rho0, f, dt, 2, m, 11);
    const auto& hist = sim.histograms[2];
    const double expect[] = {0.25, 0.5, 0.25};
    for (int k = 0; k < 3; ++k) {
        const double p = expect[k];
        CHECK(std::abs(double(hist[k]) / m - p) <= 4 * std::sqrt(p * (1 - p) / m));
    }
    RunOptions opts;
    opts.keep_trajectory = true;
    const auto traj = run(rho0, f, dt, 2 * dt, opts).trajectory;
    const auto report = empirical_law_check(sim, traj);
    CHECK(report.pass());
}

TEST_CASE("law check on the constant field torus") {
    const auto mesh = unit_torus(2, 8);
    const double dt = mesh.width(0) / 4;
    const auto f = builtin_constant({0.0, 1.0});
    std::vector<double> v(64);
    for (std::size_t k = 0; k < 64; ++k) v[k] = 1.0 + 0.5 * std::sin(double(k));
    const CellField rho0(mesh, v);
    RunOptions opts;
    opts.keep_trajectory = true;
    const auto traj = run(rho0, f, dt, 16 * dt, opts).trajectory;
    const auto sim = simulate(rho0, f, dt, 16, 100000, 23);
    const auto report = empirical_law_check(sim, traj);
    CHECK(report.steps.size() == 17);
    CHECK(report.pass());
    // Mismatched trajectories are rejected.
    std::vector<CellField> short_traj(traj.begin(), traj.begin() + 5);
    CHECK_THROWS(empirical_law_check(sim, short_traj));
}

TEST_CASE("determinism across runs") {
    const auto mesh = unit_torus(2, 8);
    const auto f = builtin_sobolev_shear();
    const auto a = simulate(constant_field(mesh, 1.0), f, 1.0 / 32, 6, 20000, 99);
    const auto b = simulate(constant_field(mesh, 1.0), f, 1.0 / 32, 6, 20000, 99);
    CHECK(a.histograms == b.histograms);
    CHECK(a.martingale_sup == b.martingale_sup);
    CHECK(a.increment_sq_sum == b.increment_sq_sum);
}

TEST_CASE("martingale scaling fits") {
    CHECK_THROWS_AS(martingale_scaling({{0.1, 1.0}, {0.05, 0.7}}), std::invalid_argument);
    std::vector<ScalingSample> zero{{0.25, 0.0}, {0.125, 0.0}, {0.0625, 0.0}};
    CHECK(martingale_scaling(zero).degenerate);
    std::vector<ScalingSample> synthetic;
    for (double h : {0.1, 0.05, 0.025, 0.0125}) synthetic.push_back({h, 3.0 * std::sqrt(h)});
    const auto rep = martingale_scaling(synthetic);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.slope == doctest::Approx(0.5).epsilon(1e-12));

    ScalingSweepConfig cfg;
    cfg.field = builtin_constant({0.0, 1.0});
    cfg.exponents = {3, 4, 5, 6};
    cfg.particles = 20000;
    const auto samples = martingale_sweep(cfg);
    const auto fit = martingale_scaling(samples);
    CHECK(fit.slope > 0.35);
    CHECK(fit.slope < 0.65);
    for (const auto& s : samples) {
        CHECK(s.max_increment <= 4 * s.diameter);
        CHECK(s.moment_constant > 0.0);
        CHECK(s.moment_constant < 10.0);
    }
}

TEST_CASE("particle dump") {
    const auto mesh = unit_torus(2, 4);
    const auto ens = sample_initial(constant_field(mesh, 1.0), 10, 1);
    const auto path = (std::filesystem::temp_directory_path() / "upwind_particles_test.bin").string();
    {
        ParticleDumpWriter writer(path, 2, 10);
        writer.write(ens);
        writer.write(ens);
    }
    CHECK(std::filesystem::file_size(path) == 8 + 4 + 8 + 2 * (8 + 10 * 2 * 8));
    std::filesystem::remove(path);
}
