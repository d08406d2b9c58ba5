#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "upwind/mesh.hpp"
#include "upwind/rng.hpp"
#include "upwind/scheme.hpp"
#include "upwind/velocity.hpp"

namespace upwind {

/// Random characteristics psi^n sampled from rho_h^0. `cells` holds the
/// chain J^n = cell of psi^n, tracked exactly rather than re-located from
/// the floating-point position.
struct ParticleEnsemble {
    CartesianMesh mesh;
    std::vector<Point> positions;
    std::vector<CellIndex> cells;
    /// Every particle carries the same weight; total weight = mass of rho_h^0.
    double weight = 0.0;
    std::uint64_t seed = 0;
    long step = 0;
};

struct JumpOutcome {
    Point position;
    /// psi^{n+1} - psi^n without periodic wrapping.
    Point displacement;
    CellIndex cell;
    bool moved = false;
};

/// One draw from the jump kernel q^n(x, dy): stay at x with probability
/// p_KK, otherwise land uniformly in the neighbor L chosen with p_KL.
JumpOutcome jump(const Point& position, CellIndex cell, const TransitionTable& transitions,
                 CounterRng& rng);

/// Draws `count` particles with cell chosen proportionally to |K| rho_K^0
/// and position uniform in the cell. Throws on negative data.
ParticleEnsemble sample_initial(const CellField& rho0, std::int64_t count, std::uint64_t seed);

struct SimulationOptions {
    EdgeQuadrature quadrature{};
    /// Keep the cell histogram of J^n for every n (needed for law checks).
    bool record_histograms = true;
    /// Pool xi statistics per cell (conditional centering checks).
    bool record_cell_moments = true;
    /// Called on the driver thread with the ensemble at every n = 0..N.
    std::function<void(const ParticleEnsemble&)> hook;
};

struct SimulationResult {
    CartesianMesh mesh;
    long steps = 0;
    std::int64_t particles = 0;
    double weight = 0.0;
    double dt = 0.0;
    /// histograms[n][K] = #{i : J_i^n = K}.
    std::vector<std::vector<std::int64_t>> histograms{};

    /// Martingale M_k = sum_{l<k} xi^l per particle.
    std::vector<Point> martingale{};
    /// sup_{1<=k<=N} |M_k| per particle.
    std::vector<double> martingale_sup{};

    double max_increment = 0.0;
    /// Number of sampled increments and sum of |xi|^2 over all of them.
    std::int64_t increment_count = 0;
    double increment_sq_sum = 0.0;
    /// Sum over steps of u_inf^n dt (normalizer for the moment bound).
    double sup_flux_time = 0.0;

    /// Pooled over steps, per cell and component: count, sum xi, sum xi^2.
    std::vector<std::int64_t> cell_count{};
    std::vector<Point> cell_xi_sum{};
    std::vector<Point> cell_xi_sq_sum{};

    /// Per-cell pooled displacement sums and the matching sum of dt u_K^n;
    /// their difference is the pooled xi sum.
    std::vector<Point> cell_displacement_sum{};
    std::vector<Point> cell_drift_sum{};

    double mean_martingale_sup() const;
    /// E|xi|^2 averaged over steps and particles.
    double mean_increment_sq() const;
};

/// Runs N steps of the continuous-state chain driven by the scheme's
/// transition probabilities. xi^n = psi^{n+1} - psi^n - dt u_h^n(psi^n) with
/// the cell-constant net flow u_h^n.
SimulationResult simulate(const CellField& rho0, const VelocityField& field, double dt, long steps,
                          std::int64_t particles, std::uint64_t seed,
                          const SimulationOptions& options = {});

struct LawStep {
    long step = 0;
    /// Total variation between the empirical cell law and |K| rho_K^n / mass.
    double tv = 0.0;
    /// 1/2 sum_K 3 sigma_K with sigma_K the multinomial standard deviation.
    double sigma_band = 0.0;
    /// Configured tolerance, default 5 sqrt(cells / M).
    double tolerance = 0.0;
    /// Smallest exact two-sided binomial p-value over the checked cells.
    double min_binomial_p = 1.0;
    bool within_band = false;
    bool within_tolerance = false;
    bool binomial_ok = true;
};

struct LawCheckOptions {
    /// Multiplier c in c sqrt(cells / M); the default tolerance uses 5.
    double tolerance_factor = 5.0;
    int binomial_cells = 16;
    double binomial_alpha = 1e-6;
    std::uint64_t seed = 7;
};

struct LawCheckReport {
    std::vector<LawStep> steps;
    double max_tv = 0.0;
    bool pass_band = true;
    bool pass_tolerance = true;
    bool pass_binomial = true;
    bool pass() const { return pass_band && pass_tolerance && pass_binomial; }
};

/// Compares the ensemble's per-step cell histograms with the scheme
/// trajectory. Throws if meshes or step counts disagree.
LawCheckReport empirical_law_check(const SimulationResult& sim,
                                   const std::vector<CellField>& trajectory,
                                   const LawCheckOptions& options = {});

/// Per-cell conditional centering: |mean xi| <= z * std / sqrt(count) per
/// cell and component (cells with fewer than `min_count` samples skipped).
struct CenteringReport {
    double worst_z = 0.0;
    CellIndex worst_cell = 0;
    int checked = 0;
    bool pass = true;
};
CenteringReport centering_check(const SimulationResult& sim, double z = 4.0,
                                std::int64_t min_count = 30);

struct ScalingSample {
    double h = 0.0;
    double mean_sup = 0.0;
    /// Observed C in E|xi|^2 <= C dt u_inf h.
    double moment_constant = 0.0;
    double max_increment = 0.0;
    double diameter = 0.0;
};

struct ScalingReport {
    std::vector<ScalingSample> samples;
    double slope = 0.0;
    double intercept = 0.0;
    bool degenerate = false;
};

/// Least-squares slope of log E[sup |M|] against log h. Needs >= 3 samples;
/// reports `degenerate` when the martingale vanishes identically.
ScalingReport martingale_scaling(const std::vector<ScalingSample>& samples);

struct ScalingSweepConfig {
    VelocityField field;
    /// Cell widths h = 2^-k for these k.
    std::vector<int> exponents{4, 5, 6, 7, 8};
    double T = 1.0;
    double dt_ratio = 0.25;
    std::int64_t particles = 100000;
    std::uint64_t seed = 1;
};

/// Runs simulate() on the unit torus at every h of the sweep from uniform
/// rho0 and collects one ScalingSample per h.
std::vector<ScalingSample> martingale_sweep(const ScalingSweepConfig& config);

ScalingSample scaling_sample(const SimulationResult& sim, double h);

/// Flat binary particle dump: magic "UPWPTS01", int32 dim, int64 count, then
/// per call one record of int64 step followed by count * dim doubles.
class ParticleDumpWriter {
public:
    ParticleDumpWriter(const std::string& path, int dim, std::int64_t count);
    void write(const ParticleEnsemble& ensemble);

private:
    std::string path_;
    int dim_;
    std::int64_t count_;
};

}  // namespace upwind
