#include "upwind/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <boost/math/distributions/binomial.hpp>

namespace upwind {
namespace {

constexpr int kBlocks = 64;
/// Counter slots reserved per step: one choice draw plus one per axis.
constexpr std::uint64_t kDrawsPerStep = 4;

double uniform_in(double lo, double width, double u) {
    const double hi = lo + width;
    return std::min(lo + u * width, std::nextafter(hi, lo));
}

double norm(const Point& p) { return std::hypot(p[0], p[1]); }

}  // namespace

JumpOutcome jump(const Point& position, CellIndex cell, const TransitionTable& transitions,
                 CounterRng& rng) {
    const CartesianMesh& mesh = transitions.mesh();
    const double choice = rng.uniform();
    double cumulative = 0.0;
    for (int a = 0; a < mesh.dim(); ++a) {
        for (int dir : {-1, 1}) {
            const EdgeId e{cell, a, dir > 0 ? Side::High : Side::Low};
            const double p = transitions.jump(e);
            if (p <= 0.0) continue;
            cumulative += p;
            if (choice >= cumulative) continue;
            const CellIndex target = *mesh.neighbor(cell, a, dir);
            const Point corner = mesh.lower_corner(target);
            Point unwrapped_corner = mesh.lower_corner(cell);
            unwrapped_corner[a] += dir * mesh.width(a);
            JumpOutcome out{};
            out.cell = target;
            out.moved = true;
            for (int b = 0; b < mesh.dim(); ++b) {
                const double u = rng.uniform();
                out.position[b] = uniform_in(corner[b], mesh.width(b), u);
                out.displacement[b] = out.position[b] - corner[b] + unwrapped_corner[b] - position[b];
            }
            return out;
        }
    }
    return JumpOutcome{position, Point{0.0, 0.0}, cell, false};
}

ParticleEnsemble sample_initial(const CellField& rho0, std::int64_t count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("need at least one particle");
    const CartesianMesh& mesh = rho0.mesh;
    std::vector<double> cumulative(rho0.values.size());
    double total = 0.0;
    for (std::size_t k = 0; k < rho0.values.size(); ++k) {
        if (rho0.values[k] < 0.0) {
            throw std::invalid_argument(
                "particle representation needs a nonnegative initial density");
        }
        total += rho0.values[k] * mesh.cell_volume();
        cumulative[k] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("initial density has zero mass");

    ParticleEnsemble ens{mesh, {}, {}, total / static_cast<double>(count), seed, 0};
    ens.positions.resize(static_cast<std::size_t>(count));
    ens.cells.resize(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        const double target = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        if (it == cumulative.end()) --it;
        // Skip empty cells that share the cumulative value.
        while (it != cumulative.begin() && rho0.values[static_cast<std::size_t>(it - cumulative.begin())] == 0.0) --it;
        const auto cell = static_cast<CellIndex>(it - cumulative.begin());
        const Point lo = mesh.lower_corner(cell);
        Point x{0.0, 0.0};
        for (int a = 0; a < mesh.dim(); ++a) x[a] = uniform_in(lo[a], mesh.width(a), rng.uniform());
        ens.positions[static_cast<std::size_t>(i)] = x;
        ens.cells[static_cast<std::size_t>(i)] = cell;
    }
    return ens;
}

double SimulationResult::mean_martingale_sup() const {
    if (martingale_sup.empty()) return 0.0;
    double s = 0.0;
    for (double v : martingale_sup) s += v;
    return s / static_cast<double>(martingale_sup.size());
}

double SimulationResult::mean_increment_sq() const {
    return increment_count > 0 ? increment_sq_sum / static_cast<double>(increment_count) : 0.0;
}

namespace {

struct BlockPartial {
    std::vector<std::int64_t> histogram;
    double max_increment = 0.0;
    double sq_sum = 0.0;
    std::vector<std::int64_t> cell_count;
    std::vector<Point> xi_sum;
    std::vector<Point> xi_sq;
    std::vector<Point> disp_sum;
    std::vector<Point> drift_sum;

    void reset(std::size_t cells, bool histograms, bool moments) {
        max_increment = 0.0;
        sq_sum = 0.0;
        if (histograms) histogram.assign(cells, 0);
        if (moments) {
            cell_count.assign(cells, 0);
            xi_sum.assign(cells, Point{0.0, 0.0});
            xi_sq.assign(cells, Point{0.0, 0.0});
            disp_sum.assign(cells, Point{0.0, 0.0});
            drift_sum.assign(cells, Point{0.0, 0.0});
        }
    }
};

}  // namespace

SimulationResult simulate(const CellField& rho0, const VelocityField& field, double dt, long steps,
                          std::int64_t particles, std::uint64_t seed,
                          const SimulationOptions& options) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (steps < 0) throw std::invalid_argument("step count must be nonnegative");
    ParticleEnsemble ens = sample_initial(rho0, particles, seed);
    const CartesianMesh& mesh = rho0.mesh;
    const auto ncells = static_cast<std::size_t>(mesh.cell_count());
    const auto np = static_cast<std::size_t>(particles);

    SimulationResult res{mesh};
    res.steps = steps;
    res.particles = particles;
    res.weight = ens.weight;
    res.dt = dt;
    res.martingale.assign(np, Point{0.0, 0.0});
    res.martingale_sup.assign(np, 0.0);
    if (options.record_cell_moments) {
        res.cell_count.assign(ncells, 0);
        res.cell_xi_sum.assign(ncells, Point{0.0, 0.0});
        res.cell_xi_sq_sum.assign(ncells, Point{0.0, 0.0});
        res.cell_displacement_sum.assign(ncells, Point{0.0, 0.0});
        res.cell_drift_sum.assign(ncells, Point{0.0, 0.0});
    }
    auto record_histogram = [&]() {
        std::vector<std::int64_t> h(ncells, 0);
        for (CellIndex c : ens.cells) ++h[static_cast<std::size_t>(c)];
        res.histograms.push_back(std::move(h));
    };
    if (options.record_histograms) record_histogram();
    if (options.hook) options.hook(ens);

    const int blocks = static_cast<int>(std::min<std::int64_t>(kBlocks, particles));
    std::vector<BlockPartial> partials(static_cast<std::size_t>(blocks));

    std::optional<TransitionTable> table;
    std::vector<Point> drift(ncells);
    for (long n = 0; n < steps; ++n) {
        if (!table || !field.stationary) {
            const double t = static_cast<double>(n) * dt;
            const EdgeFluxSet fluxes = assemble_fluxes(field, mesh, n, t, dt, options.quadrature);
            table = assemble_transitions(fluxes, dt);
            for (std::size_t c = 0; c < ncells; ++c) {
                const Point u = net_flow(fluxes, static_cast<CellIndex>(c));
                drift[c] = Point{dt * u[0], dt * u[1]};
            }
        }
        res.sup_flux_time += dt * field.sup_bound;

#pragma omp parallel for schedule(static)
        for (int b = 0; b < blocks; ++b) {
            BlockPartial& part = partials[static_cast<std::size_t>(b)];
            part.reset(ncells, false, options.record_cell_moments);
            const std::int64_t begin = particles * b / blocks;
            const std::int64_t end = particles * (b + 1) / blocks;
            for (std::int64_t i = begin; i < end; ++i) {
                const auto k = static_cast<std::size_t>(i);
                CounterRng rng(seed, static_cast<std::uint64_t>(i));
                rng.seek(kDrawsPerStep * static_cast<std::uint64_t>(n + 1));
                const CellIndex cell = ens.cells[k];
                const JumpOutcome jo = jump(ens.positions[k], cell, *table, rng);
                const Point& dr = drift[static_cast<std::size_t>(cell)];
                const Point xi{jo.displacement[0] - dr[0], jo.displacement[1] - dr[1]};
                const double xin = norm(xi);
                part.max_increment = std::max(part.max_increment, xin);
                part.sq_sum += xin * xin;
                Point& m = res.martingale[k];
                m[0] += xi[0];
                m[1] += xi[1];
                res.martingale_sup[k] = std::max(res.martingale_sup[k], norm(m));
                if (options.record_cell_moments) {
                    const auto c = static_cast<std::size_t>(cell);
                    ++part.cell_count[c];
                    for (int a = 0; a < 2; ++a) {
                        part.xi_sum[c][a] += xi[a];
                        part.xi_sq[c][a] += xi[a] * xi[a];
                        part.disp_sum[c][a] += jo.displacement[a];
                        part.drift_sum[c][a] += dr[a];
                    }
                }
                ens.positions[k] = jo.position;
                ens.cells[k] = jo.cell;
            }
        }
        for (const BlockPartial& part : partials) {
            res.max_increment = std::max(res.max_increment, part.max_increment);
            res.increment_sq_sum += part.sq_sum;
            if (options.record_cell_moments) {
                for (std::size_t c = 0; c < ncells; ++c) {
                    res.cell_count[c] += part.cell_count[c];
                    for (int a = 0; a < 2; ++a) {
                        res.cell_xi_sum[c][a] += part.xi_sum[c][a];
                        res.cell_xi_sq_sum[c][a] += part.xi_sq[c][a];
                        res.cell_displacement_sum[c][a] += part.disp_sum[c][a];
                        res.cell_drift_sum[c][a] += part.drift_sum[c][a];
                    }
                }
            }
        }
        res.increment_count += particles;
        ens.step = n + 1;
        if (options.record_histograms) record_histogram();
        if (options.hook) options.hook(ens);
    }
    return res;
}

namespace {

double binomial_two_sided(std::int64_t k, std::int64_t trials, double p) {
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == trials ? 1.0 : 0.0;
    const boost::math::binomial_distribution<double> dist(static_cast<double>(trials), p);
    const double lower = boost::math::cdf(dist, static_cast<double>(k));
    const double upper =
        k == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1)));
    return std::min(1.0, 2.0 * std::min(lower, upper));
}

}  // namespace

LawCheckReport empirical_law_check(const SimulationResult& sim,
                                   const std::vector<CellField>& trajectory,
                                   const LawCheckOptions& options) {
    if (sim.histograms.size() != trajectory.size()) {
        throw std::invalid_argument("ensemble and scheme trajectories have different lengths");
    }
    LawCheckReport report;
    const auto M = static_cast<double>(sim.particles);
    for (std::size_t n = 0; n < trajectory.size(); ++n) {
        const CellField& f = trajectory[n];
        if (!(f.mesh == sim.mesh)) throw std::invalid_argument("law check on mismatched meshes");
        const double mass = f.mass();
        const auto& hist = sim.histograms[n];
        const std::size_t cells = hist.size();
        LawStep st;
        st.step = f.step;
        std::vector<double> p(cells);
        for (std::size_t c = 0; c < cells; ++c) {
            p[c] = std::max(0.0, f.values[c] * f.mesh.cell_volume() / mass);
            const double phat = static_cast<double>(hist[c]) / M;
            st.tv += 0.5 * std::abs(phat - p[c]);
            st.sigma_band += 0.5 * 3.0 * std::sqrt(p[c] * (1.0 - p[c]) / M);
        }
        st.tolerance = options.tolerance_factor * std::sqrt(static_cast<double>(cells) / M);
        CounterRng pick(options.seed, static_cast<std::uint64_t>(n));
        const int checks = static_cast<int>(std::min<std::size_t>(
            static_cast<std::size_t>(std::max(0, options.binomial_cells)), cells));
        for (int k = 0; k < checks; ++k) {
            const auto c = static_cast<std::size_t>(pick.uniform() * static_cast<double>(cells));
            const double pv = binomial_two_sided(hist[c], sim.particles, p[c]);
            st.min_binomial_p = std::min(st.min_binomial_p, pv);
        }
        st.within_band = st.tv <= st.sigma_band;
        st.within_tolerance = st.tv <= st.tolerance;
        st.binomial_ok = st.min_binomial_p >= options.binomial_alpha;
        report.max_tv = std::max(report.max_tv, st.tv);
        report.pass_band = report.pass_band && st.within_band;
        report.pass_tolerance = report.pass_tolerance && st.within_tolerance;
        report.pass_binomial = report.pass_binomial && st.binomial_ok;
        report.steps.push_back(st);
    }
    return report;
}

CenteringReport centering_check(const SimulationResult& sim, double z, std::int64_t min_count) {
    CenteringReport rep;
    for (std::size_t c = 0; c < sim.cell_count.size(); ++c) {
        const std::int64_t n = sim.cell_count[c];
        if (n < min_count) continue;
        const auto dn = static_cast<double>(n);
        for (int a = 0; a < sim.mesh.dim(); ++a) {
            const double mean = sim.cell_xi_sum[c][a] / dn;
            const double var = std::max(0.0, sim.cell_xi_sq_sum[c][a] / dn - mean * mean);
            const double se = std::sqrt(var / dn);
            double score = 0.0;
            if (se > 0.0) {
                score = std::abs(mean) / se;
            } else if (std::abs(mean) > 1e-15) {
                score = std::numeric_limits<double>::infinity();
            }
            ++rep.checked;
            if (score > rep.worst_z) {
                rep.worst_z = score;
                rep.worst_cell = static_cast<CellIndex>(c);
            }
        }
    }
    rep.pass = rep.worst_z <= z;
    return rep;
}

ScalingSample scaling_sample(const SimulationResult& sim, double h) {
    ScalingSample s;
    s.h = h;
    s.mean_sup = sim.mean_martingale_sup();
    s.max_increment = sim.max_increment;
    s.diameter = sim.mesh.diameter();
    const double steps = static_cast<double>(std::max<long>(sim.steps, 1));
    const double per_step_flux = sim.sup_flux_time / steps;
    const double denom = per_step_flux * s.diameter;
    s.moment_constant = denom > 0.0 ? sim.mean_increment_sq() / denom : 0.0;
    return s;
}

ScalingReport martingale_scaling(const std::vector<ScalingSample>& samples) {
    if (samples.size() < 3) throw std::invalid_argument("martingale scaling needs >= 3 sweep points");
    ScalingReport rep;
    rep.samples = samples;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& s : samples) {
        if (s.mean_sup > 0.0 && s.h > 0.0) {
            xs.push_back(std::log(s.h));
            ys.push_back(std::log(s.mean_sup));
        }
    }
    if (xs.size() < 2) {
        rep.degenerate = true;
        rep.slope = std::numeric_limits<double>::quiet_NaN();
        rep.intercept = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxy += (xs[k] - mx) * (ys[k] - my);
        sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    rep.slope = sxy / sxx;
    rep.intercept = my - rep.slope * mx;
    return rep;
}

std::vector<ScalingSample> martingale_sweep(const ScalingSweepConfig& config) {
    std::vector<ScalingSample> out;
    for (int k : config.exponents) {
        const CellIndex n = CellIndex{1} << k;
        const double h = 1.0 / static_cast<double>(n);
        const CartesianMesh mesh = unit_torus(2, n);
        const double dt = config.dt_ratio * h;
        const long steps = steps_for(config.T, dt);
        SimulationOptions opts;
        opts.record_histograms = false;
        opts.record_cell_moments = false;
        const SimulationResult sim = simulate(constant_field(mesh, 1.0), config.field, dt, steps,
                                              config.particles, config.seed, opts);
        out.push_back(scaling_sample(sim, h));
    }
    return out;
}

ParticleDumpWriter::ParticleDumpWriter(const std::string& path, int dim, std::int64_t count)
    : path_(path), dim_(dim), count_(count) {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path_ + "' for writing");
    const char magic[8] = {'U', 'P', 'W', 'P', 'T', 'S', '0', '1'};
    const std::int32_t d = dim_;
    out.write(magic, sizeof magic);
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
    out.write(reinterpret_cast<const char*>(&count_), sizeof count_);
}

void ParticleDumpWriter::write(const ParticleEnsemble& ensemble) {
    if (static_cast<std::int64_t>(ensemble.positions.size()) != count_) {
        throw std::invalid_argument("particle dump: ensemble size changed");
    }
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to '" + path_ + "'");
    const std::int64_t n = ensemble.step;
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const Point& p : ensemble.positions) {
        out.write(reinterpret_cast<const char*>(p.data()),
                  static_cast<std::streamsize>(static_cast<std::size_t>(dim_) * sizeof(double)));
    }
}

}  // namespace upwind
