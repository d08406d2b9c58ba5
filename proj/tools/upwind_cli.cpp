#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "upwind/harness.hpp"
#include "upwind/metrics.hpp"
#include "upwind/scheme.hpp"
#include "upwind/stochastic.hpp"

using namespace upwind;
using nlohmann::json;

namespace {

/// Thrown for contract violations under --strict.
struct StrictFailure : std::runtime_error {
    json detail;
    StrictFailure(const std::string& kind, json d) : std::runtime_error(kind), detail(std::move(d)) {}
};

void error_line(const std::string& kind, const json& detail) {
    json line = detail;
    line["error"] = kind;
    std::cerr << line.dump() << '\n';
}

/// Accepts "9", "2^-9" or an exact power of two like "0.001953125"; returns k with h = 2^-k.
int parse_exponent(const std::string& text) {
    std::string s = text;
    if (s.rfind("2^", 0) == 0) s = s.substr(2);
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad mesh size '" + text + "'");
    if (text.rfind("2^", 0) == 0) {
        if (v != std::floor(v) || v > 0) throw std::invalid_argument("bad mesh size '" + text + "'");
        return static_cast<int>(-v);
    }
    if (v >= 1.0 && v == std::floor(v)) return static_cast<int>(v);
    if (v > 0.0 && v < 1.0) {
        const double k = -std::log2(v);
        if (k == std::round(k)) return static_cast<int>(k);
    }
    throw std::invalid_argument("mesh size '" + text + "' is not a power of two");
}

std::vector<int> sweep(const std::string& hmax, const std::string& hmin) {
    const int lo = parse_exponent(hmax);
    const int hi = parse_exponent(hmin);
    if (lo > hi) throw std::invalid_argument("--hmax must not be smaller than --hmin");
    std::vector<int> out;
    for (int k = lo; k <= hi; ++k) out.push_back(k);
    return out;
}

KrRule parse_r(const std::string& text) {
    if (text == "sqrt-h") return {};
    const double r = std::stod(text);
    if (!(r > 0.0)) throw std::invalid_argument("--r must be positive");
    return {r};
}

void print_study(const StudyResult& res, const std::vector<Metric>& metrics) {
    std::printf("%-14s", "h");
    for (Metric m : metrics) std::printf(" %-14s", metric_column(m).c_str());
    std::printf(" %s\n", "seconds");
    for (const auto& r : res.records) {
        std::printf("%-14.8g", r.h);
        for (Metric m : metrics) {
            const auto it = r.errors.find(m);
            if (it == r.errors.end()) std::printf(" %-14s", "-");
            else std::printf(" %-14.6e", it->second);
        }
        std::printf(" %.2f\n", r.wall_time);
    }
    for (const auto& f : res.fits) {
        if (f.degenerate) std::printf("rate %-4s undefined\n", metric_column(f.metric).c_str());
        else std::printf("rate %-4s %.4f (max residual %.3g, %d points)\n", metric_column(f.metric).c_str(),
                         f.slope, f.max_residual, f.points);
    }
    for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_convergence(const std::string& field, const std::vector<int>& exponents, double dt_ratio,
                    const std::string& metrics, const std::string& r, const std::string& out,
                    const std::string& dump_dir, bool strict) {
    StudyConfig cfg;
    cfg.field = field;
    cfg.exponents = exponents;
    cfg.dt_ratio = dt_ratio;
    cfg.metrics = parse_metric_list(metrics);
    cfg.kr = parse_r(r);
    cfg.snapshot_dir = dump_dir;
    const auto res = convergence_study(cfg);
    print_study(res, cfg.metrics);
    for (const auto& f : res.failures) {
        error_line("cfl_violation", {{"h", f.h}, {"message", f.message}});
    }
    if (!res.records.empty() && !out.empty()) export_csv(res.records, out);
    if (strict) {
        if (!res.failures.empty()) throw StrictFailure("cfl_violation", {{"points", res.failures.size()}});
        if (field == "constant" || field == "sobolev") {
            const double upper = field == "constant" ? 0.60 : 1.0;
            const auto& l1 = res.fit(Metric::L1);
            if (l1.degenerate || l1.slope < 0.40 || l1.slope > upper) {
                throw StrictFailure("contract_violation",
                                    {{"metric", "L1"}, {"rate", l1.slope}, {"window", {0.40, upper}}});
            }
            for (const auto& f : res.fits) {
                if (f.metric == Metric::Hm1 && !(f.slope >= l1.slope)) {
                    throw StrictFailure("contract_violation",
                                        {{"metric", "H-1"}, {"rate", f.slope}, {"minimum", l1.slope}});
                }
            }
        }
    }
    return 0;
}

int cmd_optimality(double s, const std::vector<int>& exponents, double T, double U, const std::string& out,
                   bool strict) {
    OptimalityConfig cfg;
    cfg.s = s;
    cfg.exponents = exponents;
    cfg.T = T;
    cfg.U = U;
    const auto res = optimality_example(cfg);
    print_study(res.study, {Metric::L1, Metric::W1});
    std::printf("closed-form deviation %.3g, domain [0, %g]\n", res.closed_form_deviation, res.domain_length);
    std::printf("expected rates: L1 %.4f, W1 %.4f\n", (1 - s) / 2, (2 - s) / 2);
    if (!out.empty()) export_csv(res.study.records, out);
    if (strict) {
        const double l1 = res.study.fit(Metric::L1).slope;
        const double w1 = res.study.fit(Metric::W1).slope;
        if (!(std::abs(l1 - (1 - s) / 2) <= 0.15)) {
            throw StrictFailure("contract_violation", {{"metric", "L1"}, {"rate", l1}, {"expected", (1 - s) / 2}});
        }
        if (!(std::abs(w1 - (2 - s) / 2) <= 0.15)) {
            throw StrictFailure("contract_violation", {{"metric", "W1"}, {"rate", w1}, {"expected", (2 - s) / 2}});
        }
        if (!(res.closed_form_deviation <= 1e-12)) {
            throw StrictFailure("contract_violation", {{"check", "closed_form"}, {"deviation", res.closed_form_deviation}});
        }
    }
    return 0;
}

int cmd_mcmc(const std::string& field_name, int cells_exp, long steps, std::int64_t particles,
             std::uint64_t seed, double dt_ratio, const std::vector<int>& sweep_exponents, bool strict) {
    const auto field = field_by_name(field_name);
    const auto mesh = unit_torus(2, CellIndex{1} << cells_exp);
    const double dt = dt_ratio * mesh.width(0);
    std::vector<double> v(std::size_t(mesh.cell_count()));
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const Point x = mesh.centroid(c);
        v[std::size_t(c)] = 1.0 + 0.5 * std::sin(2 * M_PI * x[0]) * std::cos(2 * M_PI * x[1]);
    }
    const CellField rho0(mesh, v);
    RunOptions opts;
    opts.keep_trajectory = true;
    const auto traj = run(rho0, field, dt, double(steps) * dt, opts).trajectory;
    const auto sim = simulate(rho0, field, dt, steps, particles, seed);
    const auto law = empirical_law_check(sim, traj);
    const auto centering = centering_check(sim);
    double worst_band = 0.0;
    for (const auto& s : law.steps) worst_band = std::max(worst_band, s.tv / s.sigma_band);
    const bool bound_ok = sim.max_increment <= 4 * mesh.diameter();
    std::printf("max |xi| / h          %.4f (bound 4)\n", sim.max_increment / mesh.diameter());
    std::printf("max TV                %.4e\n", law.max_tv);
    std::printf("max TV / 3-sigma band %.4f\n", worst_band);
    std::printf("law check             %s (band %d, tolerance %d, binomial %d)\n", law.pass() ? "pass" : "fail",
                law.pass_band, law.pass_tolerance, law.pass_binomial);
    std::printf("centering             %s (worst z %.2f over %d cells)\n", centering.pass ? "pass" : "fail",
                centering.worst_z, centering.checked);
    std::printf("E|xi|^2 / (dt u h)    %.4f\n",
                sim.mean_increment_sq() / (dt * field.sup_bound * mesh.diameter()));
    ScalingReport scaling;
    if (!sweep_exponents.empty()) {
        ScalingSweepConfig cfg;
        cfg.field = field;
        cfg.exponents = sweep_exponents;
        cfg.particles = particles;
        cfg.seed = seed;
        cfg.dt_ratio = dt_ratio;
        scaling = martingale_scaling(martingale_sweep(cfg));
        for (const auto& s : scaling.samples) {
            std::printf("h %-12.6g E sup|M| %.5e  C %.3f\n", s.h, s.mean_sup, s.moment_constant);
        }
        if (scaling.degenerate) std::printf("martingale slope undefined (field does not move particles)\n");
        else std::printf("martingale slope %.4f\n", scaling.slope);
    }
    if (strict) {
        if (!bound_ok) throw StrictFailure("contract_violation", {{"check", "increment_bound"}});
        if (!law.pass_band) throw StrictFailure("contract_violation", {{"check", "law_band"}, {"ratio", worst_band}});
        if (!sweep_exponents.empty() && (scaling.degenerate || scaling.slope < 0.4 || scaling.slope > 0.6)) {
            throw StrictFailure("contract_violation", {{"check", "martingale_slope"}, {"slope", scaling.slope}});
        }
    }
    return 0;
}

int cmd_kr(const std::string& a_path, const std::string& b_path, const std::string& r_text,
           const std::string& metrics, std::size_t cap) {
    const CellField a = read_snapshot(a_path);
    const CellField b = read_snapshot(b_path);
    const double r = parse_r(r_text).at(a.mesh.min_width());
    KrOptions opts;
    opts.size_cap = cap;
    json out;
    for (Metric m : parse_metric_list(metrics)) {
        if (m == Metric::KR) {
            const auto res = kr_distance_fields(a, b, r, opts);
            out["KR"] = {{"value", res.value}, {"r", r}, {"gap", res.gap}, {"certified", res.certified},
                         {"sources", res.sources.size()}, {"sinks", res.sinks.size()}};
        } else {
            out[metric_column(m)] = field_error(a, b, m, r, opts);
        }
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Upwind finite-volume transport solver and convergence harness"};
    app.require_subcommand(1);
    int threads = 0;
    bool strict = false;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");
    app.add_flag("--strict", strict, "Exit nonzero on CFL refusal or rate contract violation");

    std::string field = "constant";
    std::string hmin = "9";
    std::string hmax = "5";
    double dt_ratio = 0.25;
    std::string metrics = "l1,hm1";
    std::string r = "sqrt-h";
    std::string out;
    bool full = false;
    std::string dump_dir;
    auto* conv = app.add_subcommand("convergence", "Checkerboard time-reversal convergence study");
    conv->add_option("--field", field, "constant | sobolev | zero")->check(CLI::IsMember({"constant", "sobolev", "zero"}));
    conv->add_option("--hmin", hmin, "Finest mesh size: k, 2^-k or the value");
    conv->add_option("--hmax", hmax, "Coarsest mesh size: k, 2^-k or the value");
    conv->add_option("--dt-ratio", dt_ratio, "dt / h");
    conv->add_option("--metrics", metrics, "Comma list of l1,l2,hm1,w1,kr");
    conv->add_option("--r", r, "KR parameter: sqrt-h or a number");
    conv->add_option("--out", out, "CSV output path");
    conv->add_flag("--full", full, "Full sweep h = 2^-5..2^-11");
    conv->add_option("--dump-dir", dump_dir, "Write initial and final field snapshots here");

    double s = 0.9;
    double T = 1.0;
    double U = 1.0;
    std::string opt_hmin = "14";
    std::string opt_hmax = "8";
    auto* opt = app.add_subcommand("optimality", "Transport of the rough datum x^-s in 1-D");
    opt->add_option("--s", s, "Exponent s in [0, 1)");
    opt->add_option("--hmin", opt_hmin, "Finest mesh size");
    opt->add_option("--hmax", opt_hmax, "Coarsest mesh size");
    opt->add_option("--T", T, "Final time");
    opt->add_option("--U", U, "Speed");
    opt->add_option("--out", out, "CSV output path");

    int cells_exp = 3;
    long steps = 16;
    std::int64_t particles = 1000000;
    std::uint64_t seed = 1;
    std::string sweep_min;
    std::string sweep_max;
    auto* mc = app.add_subcommand("mcmc-check", "Particle chain versus scheme checks");
    mc->add_option("--field", field, "constant | sobolev | zero")->check(CLI::IsMember({"constant", "sobolev", "zero"}));
    mc->add_option("--cells", cells_exp, "Mesh 2^k x 2^k");
    mc->add_option("--steps", steps, "Number of steps");
    mc->add_option("--particles", particles, "Ensemble size");
    mc->add_option("--seed", seed, "RNG seed");
    mc->add_option("--dt-ratio", dt_ratio, "dt / h");
    mc->add_option("--hmin", sweep_min, "Martingale sweep: finest mesh size");
    mc->add_option("--hmax", sweep_max, "Martingale sweep: coarsest mesh size");

    std::string a_path;
    std::string b_path;
    std::string kr_metrics = "kr";
    std::size_t cap = 5000;
    auto* kr = app.add_subcommand("kr", "Distances between two dumped fields");
    kr->add_option("a", a_path, "First snapshot")->required();
    kr->add_option("b", b_path, "Second snapshot")->required();
    kr->add_option("--r", r, "KR parameter: sqrt-h (cell width) or a number");
    kr->add_option("--metrics", kr_metrics, "Comma list of l1,l2,hm1,w1,kr");
    kr->add_option("--cap", cap, "Support size cap for exact transport");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*conv) {
            const auto exps = full ? std::vector<int>{5, 6, 7, 8, 9, 10, 11} : sweep(hmax, hmin);
            return cmd_convergence(field, exps, dt_ratio, metrics, r, out, dump_dir, strict);
        }
        if (*opt) return cmd_optimality(s, sweep(opt_hmax, opt_hmin), T, U, out, strict);
        if (*mc) {
            std::vector<int> exps;
            if (!sweep_min.empty() || !sweep_max.empty()) {
                exps = sweep(sweep_max.empty() ? "4" : sweep_max, sweep_min.empty() ? "8" : sweep_min);
            }
            return cmd_mcmc(field, cells_exp, steps, particles, seed, dt_ratio, exps, strict);
        }
        if (*kr) return cmd_kr(a_path, b_path, r, kr_metrics, cap);
    } catch (const StrictFailure& e) {
        error_line(e.what(), e.detail);
        return 3;
    } catch (const CflViolation& e) {
        error_line("cfl_violation", {{"cell", e.cell()}, {"outflow", e.outflow()}, {"step", e.step()}});
        return 2;
    } catch (const std::exception& e) {
        error_line("invalid_input", {{"message", e.what()}});
        return 1;
    }
    return 0;
}
