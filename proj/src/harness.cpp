#include "upwind/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/binomial.hpp>

namespace upwind {

Metric parse_metric(const std::string& name) {
    if (name == "l1") return Metric::L1;
    if (name == "l2") return Metric::L2;
    if (name == "hm1") return Metric::Hm1;
    if (name == "w1") return Metric::W1;
    if (name == "kr") return Metric::KR;
    throw std::invalid_argument("unknown metric '" + name + "' (expected l1, l2, hm1, w1, kr)");
}

std::vector<Metric> parse_metric_list(const std::string& list) {
    std::vector<Metric> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        const Metric m = parse_metric(item);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) throw std::invalid_argument("empty metric list");
    return out;
}

std::string metric_column(Metric m) {
    switch (m) {
        case Metric::L1: return "L1";
        case Metric::L2: return "L2";
        case Metric::Hm1: return "H-1";
        case Metric::W1: return "W1";
        case Metric::KR: return "KR";
    }
    return "?";
}

double checkerboard(const Point& x) {
    const bool left = x[0] < 0.5;
    const bool low = x[1] < 0.5;
    return left == low ? 1.0 : -1.0;
}

std::vector<double> power_law_cell_averages(const CartesianMesh& mesh, double s, double shift) {
    if (!(s >= 0.0 && s < 1.0)) {
        throw std::invalid_argument("power-law exponent s must lie in [0, 1)");
    }
    if (mesh.dim() != 1) throw std::invalid_argument("power-law datum needs a 1-D mesh");
    const double e = 1.0 - s;
    const double w = mesh.width(0);
    std::vector<double> out(static_cast<std::size_t>(mesh.cell_count()));
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const double lo = std::clamp(mesh.lower_corner(c)[0] - shift, 0.0, 1.0);
        const double hi = std::clamp(mesh.lower_corner(c)[0] + w - shift, 0.0, 1.0);
        out[static_cast<std::size_t>(c)] =
            hi > lo ? (std::pow(hi, e) - std::pow(lo, e)) / (e * w) : 0.0;
    }
    return out;
}

std::vector<double> half_courant_closed_form(const std::vector<double>& rho0, long n,
                                             double cutoff) {
    if (n < 0) throw std::invalid_argument("negative step count");
    if (n == 0) return rho0;
    const boost::math::binomial_distribution<double> law(static_cast<double>(n), 0.5);
    const long mode = n / 2;
    const double peak = boost::math::pdf(law, static_cast<double>(mode));
    long lo = mode;
    long hi = mode;
    while (lo > 0 && boost::math::pdf(law, static_cast<double>(lo - 1)) >= cutoff * peak) --lo;
    while (hi < n && boost::math::pdf(law, static_cast<double>(hi + 1)) >= cutoff * peak) ++hi;
    std::vector<double> weight(static_cast<std::size_t>(hi - lo + 1));
    for (long m = lo; m <= hi; ++m) {
        weight[static_cast<std::size_t>(m - lo)] = boost::math::pdf(law, static_cast<double>(m));
    }
    const auto size = static_cast<long>(rho0.size());
    std::vector<double> out(rho0.size(), 0.0);
    for (long k = 0; k < size; ++k) {
        double s = 0.0;
        const long m_end = std::min(hi, k);
        for (long m = lo; m <= m_end; ++m) {
            s += weight[static_cast<std::size_t>(m - lo)] * rho0[static_cast<std::size_t>(k - m)];
        }
        out[static_cast<std::size_t>(k)] = s;
    }
    return out;
}

double KrRule::at(double h) const { return fixed ? *fixed : std::sqrt(h); }

namespace {

double width_of(int exponent) { return std::ldexp(1.0, -exponent); }

void check_multiple(double t, double dt, const char* what) {
    const double q = t / dt;
    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q)) {
        std::ostringstream msg;
        msg << what << " " << t << " is not a multiple of dt = " << dt;
        throw std::invalid_argument(msg.str());
    }
}

void check_sweep(const std::vector<int>& exponents) {
    const std::set<int> distinct(exponents.begin(), exponents.end());
    if (distinct.size() != exponents.size()) throw std::invalid_argument("repeated mesh size in sweep");
    if (exponents.size() < 3) throw std::invalid_argument("a sweep needs at least 3 mesh sizes");
    for (int k : exponents) {
        if (k < 0 || k > 30) throw std::invalid_argument("mesh exponent out of range");
    }
}

void fill_reference_rate(std::vector<ErrorRecord>& records) {
    const ErrorRecord* coarsest = nullptr;
    for (const auto& r : records) {
        if (r.errors.count(Metric::L1) && (!coarsest || r.h > coarsest->h)) coarsest = &r;
    }
    if (!coarsest) return;
    const double c = coarsest->errors.at(Metric::L1) / std::sqrt(coarsest->h);
    for (auto& r : records) r.rate = c * std::sqrt(r.h);
}

void finish(StudyResult& result, const std::vector<Metric>& metrics) {
    std::sort(result.records.begin(), result.records.end(),
              [](const ErrorRecord& a, const ErrorRecord& b) { return a.h > b.h; });
    fill_reference_rate(result.records);
    for (Metric m : metrics) {
        std::vector<ErrorRecord> usable;
        for (const auto& r : result.records) {
            if (r.errors.count(m)) usable.push_back(r);
        }
        if (usable.size() < 3) {
            result.warnings.push_back(metric_column(m) + ": fewer than 3 sweep points, no rate fitted");
            RateFit fit;
            fit.metric = m;
            fit.degenerate = true;
            fit.slope = std::numeric_limits<double>::quiet_NaN();
            result.fits.push_back(fit);
            continue;
        }
        result.fits.push_back(fit_rate(usable, m, &result.warnings));
        if (count_inversions(usable, m) > 1) {
            result.warnings.push_back(metric_column(m) +
                                      ": error is not monotone in h (more than one inversion)");
        }
    }
}

}  // namespace

void validate(const StudyConfig& config) {
    check_sweep(config.exponents);
    if (!(config.dt_ratio > 0.0)) throw std::invalid_argument("dt ratio must be positive");
    if (!(config.T > 0.0)) throw std::invalid_argument("final time must be positive");
    if (config.flip && !(*config.flip > 0.0 && *config.flip < config.T)) {
        throw std::invalid_argument("flip time must lie in (0, T)");
    }
    if (config.metrics.empty()) throw std::invalid_argument("no metrics requested");
    for (int k : config.exponents) {
        const double dt = config.dt_ratio * width_of(k);
        check_multiple(config.T, dt, "final time");
        if (config.flip) check_multiple(*config.flip, dt, "flip time");
    }
}

const RateFit& StudyResult::fit(Metric m) const {
    for (const auto& f : fits) {
        if (f.metric == m) return f;
    }
    throw std::out_of_range("no fitted rate for metric " + metric_column(m));
}

RateFit fit_rate(const std::vector<ErrorRecord>& records, Metric metric,
                 std::vector<std::string>* warnings) {
    if (records.size() < 3) throw std::invalid_argument("rate fit needs at least 3 records");
    std::set<double> hs;
    for (const auto& r : records) {
        if (!(r.h > 0.0)) throw std::invalid_argument("mesh size must be positive");
        if (!hs.insert(r.h).second) throw std::invalid_argument("rate fit needs distinct mesh sizes");
    }
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : records) {
        const auto it = r.errors.find(metric);
        if (it == r.errors.end()) {
            throw std::invalid_argument("record without a " + metric_column(metric) + " value");
        }
        if (!(it->second >= 0.0) || !std::isfinite(it->second)) {
            throw std::invalid_argument("errors must be finite and >= 0");
        }
        if (it->second == 0.0) {
            if (warnings) {
                std::ostringstream msg;
                msg << metric_column(metric) << ": zero error at h = " << r.h << " excluded from the fit";
                warnings->push_back(msg.str());
            }
            continue;
        }
        x.push_back(std::log(r.h));
        y.push_back(std::log(it->second));
    }
    RateFit fit;
    fit.metric = metric;
    fit.points = static_cast<int>(x.size());
    if (x.size() < 2) {
        fit.degenerate = true;
        fit.slope = std::numeric_limits<double>::quiet_NaN();
        fit.intercept = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        fit.max_residual = std::max(fit.max_residual, std::abs(y[i] - fit.intercept - fit.slope * x[i]));
    }
    return fit;
}

int count_inversions(const std::vector<ErrorRecord>& records, Metric metric) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : records) {
        const auto it = r.errors.find(metric);
        if (it != r.errors.end()) pts.emplace_back(r.h, it->second);
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    int inversions = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].second > pts[i - 1].second) ++inversions;
    }
    return inversions;
}

double field_error(const CellField& approx, const CellField& exact, Metric metric, double r,
                   const KrOptions& kr_options) {
    switch (metric) {
        case Metric::L1: return l_norm_error(approx, exact, 1.0);
        case Metric::L2: return l_norm_error(approx, exact, 2.0);
        case Metric::Hm1: return hminus1_error(approx, exact);
        case Metric::KR: return kr_distance_fields(approx, exact, r, kr_options).value;
        case Metric::W1: break;
    }
    if (approx.mesh.dim() == 1) return w1_fields_1d(approx.mesh, approx.values, exact.values);
    if (!(approx.mesh == exact.mesh)) throw std::invalid_argument("fields live on different meshes");
    const CartesianMesh& mesh = approx.mesh;
    DiscreteMeasure plus{mesh.dim(), {}, {}};
    DiscreteMeasure minus{mesh.dim(), {}, {}};
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const auto k = static_cast<std::size_t>(c);
        const double m = (approx.values[k] - exact.values[k]) * mesh.cell_volume();
        if (m > 0.0) plus.add(mesh.centroid(c), m);
        else if (m < 0.0) minus.add(mesh.centroid(c), -m);
    }
    if (plus.size() > kr_options.size_cap || minus.size() > kr_options.size_cap) {
        throw std::length_error("W1 support exceeds the size cap");
    }
    TransportOptions topts = kr_options.transport;
    topts.mass_policy = MassPolicy::Rescale;
    return w1_general(plus, minus, topts);
}

StudyResult convergence_study(const StudyConfig& config) {
    validate(config);
    const VelocityField field = field_by_name(config.field, 2);
    StudyResult result;
    for (int k : config.exponents) {
        const double h = width_of(k);
        const auto start = std::chrono::steady_clock::now();
        try {
            const CartesianMesh mesh = unit_torus(2, CellIndex{1} << k);
            const CellField rho0 = discretize_initial(checkerboard, mesh);
            const double dt = config.dt_ratio * h;
            RunOptions opts;
            opts.quadrature = config.quadrature;
            opts.courant_limit = config.courant_limit;
            CellField final_field = rho0;
            if (config.flip) {
                const RunResult forward = run(rho0, field, dt, *config.flip, opts);
                opts.t0 = *config.flip;
                opts.first_step = forward.steps;
                final_field = run(forward.final_field, negated(field), dt, config.T - *config.flip, opts)
                                  .final_field;
            } else {
                final_field = run(rho0, field, dt, config.T, opts).final_field;
            }
            if (!config.snapshot_dir.empty()) {
                const std::string stem = config.snapshot_dir + "/";
                write_snapshot_binary(rho0, stem + "initial_k" + std::to_string(k) + ".bin");
                write_snapshot_binary(final_field, stem + "final_k" + std::to_string(k) + ".bin");
            }
            ErrorRecord record;
            record.h = h;
            for (Metric m : config.metrics) {
                try {
                    record.errors[m] = field_error(final_field, rho0, m, config.kr.at(h), config.kr_options);
                } catch (const std::length_error& e) {
                    std::ostringstream msg;
                    msg << metric_column(m) << " skipped at h = " << h << ": " << e.what();
                    result.warnings.push_back(msg.str());
                }
            }
            record.wall_time =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            result.records.push_back(std::move(record));
        } catch (const CflViolation& e) {
            result.failures.push_back({h, e.what()});
        }
    }
    finish(result, config.metrics);
    return result;
}

OptimalityResult optimality_example(const OptimalityConfig& config) {
    check_sweep(config.exponents);
    if (!(config.s >= 0.0 && config.s < 1.0)) {
        throw std::invalid_argument("power-law exponent s must lie in [0, 1)");
    }
    if (!(config.U > 0.0) || !(config.T > 0.0)) {
        throw std::invalid_argument("optimality example needs U > 0 and T > 0");
    }
    OptimalityResult out;
    const double R = 2.0 + config.T * config.U;
    out.domain_length = R;
    const VelocityField field = builtin_constant({config.U, 0.0}, 1);
    for (int k : config.exponents) {
        const double h = width_of(k);
        const auto start = std::chrono::steady_clock::now();
        const double cells_real = R / h;
        const auto cells = static_cast<CellIndex>(std::llround(cells_real));
        if (std::abs(cells_real - static_cast<double>(cells)) > 1e-9 * cells_real) {
            throw std::invalid_argument("domain length is not a multiple of h");
        }
        const CartesianMesh mesh = build_mesh(1, {R, 0.0}, {cells, 1}, Boundary::NoFlux);
        const CellField rho0(mesh, power_law_cell_averages(mesh, config.s));
        const double dt = 0.5 * h / config.U;
        const RunResult res = run(rho0, field, dt, config.T);
        const std::vector<double> closed = half_courant_closed_form(rho0.values, res.steps);
        double scale = 1.0;
        double dev = 0.0;
        for (std::size_t i = 0; i < closed.size(); ++i) {
            scale = std::max(scale, std::abs(closed[i]));
            dev = std::max(dev, std::abs(closed[i] - res.final_field.values[i]));
        }
        out.closed_form_deviation = std::max(out.closed_form_deviation, dev / scale);
        const CellField exact(mesh, power_law_cell_averages(mesh, config.s, config.T * config.U));
        ErrorRecord record;
        record.h = h;
        record.errors[Metric::L1] = l_norm_error(res.final_field, exact, 1.0);
        record.errors[Metric::W1] = w1_fields_1d(mesh, res.final_field.values, exact.values);
        record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.study.records.push_back(std::move(record));
    }
    finish(out.study, {Metric::L1, Metric::W1});
    return out;
}

namespace {

const std::vector<Metric> kCoreColumns{Metric::L1, Metric::Hm1};
const std::vector<Metric> kExtraColumns{Metric::L2, Metric::W1, Metric::KR};

std::string number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string format_csv(const std::vector<ErrorRecord>& records) {
    if (records.empty()) throw std::invalid_argument("no records to export");
    std::vector<Metric> extras;
    for (Metric m : kExtraColumns) {
        for (const auto& r : records) {
            if (r.errors.count(m)) {
                extras.push_back(m);
                break;
            }
        }
    }
    std::string out = "meshsize,L1,H-1,Rate";
    for (Metric m : extras) out += "," + metric_column(m);
    out += ",wall_time\n";
    auto cell = [&out](const ErrorRecord& r, Metric m) {
        out += ',';
        const auto it = r.errors.find(m);
        if (it != r.errors.end()) out += number(it->second);
    };
    for (const auto& r : records) {
        out += number(r.h);
        for (Metric m : kCoreColumns) cell(r, m);
        out += ',';
        if (r.rate) out += number(*r.rate);
        for (Metric m : extras) cell(r, m);
        out += ',' + number(r.wall_time) + '\n';
    }
    return out;
}

void export_csv(const std::vector<ErrorRecord>& records, const std::string& path) {
    const std::string text = format_csv(records);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write to " + path + " failed");
}

std::vector<ErrorRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty CSV");
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    if (header.size() < 4 || header[0] != "meshsize" || header[1] != "L1" || header[2] != "H-1" ||
        header[3] != "Rate") {
        throw std::invalid_argument("CSV header must start with meshsize,L1,H-1,Rate");
    }
    const std::map<std::string, Metric> by_name{{"L1", Metric::L1}, {"L2", Metric::L2},
                                                {"H-1", Metric::Hm1}, {"W1", Metric::W1},
                                                {"KR", Metric::KR}};
    std::vector<ErrorRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string::size_type pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            cells.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cells.size() != header.size()) throw std::invalid_argument("CSV row width differs from header");
        ErrorRecord r;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].empty()) continue;
            std::size_t used = 0;
            const double v = std::stod(cells[c], &used);
            if (used != cells[c].size()) throw std::invalid_argument("bad CSV number '" + cells[c] + "'");
            const std::string& name = header[c];
            if (name == "meshsize") r.h = v;
            else if (name == "Rate") r.rate = v;
            else if (name == "wall_time") r.wall_time = v;
            else if (auto it = by_name.find(name); it != by_name.end()) r.errors[it->second] = v;
            else throw std::invalid_argument("unknown CSV column '" + name + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ErrorRecord> read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_csv(buf.str());
}

}  // namespace upwind
