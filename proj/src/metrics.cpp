#include "upwind/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <fftw3.h>

namespace upwind {
namespace {

void require_same_mesh(const CellField& a, const CellField& b) {
    if (!(a.mesh == b.mesh)) throw std::invalid_argument("fields live on different meshes");
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

double l_norm_error(const CellField& a, const CellField& b, double q) {
    require_same_mesh(a, b);
    if (!(q >= 1.0)) throw std::invalid_argument("norm exponent must be >= 1");
    if (std::isinf(q)) {
        double m = 0.0;
        for (std::size_t k = 0; k < a.values.size(); ++k) {
            m = std::max(m, std::abs(a.values[k] - b.values[k]));
        }
        return m;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        s += std::pow(std::abs(a.values[k] - b.values[k]), q);
    }
    return std::pow(s * a.mesh.cell_volume(), 1.0 / q);
}

double hminus1_norm(const CellField& diff) {
    const CartesianMesh& mesh = diff.mesh;
    if (mesh.boundary() != Boundary::Periodic) {
        throw std::invalid_argument("H^-1 norm needs a periodic mesh");
    }
    double sum = 0.0;
    double l1 = 0.0;
    for (double v : diff.values) {
        sum += v;
        l1 += std::abs(v);
    }
    if (std::abs(sum) > 1e-9 * l1) {
        std::ostringstream msg;
        msg << "H^-1 norm of a field with nonzero mean (relative " << std::abs(sum) / l1 << ")";
        throw std::invalid_argument(msg.str());
    }
    if (l1 == 0.0) return 0.0;

    const int d = mesh.dim();
    const int n0 = static_cast<int>(mesh.cells(0));
    const int n1 = d == 2 ? static_cast<int>(mesh.cells(1)) : 1;
    const std::size_t total = diff.values.size();
    auto* buffer = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        // Storage is axis-0 fastest, i.e. row-major [n1][n0].
        plan = d == 2 ? fftw_plan_dft_2d(n1, n0, buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE)
                      : fftw_plan_dft_1d(n0, buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    for (std::size_t k = 0; k < total; ++k) {
        buffer[k][0] = diff.values[k];
        buffer[k][1] = 0.0;
    }
    fftw_execute(plan);

    const double w0 = mesh.width(0);
    const double w1 = d == 2 ? mesh.width(1) : 1.0;
    const double two_pi = 2.0 * std::numbers::pi;
    double energy = 0.0;
    for (int m1 = -n1 / 2; m1 <= n1 / 2; ++m1) {
        if (d == 1 && m1 != 0) continue;
        const double k1 = d == 2 ? two_pi * m1 / mesh.extent(1) : 0.0;
        const double f1 = d == 2 ? w1 * sinc(0.5 * k1 * w1) : 1.0;
        const int i1 = ((m1 % n1) + n1) % n1;
        for (int m0 = -n0 / 2; m0 <= n0 / 2; ++m0) {
            if (m0 == 0 && m1 == 0) continue;
            const double k0 = two_pi * m0 / mesh.extent(0);
            const double f0 = w0 * sinc(0.5 * k0 * w0);
            const int i0 = ((m0 % n0) + n0) % n0;
            const auto& c = buffer[static_cast<std::size_t>(i1) * static_cast<std::size_t>(n0) +
                                   static_cast<std::size_t>(i0)];
            const double mag2 = (c[0] * c[0] + c[1] * c[1]) * (f0 * f0) * (f1 * f1);
            energy += mag2 / (k0 * k0 + k1 * k1);
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buffer);
    return std::sqrt(energy / mesh.domain_volume());
}

double hminus1_error(const CellField& a, const CellField& b) {
    require_same_mesh(a, b);
    std::vector<double> d(a.values.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = a.values[k] - b.values[k];
    return hminus1_norm(CellField(a.mesh, std::move(d)));
}

double w1_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double mass_tolerance) {
    const double tm = mu.total();
    const double tn = nu.total();
    if (std::abs(tm - tn) > mass_tolerance * std::max({tm, tn, 1e-300})) {
        throw std::invalid_argument("w1_1d: measures have different total mass");
    }
    for (double m : mu.masses) {
        if (m < 0.0) throw std::invalid_argument("w1_1d: negative mass");
    }
    for (double m : nu.masses) {
        if (m < 0.0) throw std::invalid_argument("w1_1d: negative mass");
    }
    std::vector<std::pair<double, double>> events;
    events.reserve(mu.size() + nu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) events.emplace_back(mu.points[k][0], mu.masses[k]);
    for (std::size_t k = 0; k < nu.size(); ++k) events.emplace_back(nu.points[k][0], -nu.masses[k]);
    std::sort(events.begin(), events.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double cdf_gap = 0.0;
    double w1 = 0.0;
    for (std::size_t k = 0; k + 1 < events.size(); ++k) {
        cdf_gap += events[k].second;
        w1 += std::abs(cdf_gap) * (events[k + 1].first - events[k].first);
    }
    return w1;
}

double w1_fields_1d(const CartesianMesh& mesh, const std::vector<double>& a,
                    const std::vector<double>& b) {
    if (mesh.dim() != 1) throw std::invalid_argument("w1_fields_1d needs a 1-D mesh");
    if (a.size() != b.size() || static_cast<CellIndex>(a.size()) != mesh.cell_count()) {
        throw std::invalid_argument("w1_fields_1d: field sizes do not match the mesh");
    }
    const double w = mesh.width(0);
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ma += std::abs(a[k]);
        mb += std::abs(b[k]);
    }
    double cum = 0.0;
    double w1 = 0.0;
    for (std::size_t k = 0; k + 1 < a.size(); ++k) {
        cum += (a[k] - b[k]) * w;
        w1 += std::abs(cum) * w;
    }
    cum += (a.back() - b.back()) * w;
    if (std::abs(cum) > 1e-9 * std::max(ma, mb) * w) {
        throw std::invalid_argument("w1_fields_1d: fields have different mass");
    }
    return w1;
}

double log_cost(const Point& x, const Point& y, double r) {
    return std::log1p(std::hypot(x[0] - y[0], x[1] - y[1]) / r);
}

std::pair<DiscreteMeasure, DiscreteMeasure> transshipment_reduce(const DiscreteMeasure& mu,
                                                                 const DiscreteMeasure& nu) {
    std::map<Point, double> net;
    for (std::size_t k = 0; k < mu.size(); ++k) net[mu.points[k]] += mu.masses[k];
    for (std::size_t k = 0; k < nu.size(); ++k) net[nu.points[k]] -= nu.masses[k];
    DiscreteMeasure plus{mu.dim, {}, {}};
    DiscreteMeasure minus{mu.dim, {}, {}};
    for (const auto& [p, m] : net) {
        if (m > 0.0) plus.add(p, m);
        else if (m < 0.0) minus.add(p, -m);
    }
    return {plus, minus};
}

namespace {

KrResult kr_solve(DiscreteMeasure sources, DiscreteMeasure sinks, double r,
                  const KrOptions& options) {
    if (!(r > 0.0)) throw std::invalid_argument("KR parameter r must be positive");
    if (sources.size() > options.size_cap || sinks.size() > options.size_cap) {
        std::ostringstream msg;
        msg << "KR distance support (" << sources.size() << " x " << sinks.size()
            << ") exceeds the size cap " << options.size_cap
            << "; use coupling_upper_bound for an upper estimate";
        throw std::length_error(msg.str());
    }
    KrResult res;
    if (sources.size() == 0 || sinks.size() == 0) {
        res.sources = std::move(sources);
        res.sinks = std::move(sinks);
        res.potential.assign(res.sources.size() + res.sinks.size(), 0.0);
        res.certified = true;
        return res;
    }
    TransportOptions topts = options.transport;
    topts.mass_policy = MassPolicy::Rescale;
    const auto cost = [r](const Point& x, const Point& y) { return log_cost(x, y, r); };
    const TransportSolution sol = solve_transport(sources, sinks, cost, topts);

    // c-transform of the sink potentials: psi(z) = min_j d(z, y_j) - chi_j is
    // 1-Lipschitz for the metric d on the whole support.
    const std::size_t n = sources.size();
    const std::size_t m = sinks.size();
    std::vector<Point> support;
    support.reserve(n + m);
    support.insert(support.end(), sources.points.begin(), sources.points.end());
    support.insert(support.end(), sinks.points.begin(), sinks.points.end());
    std::vector<double> psi(n + m, std::numeric_limits<double>::infinity());
    for (std::size_t z = 0; z < n + m; ++z) {
        for (std::size_t j = 0; j < m; ++j) {
            psi[z] = std::min(psi[z], log_cost(support[z], sinks.points[j], r) - sol.sink_potential[j]);
        }
    }
    double dual = 0.0;
    for (std::size_t i = 0; i < n; ++i) dual += sol.source_masses[i] * psi[i];
    for (std::size_t j = 0; j < m; ++j) dual -= sol.sink_masses[j] * psi[n + j];
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n + m; ++a) {
        for (std::size_t b = 0; b < n + m; ++b) {
            if (a == b) continue;
            excess = std::max(excess, psi[a] - psi[b] - log_cost(support[a], support[b], r));
        }
    }
    res.value = sol.primal;
    res.plan = sol.plan;
    res.sources = std::move(sources);
    res.sinks = std::move(sinks);
    res.potential = std::move(psi);
    res.dual = dual;
    res.gap = sol.primal - dual;
    res.lipschitz_excess = n + m > 1 ? excess : 0.0;
    res.certified = std::abs(res.gap) <= options.gap_tolerance * (1.0 + sol.primal) &&
                    res.lipschitz_excess <= 1e-12;
    return res;
}

void check_mass(double a, double b, double scale) {
    if (std::abs(a - b) > 1e-9 * std::max(scale, 1e-300)) {
        std::ostringstream msg;
        msg << "KR distance between measures of different mass: " << a << " vs " << b;
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

KrResult kr_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double r,
                     const KrOptions& options) {
    check_mass(mu.total(), nu.total(), std::max(mu.total(), nu.total()));
    if (options.reduce_common_mass) {
        auto [plus, minus] = transshipment_reduce(mu, nu);
        return kr_solve(std::move(plus), std::move(minus), r, options);
    }
    return kr_solve(mu, nu, r, options);
}

KrResult kr_distance_fields(const CellField& a, const CellField& b, double r,
                            const KrOptions& options) {
    require_same_mesh(a, b);
    // Signed fields may have zero net mass; compare against the total variation.
    check_mass(a.mass(), b.mass(), a.lq_norm(1.0) + b.lq_norm(1.0));
    const CartesianMesh& mesh = a.mesh;
    DiscreteMeasure plus{mesh.dim(), {}, {}};
    DiscreteMeasure minus{mesh.dim(), {}, {}};
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const auto k = static_cast<std::size_t>(c);
        const double m = (a.values[k] - b.values[k]) * mesh.cell_volume();
        if (m > 0.0) plus.add(mesh.centroid(c), m);
        else if (m < 0.0) minus.add(mesh.centroid(c), -m);
    }
    return kr_solve(std::move(plus), std::move(minus), r, options);
}

double w1_general(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const TransportOptions& options) {
    const auto cost = [](const Point& x, const Point& y) {
        return std::hypot(x[0] - y[0], x[1] - y[1]);
    };
    return solve_transport(mu, nu, cost, options).primal;
}

double coupling_upper_bound(const std::vector<CouplingSample>& pairs, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("KR parameter r must be positive");
    double s = 0.0;
    for (const auto& p : pairs) s += p.weight * log_cost(p.x, p.y, r);
    return s;
}

DiscreteMeasure to_measure(const CellField& field) {
    DiscreteMeasure out{field.mesh.dim(), {}, {}};
    for (CellIndex c = 0; c < field.mesh.cell_count(); ++c) {
        const double v = field.values[static_cast<std::size_t>(c)];
        if (v < 0.0) throw std::invalid_argument("to_measure: negative density");
        if (v > 0.0) out.add(field.mesh.centroid(c), v * field.mesh.cell_volume());
    }
    return out;
}

}  // namespace upwind
