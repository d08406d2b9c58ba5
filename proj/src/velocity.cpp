#include "upwind/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "upwind/quadrature.hpp"

namespace upwind {

VelocityField builtin_constant(Point U, int dim) {
    VelocityField f;
    f.name = "constant";
    f.dim = dim;
    f.eval = [U](double, const Point&) { return U; };
    f.sup_bound = std::hypot(U[0], U[1]);
    f.divergence_free = true;
    f.boundary_compatible = U[0] == 0.0 && U[1] == 0.0;
    f.stationary = true;
    return f;
}

double sobolev_profile(double x2) {
    // Reduce to [0, 1/4] exactly so the profile is accurate next to its zeros.
    double y = x2 - std::floor(x2);
    double sign = 1.0;
    if (y >= 0.5) {
        y -= 0.5;
        sign = -1.0;
    }
    if (y > 0.25) y = 0.5 - y;
    return sign * std::sqrt(std::sin(2.0 * std::numbers::pi * y));
}

VelocityField builtin_sobolev_shear() {
    VelocityField f;
    f.name = "sobolev";
    f.dim = 2;
    f.eval = [](double, const Point& x) {
        const double x2 = x[1] - std::floor(x[1]);
        return Point{sobolev_profile(x2), 0.5};
    };
    f.sup_bound = 1.0;
    f.divergence_free = true;
    f.boundary_compatible = false;
    f.stationary = true;
    f.singular_lines = {{1, 0.0}, {1, 0.5}};
    return f;
}

VelocityField negated(const VelocityField& field) {
    VelocityField f = field;
    f.name = field.name + "-reversed";
    f.eval = [inner = field.eval](double t, const Point& x) {
        Point v = inner(t, x);
        return Point{-v[0], -v[1]};
    };
    return f;
}

VelocityField field_by_name(const std::string& name, int dim) {
    if (name == "constant") {
        return dim == 1 ? builtin_constant({1.0, 0.0}, 1) : builtin_constant({0.0, 1.0}, 2);
    }
    if (name == "sobolev") {
        if (dim != 2) throw std::invalid_argument("the sobolev field is two-dimensional");
        return builtin_sobolev_shear();
    }
    if (name == "zero") {
        auto f = builtin_constant({0.0, 0.0}, dim);
        f.name = "zero";
        return f;
    }
    throw std::invalid_argument("unknown velocity field '" + name + "'");
}

namespace {

/// Singular coordinates of `field` along `axis` inside [lo, hi], periodic copies included.
std::vector<double> singular_points_in(const VelocityField& field, const CartesianMesh& mesh,
                                       int axis, double lo, double hi) {
    std::vector<double> out;
    // Edge ends computed as lo + width may miss a line by round-off.
    const double tol = 1e-12 * (hi - lo);
    for (const auto& line : field.singular_lines) {
        if (line.axis != axis) continue;
        if (mesh.boundary() == Boundary::Periodic) {
            const double period = mesh.extent(axis);
            const double k0 = std::floor((lo - line.coordinate) / period);
            for (double k = k0; k <= k0 + 2.0; k += 1.0) {
                const double c = line.coordinate + k * period;
                if (c >= lo - tol && c <= hi + tol) out.push_back(std::clamp(c, lo, hi));
            }
        } else if (line.coordinate >= lo - tol && line.coordinate <= hi + tol) {
            out.push_back(std::clamp(line.coordinate, lo, hi));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double edge_average_at(const VelocityField& field, const CartesianMesh& mesh, const EdgeId& edge,
                       double t, const EdgeQuadrature& quad) {
    const int a = edge.axis;
    const Point nu = mesh.normal(edge);
    Point face = mesh.lower_corner(edge.cell);
    if (edge.side == Side::High) face[a] += mesh.width(a);
    if (mesh.dim() == 1) {
        const Point u = field(t, face);
        return u[0] * nu[0];
    }
    const int b = 1 - a;
    const double lo = face[b];
    const double hi = lo + mesh.width(b);
    // Tracks whether every sample agreed, so constant normal components come
    // out exact instead of picking up weight round-off.
    bool uniform = true;
    double first = std::numeric_limits<double>::quiet_NaN();
    auto integrand = [&](double s) {
        Point x = face;
        x[b] = s;
        const Point u = field(t, x);
        const double v = u[0] * nu[0] + u[1] * nu[1];
        if (std::isnan(first)) first = v;
        else if (v != first) uniform = false;
        return v;
    };
    const auto breaks = singular_points_in(field, mesh, b, lo, hi);
    double integral = 0.0;
    if (breaks.empty()) {
        // Edges within a few lengths of a singular line see a nearby branch
        // point; the higher order rule keeps them at round-off accuracy.
        const double len = hi - lo;
        const bool near = !singular_points_in(field, mesh, b, lo - 4.0 * len, hi + 4.0 * len).empty();
        integral = integrate_gauss(integrand, lo, hi, near ? quad.singular_points : quad.points,
                                   quad.segments);
    } else {
        std::vector<double> knots{lo};
        for (double c : breaks) {
            if (c > knots.back()) knots.push_back(c);
        }
        if (hi > knots.back()) knots.push_back(hi);
        auto is_singular = [&](double c) {
            return std::find(breaks.begin(), breaks.end(), c) != breaks.end();
        };
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            const double p = knots[k];
            const double q = knots[k + 1];
            const bool sp = is_singular(p);
            const bool sq = is_singular(q);
            if (sp && sq) {
                const double m = 0.5 * (p + q);
                integral += integrate_graded(integrand, p, m, p, quad.singular_points);
                integral += integrate_graded(integrand, m, q, q, quad.singular_points);
            } else if (sp || sq) {
                integral += integrate_graded(integrand, p, q, sp ? p : q, quad.singular_points);
            } else {
                integral += integrate_gauss(integrand, p, q, quad.points, quad.segments);
            }
        }
    }
    if (uniform && !std::isnan(first)) return first;
    return integral / (hi - lo);
}

}  // namespace

double edge_flux(const VelocityField& field, const CartesianMesh& mesh, const EdgeId& edge,
                 double t_n, double dt, const EdgeQuadrature& quad) {
    if (!(dt > 0.0)) throw std::invalid_argument("edge_flux: time step must be positive");
    if (quad.points < 1 || quad.singular_points < 1) {
        throw std::invalid_argument("edge_flux: quadrature order must be >= 1");
    }
    if (field.stationary) return edge_average_at(field, mesh, edge, t_n, quad);
    if (quad.time_rule == TimeRule::Midpoint) {
        return edge_average_at(field, mesh, edge, t_n + 0.5 * dt, quad);
    }
    const double off = 0.5 * dt / std::sqrt(3.0);
    const double mid = t_n + 0.5 * dt;
    return 0.5 * (edge_average_at(field, mesh, edge, mid - off, quad) +
                  edge_average_at(field, mesh, edge, mid + off, quad));
}

EdgeFluxSet::EdgeFluxSet(CartesianMesh mesh, long step, double sup_bound)
    : mesh_(std::move(mesh)), step_(step), sup_bound_(sup_bound) {
    for (int a = 0; a < mesh_.dim(); ++a) {
        high_[a].assign(static_cast<std::size_t>(mesh_.cell_count()), 0.0);
    }
}

double EdgeFluxSet::flux(const EdgeId& edge) const {
    if (edge.side == Side::High) return high_[edge.axis][edge.cell];
    const auto nb = mesh_.neighbor(edge.cell, edge.axis, -1);
    if (!nb) return 0.0;
    return -high_[edge.axis][*nb];
}

double EdgeFluxSet::plus(const EdgeId& edge) const { return std::max(0.0, flux(edge)); }

double EdgeFluxSet::minus(const EdgeId& edge) const { return -std::min(0.0, flux(edge)); }

EdgeFluxSet assemble_fluxes(const VelocityField& field, const CartesianMesh& mesh, long step,
                            double t_n, double dt, const EdgeQuadrature& quad) {
    if (field.dim != mesh.dim()) {
        throw std::invalid_argument("velocity field and mesh dimensions differ");
    }
    EdgeFluxSet fluxes(mesh, step, field.sup_bound);
    for (int a = 0; a < mesh.dim(); ++a) {
        const CellIndex n = mesh.cell_count();
#pragma omp parallel for schedule(static)
        for (CellIndex c = 0; c < n; ++c) {
            const EdgeId e{c, a, Side::High};
            if (mesh.is_boundary(e)) continue;
            fluxes.set_high(a, c, edge_flux(field, mesh, e, t_n, dt, quad));
        }
    }
    return fluxes;
}

CflReport cfl_audit(const EdgeFluxSet& fluxes, double dt, double courant_limit) {
    const CartesianMesh& mesh = fluxes.mesh();
    CflReport r;
    r.outflow.assign(static_cast<std::size_t>(mesh.cell_count()), 0.0);
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        double s = 0.0;
        for (int a = 0; a < mesh.dim(); ++a) {
            for (Side side : {Side::Low, Side::High}) {
                const EdgeId e{c, a, side};
                s += mesh.tau(e) * fluxes.plus(e);
            }
        }
        s *= dt;
        r.outflow[static_cast<std::size_t>(c)] = s;
        if (s > r.max_outflow) {
            r.max_outflow = s;
            r.worst_cell = c;
        }
    }
    r.violated = r.max_outflow > 1.0;
    r.courant = dt * fluxes.sup_bound() / mesh.diameter();
    r.courant_limit = courant_limit;
    r.courant_violated = r.courant > courant_limit;
    return r;
}

Point net_flow(const EdgeFluxSet& fluxes, CellIndex cell) {
    const CartesianMesh& mesh = fluxes.mesh();
    Point u{0.0, 0.0};
    for (int a = 0; a < mesh.dim(); ++a) {
        for (Side side : {Side::Low, Side::High}) {
            const EdgeId e{cell, a, side};
            const Point nu = mesh.normal(e);
            const double p = fluxes.plus(e);
            u[0] += nu[0] * p;
            u[1] += nu[1] * p;
        }
    }
    return u;
}

Point net_flow_centroid(const EdgeFluxSet& fluxes, CellIndex cell, double dt) {
    const CartesianMesh& mesh = fluxes.mesh();
    Point u{0.0, 0.0};
    for (int a = 0; a < mesh.dim(); ++a) {
        for (Side side : {Side::Low, Side::High}) {
            const EdgeId e{cell, a, side};
            if (mesh.is_boundary(e)) continue;
            const double p = dt * mesh.tau(e) * fluxes.plus(e);
            const double offset = side == Side::High ? mesh.width(a) : -mesh.width(a);
            u[a] += p * offset / dt;
        }
    }
    return u;
}

}  // namespace upwind
