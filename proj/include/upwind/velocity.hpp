#pragma once

#include <functional>
#include <string>
#include <vector>

#include "upwind/mesh.hpp"

namespace upwind {

/// Hyperplane {x : x[axis] = coordinate} across which a field is not smooth
/// (taken modulo the extent on periodic meshes). Edge quadrature grades
/// toward these lines.
struct SingularLine {
    int axis = 0;
    double coordinate = 0.0;
};

struct VelocityField {
    std::string name;
    int dim = 2;
    std::function<Point(double t, const Point& x)> eval;
    /// Declared bound on |u|_inf, used for u_inf^n in the mesh-free CFL condition.
    double sup_bound = 0.0;
    bool divergence_free = false;
    /// u . nu = 0 on the boundary of a no-flux box.
    bool boundary_compatible = false;
    bool stationary = true;
    std::vector<SingularLine> singular_lines;

    Point operator()(double t, const Point& x) const { return eval(t, x); }
};

/// Constant field U.
VelocityField builtin_constant(Point U, int dim = 2);

/// Shear field (v(x2), 1/2) on the unit torus with
/// v(x2) = sign(sin 2 pi x2) |sin 2 pi x2|^(1/2). Hoelder-1/2, divergence free.
VelocityField builtin_sobolev_shear();

/// The profile v of the Sobolev shear field.
double sobolev_profile(double x2);

VelocityField negated(const VelocityField& field);

/// Builds a field by name: "constant" (u_c = (0, 1) in 2-D, U = 1 in 1-D),
/// "sobolev", "zero".
VelocityField field_by_name(const std::string& name, int dim = 2);

enum class TimeRule { Midpoint, Gauss2 };

struct EdgeQuadrature {
    int points = 4;
    /// Points per panel on edges touching a singular line.
    int singular_points = 16;
    int segments = 1;
    /// Time rule for non-stationary fields.
    TimeRule time_rule = TimeRule::Midpoint;
};

/// Time- and edge-averaged normal velocity u_KL^n seen from edge.cell.
/// Computed for any face, boundary faces included.
double edge_flux(const VelocityField& field, const CartesianMesh& mesh, const EdgeId& edge,
                 double t_n, double dt, const EdgeQuadrature& quad = {});

/// Per-edge fluxes u_KL^n for one time step, stored once per physical edge as
/// the flux through the High face of each cell. No-flux boundary faces carry 0.
class EdgeFluxSet {
public:
    EdgeFluxSet(CartesianMesh mesh, long step, double sup_bound);

    const CartesianMesh& mesh() const { return mesh_; }
    long step() const { return step_; }
    /// u_inf^n, the time-averaged sup norm of the field over the step.
    double sup_bound() const { return sup_bound_; }

    /// Signed u_KL as seen from edge.cell; antisymmetric by construction.
    double flux(const EdgeId& edge) const;
    double plus(const EdgeId& edge) const;
    double minus(const EdgeId& edge) const;

    /// Flux through the High face of `cell` along `axis`.
    double high(int axis, CellIndex cell) const { return high_[axis][cell]; }
    void set_high(int axis, CellIndex cell, double value) { high_[axis][cell] = value; }
    const std::vector<double>& high_faces(int axis) const { return high_[axis]; }

private:
    CartesianMesh mesh_;
    long step_;
    double sup_bound_;
    std::array<std::vector<double>, kMaxDim> high_;
};

EdgeFluxSet assemble_fluxes(const VelocityField& field, const CartesianMesh& mesh, long step,
                            double t_n, double dt, const EdgeQuadrature& quad = {});

struct CflReport {
    /// S_K = dt * sum_L tau_KL u_KL^{n+} per cell.
    std::vector<double> outflow;
    double max_outflow = 0.0;
    CellIndex worst_cell = 0;
    bool violated = false;
    /// dt * u_inf^n / h.
    double courant = 0.0;
    double courant_limit = 1.0;
    bool courant_violated = false;
};

CflReport cfl_audit(const EdgeFluxSet& fluxes, double dt, double courant_limit = 1.0);

/// Net flow u_K^n = sum_L nu_KL u_KL^{n+}.
Point net_flow(const EdgeFluxSet& fluxes, CellIndex cell);

/// Centroid form sum_L p_KL (x_L - x_K) / dt, with x_L taken as the
/// unwrapped neighbor centroid across periodic boundaries.
Point net_flow_centroid(const EdgeFluxSet& fluxes, CellIndex cell, double dt);

}  // namespace upwind
