#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "upwind/mesh.hpp"
#include "upwind/velocity.hpp"

namespace upwind {

/// Piecewise-constant density: one value per cell at time step `step`.
struct CellField {
    CartesianMesh mesh;
    std::vector<double> values;
    long step = 0;
    double time = 0.0;

    CellField(CartesianMesh m, std::vector<double> v, long n = 0, double t = 0.0);

    double mass() const;
    double max_abs() const;
    double min() const;
    double lq_norm(double q) const;
};

CellField constant_field(const CartesianMesh& mesh, double value);

/// Cell averages of rho0 by tensor-product Gauss-Legendre quadrature with
/// `points`^d nodes per cell.
CellField discretize_initial(const std::function<double(const Point&)>& rho0,
                             const CartesianMesh& mesh, int points = 4);

/// Jump probabilities p_KL^n = dt tau_KL u_KL^{n+}, stored per physical edge:
/// forward(a, K) = p_{K, K+e_a}, backward(a, K) = p_{K+e_a, K}.
class TransitionTable {
public:
    TransitionTable(CartesianMesh mesh, long step, double dt);

    const CartesianMesh& mesh() const { return mesh_; }
    long step() const { return step_; }
    double dt() const { return dt_; }

    double forward(int axis, CellIndex cell) const { return forward_[axis][cell]; }
    double backward(int axis, CellIndex cell) const { return backward_[axis][cell]; }
    const std::vector<double>& forward_row(int axis) const { return forward_[axis]; }
    const std::vector<double>& backward_row(int axis) const { return backward_[axis]; }

    /// p_KL for the neighbor across `edge` (0 across a no-flux boundary).
    double jump(const EdgeId& edge) const;
    /// sum_{L ~ K} p_KL.
    double leave(CellIndex cell) const;
    /// p_KK = 1 - sum_{L ~ K} p_KL.
    double stay(CellIndex cell) const { return 1.0 - leave(cell); }

private:
    friend TransitionTable assemble_transitions(const EdgeFluxSet&, double);
    CartesianMesh mesh_;
    long step_;
    double dt_;
    std::array<std::vector<double>, kMaxDim> forward_;
    std::array<std::vector<double>, kMaxDim> backward_;
};

class CflViolation : public std::runtime_error {
public:
    CflViolation(CellIndex cell, double outflow, long step);
    CellIndex cell() const { return cell_; }
    double outflow() const { return outflow_; }
    long step() const { return step_; }

private:
    CellIndex cell_;
    double outflow_;
    long step_;
};

/// Throws CflViolation when some cell has sum_L p_KL > 1.
TransitionTable assemble_transitions(const EdgeFluxSet& fluxes, double dt);

/// One upwind step in flux form:
/// rho_K^{n+1} = rho_K^n - sum_L (p_KL rho_K^n - p_LK rho_L^n).
CellField step(const CellField& field, const TransitionTable& transitions);

/// Allocation-free variant of step() writing into `next`.
void step_into(const CellField& field, const TransitionTable& transitions,
               std::vector<double>& next);

struct RunOptions {
    /// Time of rho0; the field is sampled at t0 + n dt.
    double t0 = 0.0;
    long first_step = 0;
    EdgeQuadrature quadrature{};
    double courant_limit = 1.0;
    bool keep_trajectory = false;
    /// Called on the driver thread for every n = 0..N.
    std::function<void(const CellField&)> hook;
};

struct RunResult {
    CellField final_field;
    std::vector<CellField> trajectory;
    long steps = 0;
};

/// Number of steps N with N dt = T; throws unless T / dt is integral.
long steps_for(double T, double dt);

/// Advances rho0 over [t0, t0 + T] with N = T / dt steps.
RunResult run(const CellField& rho0, const VelocityField& field, double dt, double T,
              const RunOptions& options = {});

/// Snapshot dump of a cell field.
void write_snapshot_csv(const CellField& field, const std::string& path);
void write_snapshot_binary(const CellField& field, const std::string& path);
/// Reads either snapshot format.
CellField read_snapshot(const std::string& path);

}  // namespace upwind
