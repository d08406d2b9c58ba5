#pragma once

#include <cstddef>
#include <vector>

#include "upwind/scheme.hpp"
#include "upwind/transport.hpp"

namespace upwind {

/// (sum_K |K| |a_K - b_K|^q)^(1/q); q = infinity gives the max norm.
double l_norm_error(const CellField& a, const CellField& b, double q);

/// Homogeneous H^-1 norm of a zero-mean piecewise-constant field on a
/// periodic box, from the exact Fourier transform of the cell indicator
/// functions (DFT times per-axis h_i sinc(k_i h_i / 2)), summed over all
/// nonzero modes with |k_i| <= pi / h_i.
double hminus1_norm(const CellField& diff);

/// hminus1_norm(a - b).
double hminus1_error(const CellField& a, const CellField& b);

/// Exact 1-D Wasserstein-1 distance as the integral of |F_mu - F_nu|.
double w1_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
             double mass_tolerance = 1e-9);

/// W1 between two 1-D cell fields of equal mass, masses at cell centroids.
/// Fields may be signed; only their difference matters.
double w1_fields_1d(const CartesianMesh& mesh, const std::vector<double>& a,
                    const std::vector<double>& b);

/// Metric d(x, y) = log(|x - y| / r + 1).
double log_cost(const Point& x, const Point& y, double r);

struct KrOptions {
    /// Work with (mu - nu)^+ versus (mu - nu)^-; disable only for testing.
    bool reduce_common_mass = true;
    std::size_t size_cap = 5000;
    TransportOptions transport{};
    /// Relative duality-gap threshold for certification.
    double gap_tolerance = 1e-8;
};

struct KrResult {
    double value = 0.0;
    TransportPlan plan;
    /// Support the plan refers to, after the transshipment reduction.
    DiscreteMeasure sources;
    DiscreteMeasure sinks;
    /// Potential psi on sources then sinks, 1-Lipschitz for the log metric.
    std::vector<double> potential;
    /// int psi d(mu - nu) for the certified potential.
    double dual = 0.0;
    double gap = 0.0;
    /// max over pairs of psi(x) - psi(y) - d(x, y), <= 0 up to round-off.
    double lipschitz_excess = 0.0;
    bool certified = false;
};

/// Transshipment reduction: merges identical points and splits the net
/// signed mass into (mu - nu)^+ and (mu - nu)^-.
std::pair<DiscreteMeasure, DiscreteMeasure> transshipment_reduce(const DiscreteMeasure& mu,
                                                                 const DiscreteMeasure& nu);

/// Logarithmic Kantorovich-Rubinstein distance D_r with an optimal plan and a
/// dual certificate. Throws std::length_error above the size cap.
KrResult kr_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double r,
                     const KrOptions& options = {});

/// D_r between two cell fields with equal mass (signed allowed), masses at
/// cell centroids.
KrResult kr_distance_fields(const CellField& a, const CellField& b, double r,
                            const KrOptions& options = {});

/// Minimum transport cost with cost |x - y| via the min-cost-flow solver.
double w1_general(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const TransportOptions& options = {});

struct CouplingSample {
    Point x;
    Point y;
    double weight = 1.0;
};

/// Standard-coupling upper bound sum_i w_i log(|x_i - y_i| / r + 1).
double coupling_upper_bound(const std::vector<CouplingSample>& pairs, double r);

/// Cell masses |K| rho_K at centroids; entries with zero mass are dropped.
DiscreteMeasure to_measure(const CellField& field);

}  // namespace upwind
