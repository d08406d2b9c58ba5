#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "upwind/mesh.hpp"

namespace upwind {

/// Nonnegative masses at support points in R^dim.
struct DiscreteMeasure {
    int dim = 1;
    std::vector<Point> points;
    std::vector<double> masses;

    double total() const;
    std::size_t size() const { return points.size(); }
    void add(const Point& p, double mass);
};

struct PlanEntry {
    std::size_t source = 0;
    std::size_t target = 0;
    double mass = 0.0;
};

struct TransportPlan {
    std::vector<PlanEntry> entries;
    double cost = 0.0;
};

using CostFunction = std::function<double(const Point&, const Point&)>;

enum class MassPolicy { Reject, Rescale };

struct TransportOptions {
    /// Integer units the common total mass is mapped to.
    double mass_units = 0x1.0p50;
    /// Relative tolerance on the difference of total masses.
    double mass_tolerance = 1e-9;
    MassPolicy mass_policy = MassPolicy::Reject;
    /// Dense cost caching limit (number of source-sink pairs).
    std::size_t cost_cache_limit = 20'000'000;
};

struct TransportSolution {
    TransportPlan plan;
    /// Kantorovich potentials with phi_i + chi_j <= c_ij, equality on the plan.
    std::vector<double> source_potential;
    std::vector<double> sink_potential;
    double primal = 0.0;
    double dual = 0.0;
    /// Masses after integerization, in the original units.
    std::vector<double> source_masses;
    std::vector<double> sink_masses;
    int augmentations = 0;
};

/// Exact minimum-cost transport between two discrete measures of equal mass
/// by successive shortest paths on the bipartite network (Dijkstra with
/// node potentials, integer masses). Costs must be nonnegative.
TransportSolution solve_transport(const DiscreteMeasure& sources, const DiscreteMeasure& sinks,
                                  const CostFunction& cost, const TransportOptions& options = {});

}  // namespace upwind
