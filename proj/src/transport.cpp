#include "upwind/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace upwind {

double DiscreteMeasure::total() const {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
}

void DiscreteMeasure::add(const Point& p, double mass) {
    points.push_back(p);
    masses.push_back(mass);
}

namespace {

using Units = std::int64_t;

void validate(const DiscreteMeasure& m, const char* which) {
    if (m.points.size() != m.masses.size()) {
        throw std::invalid_argument(std::string(which) + ": points and masses differ in length");
    }
    for (double x : m.masses) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw std::invalid_argument(std::string(which) + ": masses must be finite and >= 0");
        }
    }
}

/// Rounds masses to integer units summing exactly to `units`; the rounding
/// residue goes to the largest entry.
std::vector<Units> integerize(const std::vector<double>& masses, double total, Units units) {
    std::vector<Units> out(masses.size());
    const double scale = static_cast<double>(units) / total;
    Units sum = 0;
    std::size_t largest = 0;
    for (std::size_t k = 0; k < masses.size(); ++k) {
        out[k] = std::llround(masses[k] * scale);
        sum += out[k];
        if (masses[k] > masses[largest]) largest = k;
    }
    out[largest] += units - sum;
    if (out[largest] < 0) throw std::runtime_error("mass integerization failed");
    return out;
}

struct FlowArc {
    std::size_t other;
    Units flow;
};

}  // namespace

TransportSolution solve_transport(const DiscreteMeasure& sources, const DiscreteMeasure& sinks,
                                  const CostFunction& cost, const TransportOptions& options) {
    validate(sources, "source measure");
    validate(sinks, "sink measure");
    const double ts = sources.total();
    const double tt = sinks.total();
    if (std::abs(ts - tt) > options.mass_tolerance * std::max({ts, tt, 1e-300})) {
        if (options.mass_policy == MassPolicy::Reject) {
            std::ostringstream msg;
            msg << "transport between measures of different mass: " << ts << " vs " << tt;
            throw std::invalid_argument(msg.str());
        }
    }
    TransportSolution sol;
    const std::size_t n = sources.size();
    const std::size_t m = sinks.size();
    if (n == 0 || m == 0 || !(ts > 0.0) || !(tt > 0.0)) {
        sol.source_potential.assign(n, 0.0);
        sol.sink_potential.assign(m, 0.0);
        sol.source_masses.assign(n, 0.0);
        sol.sink_masses.assign(m, 0.0);
        return sol;
    }
    const auto units = static_cast<Units>(options.mass_units);
    std::vector<Units> supply = integerize(sources.masses, ts, units);
    std::vector<Units> demand = integerize(sinks.masses, tt, units);
    // Both sides now carry `units`; one unit is worth total / units.
    const double unit_mass = ts / static_cast<double>(units);
    sol.source_masses.resize(n);
    sol.sink_masses.resize(m);
    for (std::size_t i = 0; i < n; ++i) sol.source_masses[i] = supply[i] * unit_mass;
    for (std::size_t j = 0; j < m; ++j) sol.sink_masses[j] = demand[j] * unit_mass;

    const bool cached = n * m <= options.cost_cache_limit;
    std::vector<double> cost_cache;
    if (cached) {
        cost_cache.resize(n * m);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double c = cost(sources.points[i], sinks.points[j]);
                if (!(c >= 0.0) || !std::isfinite(c)) {
                    throw std::invalid_argument("transport costs must be finite and >= 0");
                }
                cost_cache[i * m + j] = c;
            }
        }
    }
    auto c_of = [&](std::size_t i, std::size_t j) {
        return cached ? cost_cache[i * m + j] : cost(sources.points[i], sinks.points[j]);
    };

    // Node ids: sources 0..n-1, sinks n..n+m-1.
    const std::size_t nodes = n + m;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> potential(nodes, 0.0);
    std::vector<Units> remaining_supply = supply;
    std::vector<Units> remaining_demand = demand;
    std::vector<std::vector<FlowArc>> out_flow(n);  // i -> (j, x_ij)
    std::vector<std::vector<FlowArc>> in_flow(m);   // j -> (i, x_ij)
    std::vector<double> dist(nodes);
    std::vector<std::size_t> parent(nodes);
    std::vector<char> done(nodes);
    const std::size_t none = std::numeric_limits<std::size_t>::max();

    auto flow_entry = [](std::vector<FlowArc>& arcs, std::size_t other) -> Units& {
        for (auto& a : arcs) {
            if (a.other == other) return a.flow;
        }
        arcs.push_back({other, 0});
        return arcs.back().flow;
    };

    Units left = units;
    while (left > 0) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), none);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (remaining_supply[i] > 0) dist[i] = 0.0;
        }
        std::size_t target = none;
        while (true) {
            std::size_t u = none;
            double best = inf;
            for (std::size_t v = 0; v < nodes; ++v) {
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            }
            if (u == none) break;
            done[u] = 1;
            if (u >= n && remaining_demand[u - n] > 0) {
                target = u;
                break;
            }
            if (u < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    const std::size_t v = n + j;
                    if (done[v]) continue;
                    const double rc = std::max(0.0, c_of(u, j) + potential[u] - potential[v]);
                    if (dist[u] + rc < dist[v]) {
                        dist[v] = dist[u] + rc;
                        parent[v] = u;
                    }
                }
            } else {
                const std::size_t j = u - n;
                for (const auto& arc : in_flow[j]) {
                    if (arc.flow <= 0 || done[arc.other]) continue;
                    const double rc =
                        std::max(0.0, -c_of(arc.other, j) + potential[u] - potential[arc.other]);
                    if (dist[u] + rc < dist[arc.other]) {
                        dist[arc.other] = dist[u] + rc;
                        parent[arc.other] = u;
                    }
                }
            }
        }
        if (target == none) throw std::runtime_error("transport: no augmenting path");
        const double dt = dist[target];
        for (std::size_t v = 0; v < nodes; ++v) potential[v] += std::min(dist[v], dt);

        // Bottleneck along the path back to a source with supply.
        Units amount = remaining_demand[target - n];
        std::size_t v = target;
        while (parent[v] != none) {
            const std::size_t u = parent[v];
            if (u >= n) {
                // Reverse arc sink u -> source v cancels flow x_{v, u}.
                amount = std::min(amount, flow_entry(out_flow[v], u - n));
            }
            v = u;
        }
        amount = std::min(amount, remaining_supply[v]);
        remaining_supply[v] -= amount;
        remaining_demand[target - n] -= amount;
        v = target;
        while (parent[v] != none) {
            const std::size_t u = parent[v];
            if (u < n) {
                flow_entry(out_flow[u], v - n) += amount;
                flow_entry(in_flow[v - n], u) += amount;
            } else {
                flow_entry(out_flow[v], u - n) -= amount;
                flow_entry(in_flow[u - n], v) -= amount;
            }
            v = u;
        }
        left -= amount;
        ++sol.augmentations;
    }

    double primal = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& arc : out_flow[i]) {
            if (arc.flow <= 0) continue;
            const double mass = static_cast<double>(arc.flow) * unit_mass;
            sol.plan.entries.push_back({i, arc.other, mass});
            primal += mass * c_of(i, arc.other);
        }
    }
    sol.plan.cost = primal;
    sol.primal = primal;
    sol.source_potential.resize(n);
    sol.sink_potential.resize(m);
    double dual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sol.source_potential[i] = -potential[i];
        dual += sol.source_masses[i] * sol.source_potential[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
        sol.sink_potential[j] = potential[n + j];
        dual += sol.sink_masses[j] * sol.sink_potential[j];
    }
    sol.dual = dual;
    return sol;
}

}  // namespace upwind
