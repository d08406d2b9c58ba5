#include "upwind/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "upwind/quadrature.hpp"

namespace upwind {

CellField::CellField(CartesianMesh m, std::vector<double> v, long n, double t)
    : mesh(std::move(m)), values(std::move(v)), step(n), time(t) {
    if (static_cast<CellIndex>(values.size()) != mesh.cell_count()) {
        throw std::invalid_argument("cell field length does not match the mesh");
    }
    for (double x : values) {
        if (!std::isfinite(x)) throw std::invalid_argument("cell field has non-finite values");
    }
}

double CellField::mass() const {
    double s = 0.0;
    for (double x : values) s += x;
    return s * mesh.cell_volume();
}

double CellField::max_abs() const {
    double m = 0.0;
    for (double x : values) m = std::max(m, std::abs(x));
    return m;
}

double CellField::min() const { return *std::min_element(values.begin(), values.end()); }

double CellField::lq_norm(double q) const {
    if (std::isinf(q)) return max_abs();
    double s = 0.0;
    for (double x : values) s += std::pow(std::abs(x), q);
    return std::pow(s * mesh.cell_volume(), 1.0 / q);
}

CellField constant_field(const CartesianMesh& mesh, double value) {
    return CellField(mesh, std::vector<double>(static_cast<std::size_t>(mesh.cell_count()), value));
}

CellField discretize_initial(const std::function<double(const Point&)>& rho0,
                             const CartesianMesh& mesh, int points) {
    const GaussRule& rule = gauss_legendre(points);
    const int d = mesh.dim();
    std::vector<double> values(static_cast<std::size_t>(mesh.cell_count()));
    const std::size_t q = rule.nodes.size();
    const std::size_t q1 = d == 2 ? q : 1;
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const Point lo = mesh.lower_corner(c);
        double acc = 0.0;
        double first = 0.0;
        bool uniform = true;
        for (std::size_t k1 = 0; k1 < q1; ++k1) {
            for (std::size_t k0 = 0; k0 < q; ++k0) {
                Point x = lo;
                x[0] += 0.5 * mesh.width(0) * (1.0 + rule.nodes[k0]);
                double w = 0.5 * rule.weights[k0];
                if (d == 2) {
                    x[1] += 0.5 * mesh.width(1) * (1.0 + rule.nodes[k1]);
                    w *= 0.5 * rule.weights[k1];
                }
                const double v = rho0(x);
                if (!std::isfinite(v)) {
                    throw std::invalid_argument("initial datum evaluates to a non-finite value");
                }
                if (k0 == 0 && k1 == 0) first = v;
                else if (v != first) uniform = false;
                acc += w * v;
            }
        }
        // A constant datum on the cell is its own average; skip weight round-off.
        values[static_cast<std::size_t>(c)] = uniform ? first : acc;
    }
    return CellField(mesh, std::move(values));
}

TransitionTable::TransitionTable(CartesianMesh mesh, long step, double dt)
    : mesh_(std::move(mesh)), step_(step), dt_(dt) {
    for (int a = 0; a < mesh_.dim(); ++a) {
        forward_[a].assign(static_cast<std::size_t>(mesh_.cell_count()), 0.0);
        backward_[a].assign(static_cast<std::size_t>(mesh_.cell_count()), 0.0);
    }
}

double TransitionTable::jump(const EdgeId& edge) const {
    if (edge.side == Side::High) return forward_[edge.axis][edge.cell];
    const auto nb = mesh_.neighbor(edge.cell, edge.axis, -1);
    if (!nb) return 0.0;
    return backward_[edge.axis][*nb];
}

double TransitionTable::leave(CellIndex cell) const {
    double s = 0.0;
    for (int a = 0; a < mesh_.dim(); ++a) {
        s += forward_[a][cell];
        if (const auto nb = mesh_.neighbor(cell, a, -1)) s += backward_[a][*nb];
    }
    return s;
}

namespace {

std::string cfl_message(CellIndex cell, double outflow, long step) {
    std::ostringstream msg;
    msg << "CFL condition violated at step " << step << ": cell " << cell
        << " has dt * sum tau u+ = " << std::setprecision(17) << outflow << " > 1";
    return msg.str();
}

}  // namespace

CflViolation::CflViolation(CellIndex cell, double outflow, long step)
    : std::runtime_error(cfl_message(cell, outflow, step)),
      cell_(cell),
      outflow_(outflow),
      step_(step) {}

TransitionTable assemble_transitions(const EdgeFluxSet& fluxes, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    const CartesianMesh& mesh = fluxes.mesh();
    TransitionTable table(mesh, fluxes.step(), dt);
    for (int a = 0; a < mesh.dim(); ++a) {
        // tau is uniform on a Cartesian mesh and symmetric: |K| tau_KL = |L| tau_LK.
        const double scale = dt * mesh.tau(EdgeId{0, a, Side::High});
        const auto& high = fluxes.high_faces(a);
        for (std::size_t c = 0; c < high.size(); ++c) {
            table.forward_[a][c] = scale * std::max(0.0, high[c]);
            table.backward_[a][c] = scale * std::max(0.0, -high[c]);
        }
    }
    double worst = 0.0;
    CellIndex worst_cell = 0;
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const double s = table.leave(c);
        if (s > worst) {
            worst = s;
            worst_cell = c;
        }
    }
    if (worst > 1.0) throw CflViolation(worst_cell, worst, fluxes.step());
    return table;
}

void step_into(const CellField& field, const TransitionTable& transitions,
               std::vector<double>& next) {
    const CartesianMesh& mesh = field.mesh;
    if (!(mesh == transitions.mesh())) {
        throw std::invalid_argument("transition table belongs to a different mesh");
    }
    next.resize(field.values.size());
    const double* r = field.values.data();
    double* out = next.data();
    const bool periodic = mesh.boundary() == Boundary::Periodic;
    const CellIndex n0 = mesh.cells(0);
    const CellIndex n1 = mesh.dim() == 2 ? mesh.cells(1) : 1;
    const double* fw0 = transitions.forward_row(0).data();
    const double* bw0 = transitions.backward_row(0).data();
    const double* fw1 = mesh.dim() == 2 ? transitions.forward_row(1).data() : nullptr;
    const double* bw1 = mesh.dim() == 2 ? transitions.backward_row(1).data() : nullptr;

    // Each face contributes p_KL rho_K out and p_LK rho_L in; -1 marks a
    // no-flux boundary.
    auto update = [&](CellIndex c, CellIndex lo0, CellIndex hi0, CellIndex lo1, CellIndex hi1) {
        const double v = r[c];
        double delta = 0.0;
        if (hi0 >= 0) delta += fw0[c] * v - bw0[c] * r[hi0];
        if (lo0 >= 0) delta += bw0[lo0] * v - fw0[lo0] * r[lo0];
        if (hi1 >= 0) delta += fw1[c] * v - bw1[c] * r[hi1];
        if (lo1 >= 0) delta += bw1[lo1] * v - fw1[lo1] * r[lo1];
        out[c] = v - delta;
    };

#pragma omp parallel for schedule(static)
    for (CellIndex j = 0; j < n1; ++j) {
        const CellIndex row = j * n0;
        CellIndex row_lo = -1;
        CellIndex row_hi = -1;
        if (mesh.dim() == 2) {
            if (j > 0) row_lo = row - n0;
            else if (periodic) row_lo = (n1 - 1) * n0;
            if (j + 1 < n1) row_hi = row + n0;
            else if (periodic) row_hi = 0;
        }
        auto lo1 = [&](CellIndex i) { return row_lo >= 0 ? row_lo + i : CellIndex{-1}; };
        auto hi1 = [&](CellIndex i) { return row_hi >= 0 ? row_hi + i : CellIndex{-1}; };
        if (n0 == 1) {
            const CellIndex self = periodic ? row : -1;
            update(row, self, self, lo1(0), hi1(0));
            continue;
        }
        update(row, periodic ? row + n0 - 1 : -1, row + 1, lo1(0), hi1(0));
        for (CellIndex i = 1; i + 1 < n0; ++i) {
            update(row + i, row + i - 1, row + i + 1, lo1(i), hi1(i));
        }
        const CellIndex last = n0 - 1;
        update(row + last, row + last - 1, periodic ? row : -1, lo1(last), hi1(last));
    }
}

CellField step(const CellField& field, const TransitionTable& transitions) {
    std::vector<double> next;
    step_into(field, transitions, next);
    return CellField(field.mesh, std::move(next), field.step + 1,
                     field.time + transitions.dt());
}

long steps_for(double T, double dt) {
    if (!(dt > 0.0) || !(T >= 0.0)) {
        throw std::invalid_argument("final time must be nonnegative and time step positive");
    }
    const double ratio = T / dt;
    const long n = std::lround(ratio);
    if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream msg;
        msg << "final time " << T << " is not a multiple of the time step " << dt;
        throw std::invalid_argument(msg.str());
    }
    return n;
}

RunResult run(const CellField& rho0, const VelocityField& field, double dt, double T,
              const RunOptions& options) {
    const long steps = steps_for(T, dt);
    const CartesianMesh& mesh = rho0.mesh;
    CellField current = rho0;
    current.step = options.first_step;
    current.time = options.t0;

    RunResult result{current, {}, steps};
    if (options.keep_trajectory) result.trajectory.push_back(current);
    if (options.hook) options.hook(current);

    auto make_table = [&](long n, double t) {
        const EdgeFluxSet fluxes = assemble_fluxes(field, mesh, n, t, dt, options.quadrature);
        const CflReport audit = cfl_audit(fluxes, dt, options.courant_limit);
        if (audit.violated) throw CflViolation(audit.worst_cell, audit.max_outflow, n);
        return assemble_transitions(fluxes, dt);
    };

    std::optional<TransitionTable> table;
    std::vector<double> next;
    for (long k = 0; k < steps; ++k) {
        if (!table || !field.stationary) table = make_table(current.step, current.time);
        step_into(current, *table, next);
        current.values.swap(next);
        current.step += 1;
        current.time = options.t0 + static_cast<double>(k + 1) * dt;
        if (options.keep_trajectory) result.trajectory.push_back(current);
        if (options.hook) options.hook(current);
    }
    result.final_field = std::move(current);
    return result;
}

namespace {

constexpr char kBinaryMagic[8] = {'U', 'P', 'W', 'F', 'L', 'D', '0', '1'};

std::string boundary_name(Boundary b) { return b == Boundary::Periodic ? "periodic" : "noflux"; }

}  // namespace

void write_snapshot_csv(const CellField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const CartesianMesh& m = field.mesh;
    out << std::setprecision(17);
    out << "# upwind-field dim=" << m.dim() << " cells=" << m.cells(0);
    if (m.dim() == 2) out << ',' << m.cells(1);
    out << " extent=" << m.extent(0);
    if (m.dim() == 2) out << ',' << m.extent(1);
    out << " boundary=" << boundary_name(m.boundary()) << " n=" << field.step
        << " t=" << field.time << '\n';
    const CellIndex n0 = m.cells(0);
    const CellIndex n1 = m.dim() == 2 ? m.cells(1) : 1;
    for (CellIndex j = 0; j < n1; ++j) {
        for (CellIndex i = 0; i < n0; ++i) {
            if (i) out << ',';
            out << field.values[static_cast<std::size_t>(j * n0 + i)];
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_snapshot_binary(const CellField& field, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const CartesianMesh& m = field.mesh;
    const std::int32_t dim = m.dim();
    const std::int32_t boundary = m.boundary() == Boundary::Periodic ? 0 : 1;
    const std::int64_t cells[2] = {m.cells(0), m.dim() == 2 ? m.cells(1) : 1};
    const double extent[2] = {m.extent(0), m.dim() == 2 ? m.extent(1) : 1.0};
    const std::int64_t n = field.step;
    const double t = field.time;
    out.write(kBinaryMagic, sizeof kBinaryMagic);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&boundary), sizeof boundary);
    out.write(reinterpret_cast<const char*>(cells), sizeof cells);
    out.write(reinterpret_cast<const char*>(extent), sizeof extent);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&t), sizeof t);
    out.write(reinterpret_cast<const char*>(field.values.data()),
              static_cast<std::streamsize>(field.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

namespace {

CellField read_binary(std::ifstream& in, const std::string& path) {
    std::int32_t dim = 0;
    std::int32_t boundary = 0;
    std::int64_t cells[2] = {1, 1};
    double extent[2] = {1.0, 1.0};
    std::int64_t n = 0;
    double t = 0.0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&boundary), sizeof boundary);
    in.read(reinterpret_cast<char*>(cells), sizeof cells);
    in.read(reinterpret_cast<char*>(extent), sizeof extent);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&t), sizeof t);
    if (!in) throw std::runtime_error("truncated snapshot header in '" + path + "'");
    CartesianMesh mesh = build_mesh(dim, {extent[0], extent[1]}, {cells[0], cells[1]},
                                    boundary == 0 ? Boundary::Periodic : Boundary::NoFlux);
    std::vector<double> values(static_cast<std::size_t>(mesh.cell_count()));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated snapshot data in '" + path + "'");
    return CellField(mesh, std::move(values), static_cast<long>(n), t);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

CellField read_csv(std::ifstream& in, const std::string& path) {
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string token;
    hs >> token;
    hs >> token;
    if (token != "upwind-field") throw std::runtime_error("'" + path + "' is not a field snapshot");
    int dim = 0;
    std::array<CellIndex, kMaxDim> cells{1, 1};
    Point extent{1.0, 1.0};
    Boundary boundary = Boundary::Periodic;
    long n = 0;
    double t = 0.0;
    while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "dim") {
            dim = std::stoi(value);
        } else if (key == "cells") {
            const auto parts = split(value, ',');
            for (std::size_t a = 0; a < parts.size() && a < 2; ++a) cells[a] = std::stoll(parts[a]);
        } else if (key == "extent") {
            const auto parts = split(value, ',');
            for (std::size_t a = 0; a < parts.size() && a < 2; ++a) extent[a] = std::stod(parts[a]);
        } else if (key == "boundary") {
            boundary = value == "periodic" ? Boundary::Periodic : Boundary::NoFlux;
        } else if (key == "n") {
            n = std::stol(value);
        } else if (key == "t") {
            t = std::stod(value);
        }
    }
    CartesianMesh mesh = build_mesh(dim, extent, cells, boundary);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(mesh.cell_count()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        for (const auto& v : split(line, ',')) values.push_back(std::stod(v));
    }
    return CellField(mesh, std::move(values), n, t);
}

}  // namespace

CellField read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    char magic[sizeof kBinaryMagic] = {};
    in.read(magic, sizeof magic);
    if (in && std::memcmp(magic, kBinaryMagic, sizeof magic) == 0) return read_binary(in, path);
    in.clear();
    in.seekg(0);
    return read_csv(in, path);
}

}  // namespace upwind
