#include "upwind/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace upwind {

CartesianMesh::CartesianMesh(const MeshSpec& spec)
    : dim_(spec.dim), boundary_(spec.boundary), regularity_(spec.regularity) {
    if (dim_ < 1 || dim_ > kMaxDim) {
        throw std::invalid_argument("mesh dimension must be 1 or 2");
    }
    if (!(regularity_ > 0.0)) {
        throw std::invalid_argument("mesh regularity constant must be positive");
    }
    double diam2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
        if (!(spec.extent[a] > 0.0) || !std::isfinite(spec.extent[a])) {
            throw std::invalid_argument("mesh extent must be positive and finite");
        }
        if (spec.cells[a] < 1) {
            throw std::invalid_argument("mesh needs at least one cell per axis");
        }
        extent_[a] = spec.extent[a];
        cells_[a] = spec.cells[a];
        width_[a] = extent_[a] / static_cast<double>(cells_[a]);
        diam2 += width_[a] * width_[a];
    }
    diameter_ = std::sqrt(diam2);
    cell_count_ = 1;
    cell_volume_ = 1.0;
    for (int a = 0; a < dim_; ++a) {
        stride_[a] = cell_count_;
        cell_count_ *= cells_[a];
        cell_volume_ *= width_[a];
    }
    for (int a = 0; a < dim_; ++a) {
        if (diameter_ > regularity_ * width_[a]) {
            std::ostringstream msg;
            msg << "mesh regularity violated: h = " << diameter_ << " > C * h_" << a << " = "
                << regularity_ * width_[a];
            throw std::invalid_argument(msg.str());
        }
    }
}

double CartesianMesh::min_width() const {
    double w = width_[0];
    for (int a = 1; a < dim_; ++a) w = std::min(w, width_[a]);
    return w;
}

double CartesianMesh::domain_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= extent_[a];
    return v;
}

double CartesianMesh::surface_area() const {
    double s = 0.0;
    for (int a = 0; a < dim_; ++a) s += 2.0 * edge_area(a);
    return s;
}

std::array<CellIndex, kMaxDim> CartesianMesh::multi_index(CellIndex cell) const {
    std::array<CellIndex, kMaxDim> m{0, 0};
    for (int a = 0; a < dim_; ++a) {
        m[a] = cell % cells_[a];
        cell /= cells_[a];
    }
    return m;
}

CellIndex CartesianMesh::linear_index(const std::array<CellIndex, kMaxDim>& multi) const {
    CellIndex idx = 0;
    for (int a = 0; a < dim_; ++a) idx += multi[a] * stride_[a];
    return idx;
}

Point CartesianMesh::lower_corner(CellIndex cell) const {
    const auto m = multi_index(cell);
    Point p{0.0, 0.0};
    for (int a = 0; a < dim_; ++a) p[a] = static_cast<double>(m[a]) * width_[a];
    return p;
}

Point CartesianMesh::centroid(CellIndex cell) const {
    Point p = lower_corner(cell);
    for (int a = 0; a < dim_; ++a) p[a] += 0.5 * width_[a];
    return p;
}

std::optional<CellIndex> CartesianMesh::neighbor(CellIndex cell, int axis, int dir) const {
    const CellIndex i = (cell / stride_[axis]) % cells_[axis];
    CellIndex j = i + dir;
    if (j < 0 || j >= cells_[axis]) {
        if (boundary_ == Boundary::NoFlux) return std::nullopt;
        j = (j + cells_[axis]) % cells_[axis];
    }
    return cell + (j - i) * stride_[axis];
}

bool CartesianMesh::is_boundary(const EdgeId& edge) const {
    return !neighbor(edge.cell, edge.axis, edge.side == Side::High ? 1 : -1).has_value();
}

EdgeId CartesianMesh::canonical(const EdgeId& edge) const {
    if (edge.side == Side::High) return edge;
    const auto nb = neighbor(edge.cell, edge.axis, -1);
    if (!nb) return edge;
    return EdgeId{*nb, edge.axis, Side::High};
}

Point CartesianMesh::normal(const EdgeId& edge) const {
    Point n{0.0, 0.0};
    n[edge.axis] = edge.side == Side::High ? 1.0 : -1.0;
    return n;
}

double CartesianMesh::tau(const EdgeId& edge) const {
    return edge_area(edge.axis) / cell_volume_;
}

std::vector<EdgeId> CartesianMesh::edges() const {
    std::vector<EdgeId> out;
    out.reserve(static_cast<std::size_t>(interior_edge_count() + boundary_edge_count()));
    for (int a = 0; a < dim_; ++a) {
        for (CellIndex c = 0; c < cell_count_; ++c) {
            const CellIndex i = (c / stride_[a]) % cells_[a];
            if (boundary_ == Boundary::NoFlux && i == 0) out.push_back({c, a, Side::Low});
            out.push_back({c, a, Side::High});
        }
    }
    return out;
}

std::int64_t CartesianMesh::interior_edge_count() const {
    std::int64_t n = 0;
    for (int a = 0; a < dim_; ++a) {
        const std::int64_t per_line = boundary_ == Boundary::Periodic ? cells_[a] : cells_[a] - 1;
        n += per_line * (cell_count_ / cells_[a]);
    }
    return n;
}

std::int64_t CartesianMesh::boundary_edge_count() const {
    if (boundary_ == Boundary::Periodic) return 0;
    std::int64_t n = 0;
    for (int a = 0; a < dim_; ++a) n += 2 * (cell_count_ / cells_[a]);
    return n;
}

Point CartesianMesh::wrap(Point x) const {
    if (boundary_ != Boundary::Periodic) return x;
    for (int a = 0; a < dim_; ++a) {
        double y = x[a] - extent_[a] * std::floor(x[a] / extent_[a]);
        if (y >= extent_[a]) y = 0.0;
        x[a] = y;
    }
    return x;
}

CellIndex CartesianMesh::locate_cell(Point x) const {
    x = wrap(x);
    std::array<CellIndex, kMaxDim> m{0, 0};
    for (int a = 0; a < dim_; ++a) {
        if (!std::isfinite(x[a])) throw std::out_of_range("locate_cell: non-finite point");
        if (boundary_ == Boundary::NoFlux && (x[a] < 0.0 || x[a] > extent_[a])) {
            std::ostringstream msg;
            msg << "locate_cell: coordinate " << x[a] << " outside [0, " << extent_[a] << "]";
            throw std::out_of_range(msg.str());
        }
        auto i = static_cast<CellIndex>(std::floor(x[a] / width_[a]));
        m[a] = std::clamp<CellIndex>(i, 0, cells_[a] - 1);
    }
    return linear_index(m);
}

bool CartesianMesh::operator==(const CartesianMesh& other) const {
    if (dim_ != other.dim_ || boundary_ != other.boundary_) return false;
    for (int a = 0; a < dim_; ++a) {
        if (cells_[a] != other.cells_[a] || extent_[a] != other.extent_[a]) return false;
    }
    return true;
}

CartesianMesh build_mesh(int dim, Point extent, std::array<CellIndex, kMaxDim> cells,
                         Boundary boundary, double regularity) {
    return CartesianMesh(MeshSpec{dim, extent, cells, boundary, regularity});
}

CartesianMesh unit_torus(int dim, CellIndex cells_per_axis) {
    return build_mesh(dim, {1.0, 1.0}, {cells_per_axis, cells_per_axis}, Boundary::Periodic);
}

double tau(const CartesianMesh& mesh, const EdgeId& edge) { return mesh.tau(edge); }

CellIndex locate_cell(const CartesianMesh& mesh, Point x) { return mesh.locate_cell(x); }

}  // namespace upwind
