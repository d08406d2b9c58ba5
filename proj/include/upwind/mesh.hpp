#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace upwind {

inline constexpr int kMaxDim = 2;

/// A point or vector in R^d, d <= 2. Unused trailing components are zero.
using Point = std::array<double, kMaxDim>;
using CellIndex = std::int64_t;

enum class Boundary { Periodic, NoFlux };

enum class Side { Low, High };

/// A face of a cell: the face of `cell` normal to `axis` on `side`.
/// With periodic boundaries (cell, axis, High) and (neighbor, axis, Low)
/// name the same physical edge; canonical() folds both onto the High form.
struct EdgeId {
    CellIndex cell = 0;
    int axis = 0;
    Side side = Side::High;

    bool operator==(const EdgeId&) const = default;
};

struct MeshSpec {
    int dim = 2;
    Point extent{1.0, 1.0};
    std::array<CellIndex, kMaxDim> cells{1, 1};
    Boundary boundary = Boundary::Periodic;
    /// Mesh-regularity constant C in h <= C * h_i.
    double regularity = 4.0;
};

/// Uniform Cartesian tessellation of the box [0, extent_1) x ... x [0, extent_d).
///
/// Cells are stored linearly with axis 0 varying fastest. All cells are
/// isometric, so |K|, |K|L| and tau_KL depend only on the axis.
/// Immutable after construction.
class CartesianMesh {
public:
    explicit CartesianMesh(const MeshSpec& spec);

    int dim() const { return dim_; }
    Boundary boundary() const { return boundary_; }
    double extent(int axis) const { return extent_[axis]; }
    CellIndex cells(int axis) const { return cells_[axis]; }
    double width(int axis) const { return width_[axis]; }
    double min_width() const;
    /// Maximal cell diameter h.
    double diameter() const { return diameter_; }
    double regularity() const { return regularity_; }
    /// Constant in |dK|/|K| <= C_iso / h implied by h <= C h_i on boxes: 2 d C.
    double isoperimetric_constant() const { return 2.0 * dim_ * regularity_; }

    CellIndex cell_count() const { return cell_count_; }
    CellIndex stride(int axis) const { return stride_[axis]; }
    double cell_volume() const { return cell_volume_; }
    double domain_volume() const;
    /// (d-1)-dimensional area of a face normal to `axis`; 1 in one dimension.
    double edge_area(int axis) const { return cell_volume_ / width_[axis]; }
    double surface_area() const;

    std::array<CellIndex, kMaxDim> multi_index(CellIndex cell) const;
    CellIndex linear_index(const std::array<CellIndex, kMaxDim>& multi) const;
    Point centroid(CellIndex cell) const;
    /// Lower corner a of the cell box [a, a + h).
    Point lower_corner(CellIndex cell) const;

    /// Neighbor across the face (axis, dir) with dir = +1 or -1; nullopt at a
    /// no-flux boundary.
    std::optional<CellIndex> neighbor(CellIndex cell, int axis, int dir) const;

    bool is_boundary(const EdgeId& edge) const;
    /// Folds a Low face onto the High face of the lower neighbor. Boundary
    /// edges are returned unchanged.
    EdgeId canonical(const EdgeId& edge) const;
    /// Outward normal nu_KL of the face as seen from edge.cell.
    Point normal(const EdgeId& edge) const;
    /// Relative inverse length scale |K|L| / |K|.
    double tau(const EdgeId& edge) const;
    /// Every physical edge once; interior edges in canonical High form,
    /// boundary edges as they are.
    std::vector<EdgeId> edges() const;
    std::int64_t interior_edge_count() const;
    std::int64_t boundary_edge_count() const;

    /// Maps a point to periodic representative (periodic axes only).
    Point wrap(Point x) const;
    /// Half-open cell lookup. Throws std::out_of_range for points outside a
    /// no-flux box.
    CellIndex locate_cell(Point x) const;

    bool operator==(const CartesianMesh& other) const;

private:
    int dim_;
    Boundary boundary_;
    Point extent_{};
    std::array<CellIndex, kMaxDim> cells_{1, 1};
    Point width_{1.0, 1.0};
    std::array<CellIndex, kMaxDim> stride_{1, 1};
    CellIndex cell_count_ = 1;
    double cell_volume_ = 1.0;
    double diameter_ = 0.0;
    double regularity_ = 4.0;
};

CartesianMesh build_mesh(int dim, Point extent, std::array<CellIndex, kMaxDim> cells,
                         Boundary boundary, double regularity = 4.0);

/// Unit periodic box with n cells per axis.
CartesianMesh unit_torus(int dim, CellIndex cells_per_axis);

double tau(const CartesianMesh& mesh, const EdgeId& edge);
CellIndex locate_cell(const CartesianMesh& mesh, Point x);

}  // namespace upwind
