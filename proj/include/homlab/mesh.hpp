#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "homlab/common.hpp"

namespace homlab {

enum class Shape { torus, interval, square, lshape };

std::string to_string(Shape s);
Shape shape_from_string(const std::string& name);

enum class BoundaryTag : unsigned char { interior, edge, corner, reentrant };

/// One-dimensional Gauss–Legendre rule on [0,1].
struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// n-point rule on [0,1], n in 1..6.
const GaussRule& gauss_rule(int n);

/// Uniform structured mesh of Q1 (d = 2) or P1 (d = 1) cells.
///
/// Covers both the unit torus (periodic index wrap, N^d nodes) and the
/// physical domains (0,L), (0,L)^2 and the L-shape, which is the square with
/// the open upper-right quadrant removed. Nodes are addressed by grid index
/// (i, j) with i fastest; inactive L-shape nodes have no dof.
class Mesh {
 public:
  struct Facet {
    Index cell;
    int side;  ///< 0: xi0 = 0, 1: xi0 = 1, 2: xi1 = 0, 3: xi1 = 1
    Point normal;
    double length;  ///< facet measure (1 in 1D)
  };

  static Mesh torus(int d, int n);
  static Mesh interval(int n, double length = 1.0);
  static Mesh square(int n, double length = 1.0);
  /// n cells per unit length; n must be even.
  static Mesh lshape(int n);
  static Mesh make(Shape shape, int d, int n);

  Shape shape() const noexcept { return shape_; }
  int dim() const noexcept { return d_; }
  int cells_per_side() const noexcept { return n_; }
  double h() const noexcept { return h_; }
  double length() const noexcept { return length_; }
  bool periodic() const noexcept { return shape_ == Shape::torus; }

  Index num_nodes() const noexcept { return static_cast<Index>(nodes_.size()); }
  Index num_cells() const noexcept { return static_cast<Index>(cells_.size()); }
  int nodes_per_cell() const noexcept { return d_ == 1 ? 2 : 4; }

  const Point& node(Index k) const { return nodes_[k]; }
  /// Local node order: (0,0), (1,0), (0,1), (1,1); in 1D: 0, 1.
  const std::array<Index, 4>& cell_nodes(Index c) const { return cells_[c]; }
  const Point& cell_origin(Index c) const { return origins_[c]; }

  /// Grid extent per dimension (N on the torus, N + 1 otherwise).
  int grid_extent() const noexcept { return extent_; }
  /// Node at grid index (i, j), or -1 if inactive. Torus indices wrap.
  Index node_at(int i, int j = 0) const;
  std::array<int, 2> grid_index(Index node) const { return grid_of_node_[node]; }

  BoundaryTag tag(Index node) const { return tags_[node]; }
  bool on_boundary(Index node) const { return tags_[node] != BoundaryTag::interior; }
  std::vector<Index> boundary_nodes() const;
  const std::vector<Facet>& facets() const noexcept { return facets_; }

  /// Physical point of local coordinates xi in cell c.
  Point map(Index c, const Point& xi) const;
  /// Containing cell and local coordinates; nullopt outside the domain.
  std::optional<std::pair<Index, Point>> locate(const Point& x) const;

  /// Exact distance to the boundary (not defined on the torus).
  double boundary_distance(const Point& x) const;
  /// Inradius of the domain (largest boundary distance).
  double inradius() const;
  double measure() const;

  /// Node nearest to the domain barycenter.
  Index anchor_node() const;

  /// Even reflection of a grid index into the active grid.
  std::array<int, 2> reflect_index(int i, int j) const;

 private:
  Mesh() = default;
  void finalize();
  bool cell_active(int i, int j) const;

  Shape shape_ = Shape::square;
  int d_ = 2;
  int n_ = 0;
  double h_ = 0.0;
  double length_ = 1.0;
  int extent_ = 0;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 2>> grid_of_node_;
  std::vector<Index> node_of_grid_;
  std::vector<std::array<Index, 4>> cells_;
  std::vector<Point> origins_;
  std::vector<std::array<int, 2>> cell_grid_;
  std::vector<Index> cell_of_grid_;
  std::vector<BoundaryTag> tags_;
  std::vector<Facet> facets_;
};

/// Q1/P1 shape functions and reference gradients at xi.
/// grads[a][k] = d N_a / d xi_k.
void shape_functions(int d, const Point& xi, double* values, double (*grads)[2]);

}  // namespace homlab
