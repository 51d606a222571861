#include "homlab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace homlab {

std::string to_string(Shape s) {
  switch (s) {
    case Shape::torus: return "torus";
    case Shape::interval: return "interval";
    case Shape::square: return "square";
    case Shape::lshape: return "lshape";
  }
  return "unknown";
}

Shape shape_from_string(const std::string& name) {
  if (name == "torus") return Shape::torus;
  if (name == "interval") return Shape::interval;
  if (name == "square" || name == "unit-square") return Shape::square;
  if (name == "lshape" || name == "L-shape") return Shape::lshape;
  throw ValidationError("unknown domain '" + name + "'");
}

const GaussRule& gauss_rule(int n) {
  static const std::array<GaussRule, 6> rules = [] {
    std::array<GaussRule, 6> r;
    // nodes and weights on [-1,1]
    const std::vector<std::vector<double>> x = {
        {0.0},
        {-0.57735026918962576451, 0.57735026918962576451},
        {-0.77459666924148337704, 0.0, 0.77459666924148337704},
        {-0.86113631159405257522, -0.33998104358485626480, 0.33998104358485626480,
         0.86113631159405257522},
        {-0.90617984593866399280, -0.53846931010568309104, 0.0, 0.53846931010568309104,
         0.90617984593866399280},
        {-0.93246951420315202781, -0.66120938646626451366, -0.23861918608319690863,
         0.23861918608319690863, 0.66120938646626451366, 0.93246951420315202781}};
    const std::vector<std::vector<double>> w = {
        {2.0},
        {1.0, 1.0},
        {0.55555555555555555556, 0.88888888888888888889, 0.55555555555555555556},
        {0.34785484513745385737, 0.65214515486254614263, 0.65214515486254614263,
         0.34785484513745385737},
        {0.23692688505618908751, 0.47862867049936646804, 0.56888888888888888889,
         0.47862867049936646804, 0.23692688505618908751},
        {0.17132449237917034504, 0.36076157304813860757, 0.46791393457269104739,
         0.46791393457269104739, 0.36076157304813860757, 0.17132449237917034504}};
    for (int k = 0; k < 6; ++k) {
      for (std::size_t q = 0; q < x[k].size(); ++q) {
        r[k].points.push_back(0.5 * (x[k][q] + 1.0));
        r[k].weights.push_back(0.5 * w[k][q]);
      }
    }
    return r;
  }();
  if (n < 1 || n > 6) throw ValidationError("Gauss rule order must be in 1..6");
  return rules[n - 1];
}

void shape_functions(int d, const Point& xi, double* values, double (*grads)[2]) {
  if (d == 1) {
    values[0] = 1.0 - xi[0];
    values[1] = xi[0];
    grads[0][0] = -1.0;
    grads[1][0] = 1.0;
    grads[0][1] = grads[1][1] = 0.0;
    return;
  }
  const double x = xi[0];
  const double y = xi[1];
  values[0] = (1.0 - x) * (1.0 - y);
  values[1] = x * (1.0 - y);
  values[2] = (1.0 - x) * y;
  values[3] = x * y;
  grads[0][0] = -(1.0 - y);
  grads[0][1] = -(1.0 - x);
  grads[1][0] = 1.0 - y;
  grads[1][1] = -x;
  grads[2][0] = -y;
  grads[2][1] = 1.0 - x;
  grads[3][0] = y;
  grads[3][1] = x;
}

// ---------------------------------------------------------------------------

Mesh Mesh::torus(int d, int n) {
  if (d < 1 || d > 2) throw ValidationError("torus dimension must be 1 or 2");
  if (n < 2) throw ValidationError("torus needs at least 2 cells per dimension");
  Mesh m;
  m.shape_ = Shape::torus;
  m.d_ = d;
  m.n_ = n;
  m.h_ = 1.0 / n;
  m.extent_ = n;
  m.finalize();
  return m;
}

Mesh Mesh::interval(int n, double length) {
  if (n < 1 || !(length > 0.0)) throw ValidationError("interval mesh needs n >= 1, length > 0");
  Mesh m;
  m.shape_ = Shape::interval;
  m.d_ = 1;
  m.n_ = n;
  m.length_ = length;
  m.h_ = length / n;
  m.extent_ = n + 1;
  m.finalize();
  return m;
}

Mesh Mesh::square(int n, double length) {
  if (n < 1 || !(length > 0.0)) throw ValidationError("square mesh needs n >= 1, length > 0");
  Mesh m;
  m.shape_ = Shape::square;
  m.d_ = 2;
  m.n_ = n;
  m.length_ = length;
  m.h_ = length / n;
  m.extent_ = n + 1;
  m.finalize();
  return m;
}

Mesh Mesh::lshape(int n) {
  if (n < 2 || n % 2 != 0) throw ValidationError("L-shape mesh needs an even n >= 2");
  Mesh m;
  m.shape_ = Shape::lshape;
  m.d_ = 2;
  m.n_ = n;
  m.h_ = 1.0 / n;
  m.extent_ = n + 1;
  m.finalize();
  return m;
}

Mesh Mesh::make(Shape shape, int d, int n) {
  switch (shape) {
    case Shape::torus: return torus(d, n);
    case Shape::interval: return interval(n);
    case Shape::square: return square(n);
    case Shape::lshape: return lshape(n);
  }
  throw ValidationError("unknown shape");
}

bool Mesh::cell_active(int i, int j) const {
  if (shape_ == Shape::torus) return true;
  if (i < 0 || i >= n_) return false;
  if (d_ == 1) return j == 0;
  if (j < 0 || j >= n_) return false;
  if (shape_ == Shape::lshape) return !(i >= n_ / 2 && j >= n_ / 2);
  return true;
}

void Mesh::finalize() {
  const int ey = d_ == 1 ? 1 : extent_;
  const int cy = d_ == 1 ? 1 : n_;
  node_of_grid_.assign(static_cast<std::size_t>(extent_) * ey, -1);
  cell_of_grid_.assign(static_cast<std::size_t>(n_) * cy, -1);

  // active nodes: corners of active cells, numbered in grid order
  std::vector<char> active(node_of_grid_.size(), 0);
  for (int j = 0; j < cy; ++j) {
    for (int i = 0; i < n_; ++i) {
      if (!cell_active(i, j)) continue;
      for (int b = 0; b < (d_ == 1 ? 1 : 2); ++b)
        for (int a = 0; a < 2; ++a) {
          int ii = i + a;
          int jj = j + b;
          if (periodic()) {
            ii %= extent_;
            jj %= ey;
          }
          active[static_cast<std::size_t>(jj) * extent_ + ii] = 1;
        }
    }
  }
  for (int j = 0; j < ey; ++j) {
    for (int i = 0; i < extent_; ++i) {
      const std::size_t g = static_cast<std::size_t>(j) * extent_ + i;
      if (!active[g]) continue;
      node_of_grid_[g] = static_cast<Index>(nodes_.size());
      nodes_.push_back({i * h_, d_ == 1 ? 0.0 : j * h_});
      grid_of_node_.push_back({i, j});
    }
  }
  for (int j = 0; j < cy; ++j) {
    for (int i = 0; i < n_; ++i) {
      if (!cell_active(i, j)) continue;
      std::array<Index, 4> c{-1, -1, -1, -1};
      if (d_ == 1) {
        c[0] = node_at(i);
        c[1] = node_at(i + 1);
      } else {
        c[0] = node_at(i, j);
        c[1] = node_at(i + 1, j);
        c[2] = node_at(i, j + 1);
        c[3] = node_at(i + 1, j + 1);
      }
      cell_of_grid_[static_cast<std::size_t>(j) * n_ + i] = static_cast<Index>(cells_.size());
      cells_.push_back(c);
      origins_.push_back({i * h_, d_ == 1 ? 0.0 : j * h_});
      cell_grid_.push_back({i, j});
    }
  }

  tags_.assign(nodes_.size(), BoundaryTag::interior);
  if (periodic()) return;

  // facets: cell sides without an active neighbour
  std::vector<int> normal_mask(nodes_.size(), 0);
  for (Index c = 0; c < num_cells(); ++c) {
    const auto [i, j] = cell_grid_[c];
    if (d_ == 1) {
      if (!cell_active(i - 1, 0)) facets_.push_back({c, 0, {-1.0, 0.0}, 1.0});
      if (!cell_active(i + 1, 0)) facets_.push_back({c, 1, {1.0, 0.0}, 1.0});
      continue;
    }
    if (!cell_active(i - 1, j)) facets_.push_back({c, 0, {-1.0, 0.0}, h_});
    if (!cell_active(i + 1, j)) facets_.push_back({c, 1, {1.0, 0.0}, h_});
    if (!cell_active(i, j - 1)) facets_.push_back({c, 2, {0.0, -1.0}, h_});
    if (!cell_active(i, j + 1)) facets_.push_back({c, 3, {0.0, 1.0}, h_});
  }
  static constexpr int kSideNodes[4][2] = {{0, 2}, {1, 3}, {0, 1}, {2, 3}};
  for (const Facet& f : facets_) {
    const int bit = 1 << f.side;
    if (d_ == 1) {
      normal_mask[cells_[f.cell][f.side]] |= bit;
      continue;
    }
    for (int a : kSideNodes[f.side]) normal_mask[cells_[f.cell][a]] |= bit;
  }
  for (Index k = 0; k < num_nodes(); ++k) {
    const int mask = normal_mask[k];
    if (mask == 0) continue;
    const bool x_side = (mask & 3) != 0;
    const bool y_side = (mask & 12) != 0;
    tags_[k] = (x_side && y_side) ? BoundaryTag::corner : BoundaryTag::edge;
    if (shape_ == Shape::lshape) {
      const auto [i, j] = grid_of_node_[k];
      if (i == n_ / 2 && j == n_ / 2) tags_[k] = BoundaryTag::reentrant;
    }
  }
}

Index Mesh::node_at(int i, int j) const {
  if (periodic()) {
    i = ((i % extent_) + extent_) % extent_;
    j = d_ == 1 ? 0 : ((j % extent_) + extent_) % extent_;
  } else if (i < 0 || i >= extent_ || j < 0 || j >= (d_ == 1 ? 1 : extent_)) {
    return -1;
  }
  return node_of_grid_[static_cast<std::size_t>(j) * extent_ + i];
}

std::vector<Index> Mesh::boundary_nodes() const {
  std::vector<Index> out;
  for (Index k = 0; k < num_nodes(); ++k) {
    if (on_boundary(k)) out.push_back(k);
  }
  return out;
}

Point Mesh::map(Index c, const Point& xi) const {
  const Point& o = origins_[c];
  return {o[0] + h_ * xi[0], d_ == 1 ? 0.0 : o[1] + h_ * xi[1]};
}

std::optional<std::pair<Index, Point>> Mesh::locate(const Point& x) const {
  Point y = x;
  if (periodic()) {
    for (int k = 0; k < d_; ++k) y[k] -= std::floor(y[k]);
  }
  std::array<int, 2> ij{0, 0};
  Point xi{0.0, 0.0};
  const double lim = periodic() ? 1.0 : length_;
  for (int k = 0; k < d_; ++k) {
    if (!periodic() && (y[k] < -1e-12 * lim || y[k] > lim * (1.0 + 1e-12))) return std::nullopt;
    int i = static_cast<int>(std::floor(y[k] / h_));
    i = std::clamp(i, 0, n_ - 1);
    ij[k] = i;
    xi[k] = std::clamp(y[k] / h_ - i, 0.0, 1.0);
  }
  if (!cell_active(ij[0], ij[1])) {
    // points on the reentrant edges belong to the neighbouring active cell
    if (shape_ == Shape::lshape) {
      if (xi[0] <= 1e-12 && cell_active(ij[0] - 1, ij[1])) {
        ij[0] -= 1;
        xi[0] = 1.0;
      } else if (xi[1] <= 1e-12 && cell_active(ij[0], ij[1] - 1)) {
        ij[1] -= 1;
        xi[1] = 1.0;
      } else {
        return std::nullopt;
      }
    } else {
      return std::nullopt;
    }
  }
  const Index c = cell_of_grid_[static_cast<std::size_t>(d_ == 1 ? 0 : ij[1]) * n_ + ij[0]];
  return std::make_pair(c, xi);
}

double Mesh::boundary_distance(const Point& x) const {
  switch (shape_) {
    case Shape::torus: throw ValidationError("boundary distance is undefined on the torus");
    case Shape::interval: return std::max(0.0, std::min(x[0], length_ - x[0]));
    case Shape::square:
      return std::max(0.0, std::min({x[0], x[1], length_ - x[0], length_ - x[1]}));
    case Shape::lshape: {
      const double dx = std::max(0.5 - x[0], 0.0);
      const double dy = std::max(0.5 - x[1], 0.0);
      const double to_notch = std::hypot(dx, dy);
      return std::max(0.0, std::min({x[0], x[1], 1.0 - x[0], 1.0 - x[1], to_notch}));
    }
  }
  return 0.0;
}

double Mesh::inradius() const {
  switch (shape_) {
    case Shape::torus: return std::numeric_limits<double>::infinity();
    case Shape::interval:
    case Shape::square: return 0.5 * length_;
    case Shape::lshape: return 1.0 - std::sqrt(0.5);
  }
  return 0.0;
}

double Mesh::measure() const {
  switch (shape_) {
    case Shape::torus: return 1.0;
    case Shape::interval: return length_;
    case Shape::square: return length_ * length_;
    case Shape::lshape: return 0.75;
  }
  return 0.0;
}

Index Mesh::anchor_node() const {
  Point b{0.5 * length_, d_ == 1 ? 0.0 : 0.5 * length_};
  if (shape_ == Shape::lshape) b = {5.0 / 12.0, 5.0 / 12.0};
  if (periodic()) b = {0.0, 0.0};
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < num_nodes(); ++k) {
    const double dd = std::hypot(nodes_[k][0] - b[0], nodes_[k][1] - b[1]);
    if (dd < best_d - 1e-14) {
      best_d = dd;
      best = k;
    }
  }
  return best;
}

std::array<int, 2> Mesh::reflect_index(int i, int j) const {
  if (periodic()) {
    return {((i % extent_) + extent_) % extent_,
            d_ == 1 ? 0 : ((j % extent_) + extent_) % extent_};
  }
  const int n = extent_ - 1;
  auto fold = [n](int v) {
    // repeated reflection for offsets larger than the domain
    const int period = 2 * n;
    v = ((v % period) + period) % period;
    return v > n ? period - v : v;
  };
  i = fold(i);
  if (d_ == 1) return {i, 0};
  j = fold(j);
  if (shape_ == Shape::lshape) {
    const int c = n / 2;
    if (i > c && j > c) {
      if (i - c <= j - c) {
        i = n - i;
      } else {
        j = n - j;
      }
    }
  }
  return {i, j};
}

}  // namespace homlab
