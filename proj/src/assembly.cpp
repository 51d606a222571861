#include "homlab/assembly.hpp"

#include <algorithm>
#include <vector>

namespace homlab {

Coefficient Coefficient::oscillatory(const CoefficientField& a, double eps) {
  if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
  Coefficient c;
  c.d = a.dim();
  c.m = a.components();
  c.symmetric = a.symmetric();
  c.constant = a.smoothness() == Smoothness::constant;
  c.at = [a, eps](const Point& x) { return a({x[0] / eps, x[1] / eps}); };
  return c;
}

Coefficient Coefficient::constant_tensor(const CoeffTensor& t) {
  Coefficient c;
  c.d = t.dim();
  c.m = t.components();
  c.symmetric = check_ellipticity(t).symmetric;
  c.constant = true;
  c.at = [t](const Point&) { return t; };
  return c;
}

SparseMatrix sparsity_pattern(const Mesh& mesh, int m) {
  const Index nn = mesh.num_nodes();
  const int npc = mesh.nodes_per_cell();
  // node -> cells (CSR)
  std::vector<Index> start(nn + 1, 0);
  for (Index c = 0; c < mesh.num_cells(); ++c)
    for (int a = 0; a < npc; ++a) ++start[mesh.cell_nodes(c)[a] + 1];
  for (Index k = 0; k < nn; ++k) start[k + 1] += start[k];
  std::vector<Index> fill(start.begin(), start.end() - 1);
  std::vector<Index> cells_of(start[nn]);
  for (Index c = 0; c < mesh.num_cells(); ++c)
    for (int a = 0; a < npc; ++a) cells_of[fill[mesh.cell_nodes(c)[a]]++] = c;

  const Index ndof = nn * m;
  SparseMatrix k(ndof, ndof);
  std::vector<int> outer(ndof + 1, 0);
  std::vector<int> inner;
  inner.reserve(static_cast<std::size_t>(ndof) * (npc == 4 ? 9 : 3) * m);
  std::vector<Index> nbrs;
  for (Index node = 0; node < nn; ++node) {
    nbrs.clear();
    for (Index s = start[node]; s < start[node + 1]; ++s) {
      const auto& cn = mesh.cell_nodes(cells_of[s]);
      for (int a = 0; a < npc; ++a) nbrs.push_back(cn[a]);
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    for (int beta = 0; beta < m; ++beta) {
      const Index col = node * m + beta;
      for (Index nb : nbrs)
        for (int alpha = 0; alpha < m; ++alpha) inner.push_back(static_cast<int>(nb * m + alpha));
      outer[col + 1] = static_cast<int>(inner.size());
    }
  }
  k.resizeNonZeros(static_cast<Index>(inner.size()));
  std::copy(outer.begin(), outer.end(), k.outerIndexPtr());
  std::copy(inner.begin(), inner.end(), k.innerIndexPtr());
  std::fill(k.valuePtr(), k.valuePtr() + inner.size(), 0.0);
  return k;
}

namespace {

double& entry(SparseMatrix& k, Index row, Index col) {
  const int* begin = k.innerIndexPtr() + k.outerIndexPtr()[col];
  const int* end = k.innerIndexPtr() + k.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(begin, end, static_cast<int>(row));
  return k.valuePtr()[it - k.innerIndexPtr()];
}

struct QuadPoint {
  Point xi;
  double w;
  double n[4];
  double g[4][2];
};

std::vector<QuadPoint> cell_rule(int d, int order) {
  const GaussRule& r = gauss_rule(order);
  const int nq = static_cast<int>(r.points.size());
  std::vector<QuadPoint> out;
  for (int qy = 0; qy < (d == 1 ? 1 : nq); ++qy) {
    for (int qx = 0; qx < nq; ++qx) {
      QuadPoint p;
      p.xi = {r.points[qx], d == 1 ? 0.0 : r.points[qy]};
      p.w = r.weights[qx] * (d == 1 ? 1.0 : r.weights[qy]);
      shape_functions(d, p.xi, p.n, p.g);
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

SparseMatrix assemble_stiffness(const Mesh& mesh, const Coefficient& a, int order) {
  const int d = mesh.dim();
  const int m = a.m;
  if (a.d != d) throw ValidationError("coefficient and mesh dimensions differ");
  SparseMatrix k = sparsity_pattern(mesh, m);
  const int npc = mesh.nodes_per_cell();
  const auto rule = cell_rule(d, order);
  const double h = mesh.h();
  // physical gradient d_i N_a = g/h, measure h^d: factor h^(d-2)
  const double scale = d == 1 ? 1.0 / h : 1.0;
  const int nloc = npc * m;
  std::vector<double> local(static_cast<std::size_t>(nloc) * nloc);
  CoeffTensor t;
  const bool constant = a.constant;
  if (constant) t = a.at({0.0, 0.0});
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    std::fill(local.begin(), local.end(), 0.0);
    for (const QuadPoint& q : rule) {
      if (!constant) t = a.at(mesh.map(c, q.xi));
      for (int al = 0; al < m; ++al)
        for (int be = 0; be < m; ++be)
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
              const double coef = q.w * t(i, j, al, be);
              if (coef == 0.0) continue;
              for (int pa = 0; pa < npc; ++pa) {
                const double gi = coef * q.g[pa][i];
                double* row = &local[static_cast<std::size_t>(pa * m + al) * nloc];
                for (int pb = 0; pb < npc; ++pb) row[pb * m + be] += gi * q.g[pb][j];
              }
            }
    }
    const auto& nodes = mesh.cell_nodes(c);
    for (int pb = 0; pb < npc; ++pb)
      for (int be = 0; be < m; ++be) {
        const Index col = nodes[pb] * m + be;
        const int* begin = k.innerIndexPtr() + k.outerIndexPtr()[col];
        const int* end = k.innerIndexPtr() + k.outerIndexPtr()[col + 1];
        for (int pa = 0; pa < npc; ++pa)
          for (int al = 0; al < m; ++al) {
            const int row = static_cast<int>(nodes[pa] * m + al);
            const int* it = std::lower_bound(begin, end, row);
            k.valuePtr()[it - k.innerIndexPtr()] +=
                scale * local[static_cast<std::size_t>(pa * m + al) * nloc + pb * m + be];
          }
      }
  }
  return k;
}

SparseMatrix assemble_mass(const Mesh& mesh, int m) {
  const int d = mesh.dim();
  SparseMatrix k = sparsity_pattern(mesh, m);
  const int npc = mesh.nodes_per_cell();
  const auto rule = cell_rule(d, 2);
  const double meas = d == 1 ? mesh.h() : mesh.h() * mesh.h();
  double local[4][4] = {};
  for (const QuadPoint& q : rule)
    for (int a = 0; a < npc; ++a)
      for (int b = 0; b < npc; ++b) local[a][b] += q.w * q.n[a] * q.n[b] * meas;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& nodes = mesh.cell_nodes(c);
    for (int a = 0; a < npc; ++a)
      for (int b = 0; b < npc; ++b)
        for (int al = 0; al < m; ++al) entry(k, nodes[a] * m + al, nodes[b] * m + al) += local[a][b];
  }
  k.prune(0.0);
  return k;
}

Eigen::VectorXd assemble_source(const Mesh& mesh, int m, const SourceFn& f, int order) {
  const int d = mesh.dim();
  const int npc = mesh.nodes_per_cell();
  const auto rule = cell_rule(d, order);
  const double meas = d == 1 ? mesh.h() : mesh.h() * mesh.h();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_nodes() * m);
  std::vector<double> v(m);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& nodes = mesh.cell_nodes(c);
    for (const QuadPoint& q : rule) {
      f(mesh.map(c, q.xi), v.data());
      for (int a = 0; a < npc; ++a)
        for (int al = 0; al < m; ++al) b[nodes[a] * m + al] += q.w * meas * v[al] * q.n[a];
    }
  }
  return b;
}

Eigen::VectorXd assemble_flux(const Mesh& mesh, int m, const FluxFn& g, int order) {
  const int d = mesh.dim();
  const int npc = mesh.nodes_per_cell();
  const auto rule = cell_rule(d, order);
  const double scale = d == 1 ? 1.0 : mesh.h();  // h^d / h
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_nodes() * m);
  std::vector<double> v(m * d);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& nodes = mesh.cell_nodes(c);
    for (const QuadPoint& q : rule) {
      g(mesh.map(c, q.xi), v.data());
      for (int a = 0; a < npc; ++a)
        for (int al = 0; al < m; ++al) {
          double s = 0.0;
          for (int i = 0; i < d; ++i) s += v[al * d + i] * q.g[a][i];
          b[nodes[a] * m + al] += q.w * scale * s;
        }
    }
  }
  return b;
}

Eigen::VectorXd assemble_boundary(const Mesh& mesh, int m, const BoundaryFn& g, int order) {
  if (mesh.periodic()) throw ValidationError("the torus has no boundary");
  const int d = mesh.dim();
  const GaussRule& rule = gauss_rule(order);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_nodes() * m);
  std::vector<double> v(m);
  static constexpr int kSideNodes[4][2] = {{0, 2}, {1, 3}, {0, 1}, {2, 3}};
  for (const Mesh::Facet& f : mesh.facets()) {
    const auto& nodes = mesh.cell_nodes(f.cell);
    if (d == 1) {
      const Index node = nodes[f.side];
      g(mesh.node(node), f.normal, v.data());
      for (int al = 0; al < m; ++al) b[node * m + al] += v[al];
      continue;
    }
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double t = rule.points[q];
      Point xi;
      switch (f.side) {
        case 0: xi = {0.0, t}; break;
        case 1: xi = {1.0, t}; break;
        case 2: xi = {t, 0.0}; break;
        default: xi = {t, 1.0}; break;
      }
      g(mesh.map(f.cell, xi), f.normal, v.data());
      const double w = rule.weights[q] * f.length;
      const Index n0 = nodes[kSideNodes[f.side][0]];
      const Index n1 = nodes[kSideNodes[f.side][1]];
      for (int al = 0; al < m; ++al) {
        b[n0 * m + al] += w * (1.0 - t) * v[al];
        b[n1 * m + al] += w * t * v[al];
      }
    }
  }
  return b;
}

}  // namespace homlab
