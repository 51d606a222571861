#pragma once

#include <Eigen/Sparse>

#include <functional>

#include "homlab/coeff.hpp"
#include "homlab/krylov.hpp"
#include "homlab/mesh.hpp"

namespace homlab {

/// Coefficient tensor as a function of the physical point x.
struct Coefficient {
  int d = 0;
  int m = 0;
  std::function<CoeffTensor(const Point& x)> at;
  bool symmetric = false;
  bool constant = false;

  /// x -> A(x / eps).
  static Coefficient oscillatory(const CoefficientField& a, double eps);
  static Coefficient constant_tensor(const CoeffTensor& t);
};

/// Source term F(x) -> m values.
using SourceFn = std::function<void(const Point& x, double* out)>;
/// Divergence-form data G(x) -> m*d values (alpha*d + i).
using FluxFn = std::function<void(const Point& x, double* out)>;
/// Boundary data g(x, outward normal) -> m values.
using BoundaryFn = std::function<void(const Point& x, const Point& normal, double* out)>;

/// Zero matrix with the Q1 connectivity of the mesh, m dofs per node
/// (dof = node * m + alpha).
SparseMatrix sparsity_pattern(const Mesh& mesh, int m);

/// K[(a,alpha),(b,beta)] = sum_q w_q a_ij^{alpha beta}(x_q) d_i N_a d_j N_b.
SparseMatrix assemble_stiffness(const Mesh& mesh, const Coefficient& a, int order = 2);

/// Consistent mass matrix (exact for Q1 products), block-diagonal in alpha.
SparseMatrix assemble_mass(const Mesh& mesh, int m);

/// b[(a,alpha)] = int F^alpha N_a.
Eigen::VectorXd assemble_source(const Mesh& mesh, int m, const SourceFn& f, int order = 3);

/// b[(a,alpha)] = int G_i^alpha d_i N_a.
Eigen::VectorXd assemble_flux(const Mesh& mesh, int m, const FluxFn& g, int order = 3);

/// b[(a,alpha)] = int_{boundary} g^alpha N_a.
Eigen::VectorXd assemble_boundary(const Mesh& mesh, int m, const BoundaryFn& g, int order = 3);

}  // namespace homlab
