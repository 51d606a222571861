#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homlab/assembly.hpp"
#include "homlab/field.hpp"

namespace homlab {

/// Sparse direct factorization: supernodal Cholesky (CHOLMOD) for SPD
/// systems, LU (UMFPACK) otherwise. One factorization serves many solves.
class DirectSolver {
 public:
  DirectSolver(const SparseMatrix& a, bool spd);
  ~DirectSolver();
  DirectSolver(DirectSolver&&) noexcept;
  DirectSolver& operator=(DirectSolver&&) noexcept;

  /// Solves with iterative refinement; SolverError unless the normwise
  /// backward error ||b - Ax|| / (||A|| ||x|| + ||b||) is <= tol.
  Eigen::VectorXd solve(const Eigen::VectorXd& b, double tol = 1e-10) const;
  bool spd() const noexcept { return spd_; }
  Index size() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  bool spd_;
};

enum class BoundaryKind { dirichlet, neumann };
enum class NullspacePolicy { constants, rigid_modes };

struct BVPSpec {
  Coefficient coefficient;
  /// Oscillation scale of the coefficient; 0 for non-oscillatory data.
  /// When positive the resolution rule h <= eps / 8 is enforced.
  double eps = 0.0;
  SourceFn source;                       ///< F(x); empty means 0
  std::optional<Eigen::VectorXd> nodal_source;  ///< F as nodal values (added to source)
  BoundaryKind boundary = BoundaryKind::dirichlet;
  SourceFn dirichlet;                    ///< f(x); empty means 0
  BoundaryFn neumann;                    ///< g(x, n); empty means 0
  NullspacePolicy nullspace = NullspacePolicy::constants;
  /// Largest relative compatibility defect that is silently projected away.
  double compatibility_tolerance = 1e-2;
};

struct SolveInfo {
  double residual = 0.0;                ///< ||K u - b|| / ||b|| on the free dofs
  double energy = 0.0;                  ///< sqrt(u^T K u)
  double compatibility_before = 0.0;    ///< relative defect of the raw Neumann data
  double compatibility_after = 0.0;     ///< after projection
  double nullspace_defect = 0.0;        ///< max |<u, r_k>_{L2}| over the nullspace basis
  std::string solver;

  nlohmann::json to_json() const;
};

struct Solution {
  FEField u;
  SolveInfo info;
};

/// L2-orthonormal basis of the Neumann nullspace on the mesh: constants per
/// component, or the d(d+1)/2 rigid displacements {Bx + b, B skew}.
std::vector<FEField> nullspace_basis(std::shared_ptr<const Mesh> mesh, int m, NullspacePolicy policy);

/// Rigid displacements, orthonormal in L2.
std::vector<FEField> rigid_basis(std::shared_ptr<const Mesh> mesh);

Solution solve_dirichlet(const BVPSpec& spec, std::shared_ptr<const Mesh> mesh, double tol = 1e-10);
Solution solve_neumann(const BVPSpec& spec, std::shared_ptr<const Mesh> mesh, double tol = 1e-10);
Solution solve_bvp(const BVPSpec& spec, std::shared_ptr<const Mesh> mesh, double tol = 1e-10);

/// Dirichlet problem with a fixed operator and many data sets.
class DirichletOperator {
 public:
  DirichletOperator(std::shared_ptr<const Mesh> mesh, const Coefficient& a, double eps = 0.0);
  Solution solve(const SourceFn& source, const SourceFn& boundary, double tol = 1e-10) const;
  /// Same with an assembled load vector (full dof numbering).
  Solution solve_load(const Eigen::VectorXd& load, const SourceFn& boundary, double tol = 1e-10) const;
  const SparseMatrix& stiffness() const { return k_; }
  const std::shared_ptr<const Mesh>& mesh() const { return mesh_; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  int m_;
  SparseMatrix k_;
  std::vector<Index> free_;   ///< dof -> free index or -1
  std::vector<Index> free_dofs_;
  SparseMatrix kff_;
  std::unique_ptr<DirectSolver> solver_;
};

struct SpectralResult {
  std::vector<double> eigenvalues;  ///< ascending
  std::vector<FEField> modes;       ///< L2-orthonormal
  std::vector<double> residuals;    ///< ||Kx - lambda Mx|| / lambda, x L2-normalized
  double orthonormality_defect = 0.0;
  std::vector<bool> multiplicity;   ///< lambda_k within 1e-8 relative of a neighbour
  std::string method;               ///< "dense" or "lanczos"

  nlohmann::json to_json() const;
};

inline constexpr Index kDenseEigenLimit = 4000;

/// K smallest Dirichlet eigenpairs of (stiffness, mass). Symmetric A only.
SpectralResult solve_eigen_dirichlet(const Coefficient& a, std::shared_ptr<const Mesh> mesh, int k,
                                     double tol = 1e-10, std::uint64_t seed = 1);

/// Restriction of a square matrix to the listed dofs.
SparseMatrix restrict_matrix(const SparseMatrix& a, const std::vector<Index>& keep_index, Index kept);

/// A(x_q / eps) at the stiffness quadrature points, cell-major.
std::vector<CoeffTensor> sample_oscillatory(const CoefficientField& a, double eps, const Mesh& mesh,
                                            int order = 2);

/// Field handed to the solvers: elasticity-class fields are rewritten with
/// mu = kappa1 / 2 for Dirichlet problems (same weak form on H1_0, Legendre
/// and symmetric); Neumann problems keep A and its conormal derivative.
CoefficientField solver_form(const CoefficientField& a, BoundaryKind kind);

/// Resolution rule for oscillatory solves.
void check_resolution(const Mesh& mesh, double eps);

}  // namespace homlab
