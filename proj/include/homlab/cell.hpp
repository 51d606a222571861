#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homlab/coeff.hpp"
#include "homlab/field.hpp"
#include "homlab/krylov.hpp"
#include "homlab/mesh.hpp"

namespace homlab {

struct CellOptions {
  double tol = 1e-10;  ///< relative residual, within [1e-14, 1e-6]
  int max_iter = 0;    ///< 0: 50 * N
  int jobs = 1;        ///< concurrent corrector columns
};

/// Correctors chi_j^beta on the unit torus; column index c = beta * d + j.
/// Each column is an m-component nodal field (component alpha = chi_j^{alpha beta}).
class CorrectorSet {
 public:
  std::shared_ptr<const Mesh> grid;
  int d = 0;
  int m = 0;
  double tol = 0.0;
  std::string coefficient_name;
  std::vector<FEField> columns;
  std::vector<double> residuals;
  std::vector<int> iterations;
  /// grad[(((cell * nq + q) * d*m + col) * m + alpha) * d + k], 2x2 Gauss points.
  std::vector<double> quad_grad;

  int N() const { return grid->cells_per_side(); }
  int quad_points() const { return d == 1 ? 2 : 4; }
  const FEField& chi(int j, int beta) const { return columns[beta * d + j]; }
  double grad(Index cell, int q, int j, int beta, int alpha, int k) const;

  /// Periodic interpolation chi_j^{alpha beta}(y) and its y-gradient.
  void eval(const Point& y, int j, int beta, double* value, double* grad) const;
};

/// Solve the periodic cell problems a(chi_j^beta, psi) = -a(P_j^beta, psi)
/// on the N^d torus with Q1/P1 elements and 2x2 Gauss quadrature.
CorrectorSet solve_correctors(const CoefficientField& a, int n, const CellOptions& opt = {});

/// solve_correctors applied to adjoint(A).
CorrectorSet adjoint_correctors(const CoefficientField& a, int n, const CellOptions& opt = {});

struct HomogenizedTensor {
  CoeffTensor value;  ///< Galerkin value on the N grid
  /// (4 A_N - A_{N/2}) / 3 for smooth families (second-order error removed).
  std::optional<CoeffTensor> extrapolated;
  int N = 0;
  double tol = 0.0;
  double symmetry_defect = 0.0;  ///< max |a_ij^{ab} - a_ji^{ba}|
  EllipticityReport certificate;

  const CoeffTensor& best() const { return extrapolated ? *extrapolated : value; }
  nlohmann::json to_json() const;
};

/// Quadrature of a + a grad(chi) over Y with the stiffness rule.
HomogenizedTensor homogenized_tensor(const CoefficientField& a, const CorrectorSet& chi);

/// Correctors on N and N/2 plus the extrapolated tensor when A is smooth.
HomogenizedTensor effective_tensor(const CoefficientField& a, int n, const CellOptions& opt = {});

/// Flux discrepancy B and flux correctors phi on the torus.
struct FluxData {
  std::shared_ptr<const Mesh> grid;
  int d = 0;
  int m = 0;
  /// Cell averages of a + a grad(chi) - A_hat; b[cell * (dm)^2 + flat(alpha i, beta j)].
  std::vector<double> b;
  double mean_defect = 0.0;         ///< max_ij |mean of b_ij^{ab}|
  double weak_divergence = 0.0;     ///< relative Galerkin residual of the fluxes
  /// f_ij^{ab}: nodal, index (flat(alpha i, beta j)) -> field of 1 component.
  std::vector<FEField> f;
  /// phi_kij^{ab} nodal: phi[((k * d + i) * d + j) * m*m + alpha * m + beta] -> N^d values.
  std::vector<Eigen::VectorXd> phi;
  std::vector<double> poisson_residuals;

  int flat(int i, int j, int alpha, int beta) const { return (alpha * d + i) * d * m + beta * d + j; }
  double b_at(Index cell, int i, int j, int alpha, int beta) const {
    return b[cell * d * m * d * m + flat(i, j, alpha, beta)];
  }
  const Eigen::VectorXd& phi_at(int k, int i, int j, int alpha, int beta) const {
    return phi[((k * d + i) * d + j) * m * m + alpha * m + beta];
  }

  /// max over nodes and indices of |phi_kij + phi_ikj|.
  double antisymmetry_defect() const;
  /// max_{ij ab} || sum_k d_k phi_kij - b_ij ||_{L2(Y)}.
  double reconstruction_error() const;
  double max_abs_b() const;
};

FluxData flux_field(const CoefficientField& a, const CorrectorSet& chi, const HomogenizedTensor& ahat);

/// Solve Laplace f_ij = b_ij (mean zero) and set phi_kij = D_k f_ij - D_i f_kj
/// with central differences, which is antisymmetric to the last bit.
void flux_correctors(FluxData& data, double tol = 1e-10, int jobs = 1);

/// Write every corrector column and B/phi component as grid-files into dir.
void export_correctors(const CorrectorSet& chi, const std::string& dir);
void export_flux(const FluxData& data, const std::string& dir);

}  // namespace homlab
