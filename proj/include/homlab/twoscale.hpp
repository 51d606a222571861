#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homlab/cell.hpp"
#include "homlab/fem.hpp"

namespace homlab {

/// Discrete mollifier rho_eps on the node lattice of spacing h.
/// Profile exp(-1 / (1 - |2z|^2)) for |z| < 1/2, weights normalized to
/// unit sum; symmetric offsets get bit-identical weights.
struct Mollifier {
  int d = 0;
  double eps = 0.0;
  double h = 0.0;
  std::vector<std::array<int, 2>> offsets;
  std::vector<double> weights;

  static double profile(double z2);
  /// Rejects eps < 2h.
  static Mollifier build(int d, double eps, double h);
  /// Quadrature of the continuous profile minus one (before normalization).
  double mass_defect = 0.0;
};

/// S_eps applied `passes` times to a nodal field. Outside a bounded domain
/// the field is extended by even reflection; on the torus by periodicity.
FEField smooth(const FEField& f, double eps, int passes = 1);

/// Smoothing of a closed-form function sampled at the nodes of `mesh`.
FEField smooth(const FEField::PointFn& f, int m, std::shared_ptr<const Mesh> mesh, double eps, int passes = 1);

/// eta_eps: 1 where dist >= 4 eps, 0 where dist <= 3 eps, cubic smoothstep between.
struct Cutoff {
  std::shared_ptr<const FEField> eta;
  double eps = 0.0;
  /// max |grad eta| * eps over the mesh (target <= 2; the ramp gives 1.5).
  double gradient_constant = 0.0;

  static double ramp(double dist, double eps);
};

/// Requires 8 eps <= diameter and some node with dist >= 4 eps.
Cutoff build_cutoff(std::shared_ptr<const Mesh> mesh, double eps);

/// chi_j^{alpha beta}(y) and its y-gradient; y is any point (periodic).
using CorrectorFn = std::function<void(const Point& y, int j, int beta, double* value, double* grad)>;

CorrectorFn corrector_fn(const CorrectorSet& chi);

/// Dirichlet or Neumann boundary correctors, one m-component field per (j, beta).
struct BoundaryCorrector {
  std::shared_ptr<const Mesh> mesh;
  int d = 0;
  int m = 0;
  double eps = 0.0;
  std::string kind;                ///< "dirichlet" or "neumann"
  std::vector<FEField> columns;    ///< index beta * d + j
  std::vector<double> deviation;   ///< ||Phi - P||_inf (nodal) per column
  std::vector<double> max_gradient;  ///< nodal max of the recovered gradient
  Index anchor = -1;               ///< Neumann normalization node

  const FEField& column(int j, int beta) const { return columns[beta * d + j]; }
  double max_deviation() const;
  /// Phi - P as a field (value and gradient).
  FEField deviation_field(int j, int beta) const;
  nlohmann::json to_json() const;
};

BoundaryCorrector solve_dirichlet_corrector(const CoefficientField& a, double eps, std::shared_ptr<const Mesh> mesh,
                                            double tol = 1e-10);

/// Neumann data n_i ahat_ij^{alpha beta} (conormal of P for the homogenized operator).
BoundaryCorrector solve_neumann_corrector(const CoefficientField& a, const CoeffTensor& ahat, double eps,
                                          std::shared_ptr<const Mesh> mesh, double tol = 1e-10);

enum class Variant { smoothed, plain, dirichlet_corrector };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Nodal gradient of u0 on `mesh` (m*d components, alpha*d + j). Closed-form
/// fields use their exact gradient, FE fields the recovered one.
FEField nodal_gradient(const Field& u0, std::shared_ptr<const Mesh> mesh);

/// Discrepancy w = u_eps - u0 - corr, evaluated on the mesh of the
/// argument fields (u_eps and u0 may live on different meshes).
///   smoothed: corr = eps chi(x/eps) G,  G = eta S_eps^2 (grad u0)
///   plain:    corr = eps chi(x/eps) grad u0
///   dirichlet_corrector: corr = (Phi - P) grad u0
class Expansion : public Field {
 public:
  Expansion(const Field& u_eps, const Field& u0, std::shared_ptr<const Mesh> mesh, CorrectorFn chi, int d, int m,
            double eps, Variant variant, const BoundaryCorrector* phi = nullptr);

  int components() const override { return m_; }
  void eval(const Mesh& mesh, Index cell, const Point& xi, double* value, double* grad) const override;

  /// Correction term alone (for diagnostics).
  void correction(const Mesh& mesh, Index cell, const Point& xi, double* value, double* grad) const;

  Variant variant() const { return variant_; }
  double eps() const { return eps_; }
  const FEField& g() const { return *g_; }
  const std::optional<Cutoff>& cutoff() const { return cutoff_; }
  /// max over boundary nodes of |w|.
  double boundary_max() const;

 private:
  const Field& u_eps_;
  const Field& u0_;
  std::shared_ptr<const Mesh> mesh_;
  CorrectorFn chi_;
  int d_;
  int m_;
  double eps_;
  Variant variant_;
  const BoundaryCorrector* phi_;
  std::optional<Cutoff> cutoff_;
  std::unique_ptr<FEField> g_;
};

}  // namespace homlab
