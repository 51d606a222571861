#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homlab/common.hpp"

namespace homlab {

////////////////////////////////////////////////////////////////////////////////
/// Fourth-order coefficient tensor a_ij^{alpha beta} with 1 <= i, j <= d and
/// 1 <= alpha, beta <= m (zero-based in code).
///
/// Stored as the (d*m) x (d*m) matrix Q with row (alpha, i) and column
/// (beta, j), flattened as r = alpha * d + i. The quadratic form a xi xi with
/// xi_i^alpha laid out the same way is then xi^T Q xi.
////////////////////////////////////////////////////////////////////////////////
class CoeffTensor {
 public:
  CoeffTensor() = default;
  CoeffTensor(int d, int m);

  /// a_ij^{ab} = scale * delta_ij delta_ab.
  static CoeffTensor identity(int d, int m, double scale = 1.0);

  int dim() const noexcept { return d_; }
  int components() const noexcept { return m_; }
  int size() const noexcept { return d_ * m_; }

  double& operator()(int i, int j, int alpha, int beta) {
    return data_[flat_index(i, j, alpha, beta)];
  }
  double operator()(int i, int j, int alpha, int beta) const {
    return data_[flat_index(i, j, alpha, beta)];
  }

  double& flat(int row, int col) { return data_[row * size() + col]; }
  double flat(int row, int col) const { return data_[row * size() + col]; }

  /// a*_ij^{ab} = a_ji^{ba}.
  CoeffTensor adjoint() const;

  Eigen::MatrixXd matrix() const;
  static CoeffTensor from_matrix(int d, int m, const Eigen::MatrixXd& q);

  double max_abs() const;
  double max_abs_diff(const CoeffTensor& other) const;
  bool is_finite() const;

  CoeffTensor& operator+=(const CoeffTensor& other);
  CoeffTensor& operator*=(double s);
  friend CoeffTensor operator+(CoeffTensor a, const CoeffTensor& b) { return a += b; }
  friend CoeffTensor operator-(CoeffTensor a, const CoeffTensor& b) {
    CoeffTensor nb = b;
    nb *= -1.0;
    return a += nb;
  }
  friend CoeffTensor operator*(double s, CoeffTensor a) { return a *= s; }

  bool operator==(const CoeffTensor&) const = default;

 private:
  int flat_index(int i, int j, int alpha, int beta) const noexcept {
    return (alpha * d_ + i) * size() + beta * d_ + j;
  }

  int d_ = 0;
  int m_ = 0;
  std::array<double, 16> data_{};
};

enum class Smoothness { constant, smooth_periodic, piecewise_constant };

/// Ellipticity class advertised by a coefficient family.
enum class EllipticityClass { legendre, legendre_hadamard, elasticity };

std::string to_string(Smoothness s);
std::string to_string(EllipticityClass c);

/// 1-periodic coefficient field A(y) on R^d.
///
/// The evaluator only ever sees y in [0,1)^d; reduction modulo the lattice
/// happens in operator(). Evaluators must be pure so a field can be shared
/// between concurrent solves.
class CoefficientField {
 public:
  using Evaluator = std::function<CoeffTensor(const Point& y)>;

  CoefficientField(std::string name, int d, int m, Evaluator evaluator,
                   Smoothness smoothness, bool symmetric,
                   EllipticityClass ellipticity_class);

  CoeffTensor operator()(const Point& y) const;

  const std::string& name() const noexcept { return name_; }
  int dim() const noexcept { return d_; }
  int components() const noexcept { return m_; }
  Smoothness smoothness() const noexcept { return smoothness_; }
  bool symmetric() const noexcept { return symmetric_; }
  EllipticityClass ellipticity_class() const noexcept { return class_; }

  /// Free-form tags (e.g. Hoelder or VMO hypotheses); carried, never checked.
  std::vector<std::string> tags;

 private:
  std::string name_;
  int d_;
  int m_;
  Evaluator evaluator_;
  Smoothness smoothness_;
  bool symmetric_;
  EllipticityClass class_;
};

/// Reduce y componentwise into [0,1).
Point reduce_periodic(const Point& y, int d);

struct EllipticityReport {
  double legendre = 0.0;           ///< min aξξ/|ξ|² over all ξ
  double legendre_hadamard = 0.0;  ///< min over rank-one ξ = η ⊗ ζ
  std::optional<double> kappa1;    ///< min over symmetric ξ (m == d only)
  std::optional<double> kappa2;    ///< max over symmetric ξ (m == d only)
  double upper_bound = 0.0;        ///< max spectral norm of Q
  bool legendre_pass = false;
  bool legendre_hadamard_pass = false;
  bool elasticity_pass = false;
  bool symmetric = false;  ///< a_ij^{ab} = a_ji^{ba} at every sample
  int samples = 0;

  nlohmann::json to_json() const;
};

/// Strict positivity threshold used by every pass flag.
inline constexpr double kEllipticityTolerance = 1e-12;

/// Certify ellipticity constants by sampling y on the grid k / density.
/// Throws ValidationError on a non-finite coefficient.
EllipticityReport check_ellipticity(const CoefficientField& a, int sample_density);

/// Constants of a single tensor.
EllipticityReport check_ellipticity(const CoeffTensor& a);

CoefficientField adjoint(const CoefficientField& a);

/// ã_ij^{ab} = a_ij^{ab} + mu δ_ia δ_jb − mu δ_ib δ_ja, Legendre with constant
/// mu whenever A ∈ E(κ₁, κ₂) and mu <= κ₁/2.
CoefficientField elasticity_rewrite(const CoefficientField& a, double mu);
CoeffTensor elasticity_rewrite(const CoeffTensor& a, double mu);

/// Names accepted by builtin_family.
const std::vector<std::string>& builtin_family_names();

/// Construct a built-in family from a JSON object of parameters.
///
/// Families and parameters (defaults in brackets):
///   constant                       d [2], m [1], value [1] (scalar => value*I,
///                                  or (dm)^2 row-major entries of Q)
///   scalar-1d-cos                  base [2], amp [1], shift [0]
///   laminate-2d                    base [2], amp [1], shift [0]; A = a(y1) I
///   checkerboard-2d                alpha [1], beta [4]
///   smooth-matrix-2d               base [3], amp [1], coupling [0.5], skew [0]
///   elasticity-isotropic-periodic  lambda [1], mu [1], lambda_amp [0], mu_amp [0]
CoefficientField builtin_family(const std::string& name, const nlohmann::json& params);

/// Isotropic elasticity tensor λ δ_iα δ_jβ + μ (δ_ij δ_αβ + δ_iβ δ_jα), d = m = 2.
CoeffTensor isotropic_elasticity(double lambda, double mu);

}  // namespace homlab
