#pragma once

#include <functional>
#include <vector>

#include "homlab/common.hpp"

// Closed-form and quadrature oracles for the 1D cosine family
// a(y) = base + amp cos(2 pi y).
namespace homlab::oned {

struct CosineCoefficient {
  double base = 2.0;
  double amp = 1.0;

  double a(double y) const;
  /// Harmonic mean sqrt(base^2 - amp^2).
  double ahat() const;
  /// int_0^y ds / a(s) in closed form, any real y.
  double inv_integral(double y) const;
  /// Mean-zero corrector: chi' = ahat / a - 1.
  double chi(double y) const;
  double dchi(double y) const;
};

/// x -> int_0^x g(s) ds for g oscillating on scale eps: cumulative table
/// every eps/64 with 5-point Gauss panels.
class Primitive {
 public:
  Primitive(std::function<double(double)> g, double eps, double length = 1.0);
  double operator()(double x) const;

 private:
  double panel(double lo, double hi) const;
  std::function<double(double)> g_;
  double step_;
  std::vector<double> table_;
};

/// -(a(x/eps) u')' = 1 on (0, 1), u(0) = u(1) = 0.
class DirichletUnitLoad {
 public:
  DirichletUnitLoad(CosineCoefficient a, double eps);
  double u(double x) const;
  double du(double x) const;
  /// Homogenized solution x (1 - x) / (2 ahat) and its derivative.
  double u0(double x) const;
  double du0(double x) const;

 private:
  CosineCoefficient a_;
  double eps_;
  double c1_;
  Primitive j1_;
};

/// -(a(x/eps) u')' = cos(2 pi x), u'(0) = u'(1) = 0, mean zero.
class NeumannCosineLoad {
 public:
  NeumannCosineLoad(CosineCoefficient a, double eps);
  double u(double x) const;
  double du(double x) const;
  double u0(double x) const;
  double du0(double x) const;

 private:
  CosineCoefficient a_;
  double eps_;
  Primitive prim_;
  double mean_;
};

/// Dirichlet corrector Phi(x) = int_0^x 1/a(s/eps) / int_0^1 1/a(s/eps).
double dirichlet_corrector(const CosineCoefficient& a, double eps, double x);
double dirichlet_corrector_derivative(const CosineCoefficient& a, double eps, double x);

/// Neumann corrector with Psi' = ahat / a(x/eps), Psi(x0) = x0.
double neumann_corrector(const CosineCoefficient& a, double eps, double x, double x0);

}  // namespace homlab::oned
