#include "homlab/oned.hpp"

#include <cmath>

#include "homlab/mesh.hpp"

namespace homlab::oned {

double CosineCoefficient::a(double y) const { return base + amp * std::cos(2.0 * kPi * y); }

double CosineCoefficient::ahat() const { return std::sqrt(base * base - amp * amp); }

double CosineCoefficient::inv_integral(double y) const {
  const double periods = std::floor(y + 0.5);
  const double t = y - periods;  // in [-1/2, 1/2)
  const double s = std::atan2(std::sqrt(base - amp) * std::sin(kPi * t), std::sqrt(base + amp) * std::cos(kPi * t));
  return (periods + s / kPi) / ahat();
}

double CosineCoefficient::chi(double y) const {
  // ahat I(y) - y has period 1 and is odd about 0, hence mean zero
  return ahat() * inv_integral(y) - y;
}

double CosineCoefficient::dchi(double y) const { return ahat() / a(y) - 1.0; }

Primitive::Primitive(std::function<double(double)> g, double eps, double length)
    : g_(std::move(g)), step_(eps / 64.0) {
  const auto n = static_cast<std::size_t>(std::ceil(length / step_)) + 1;
  table_.resize(n + 1);
  table_[0] = 0.0;
  for (std::size_t k = 0; k < n; ++k) table_[k + 1] = table_[k] + panel(k * step_, (k + 1) * step_);
}

double Primitive::panel(double lo, double hi) const {
  const GaussRule& r = gauss_rule(5);
  double s = 0.0;
  for (std::size_t q = 0; q < r.points.size(); ++q) s += r.weights[q] * g_(lo + (hi - lo) * r.points[q]);
  return s * (hi - lo);
}

double Primitive::operator()(double x) const {
  const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(x / step_)));
  if (k + 1 >= table_.size()) throw ValidationError("primitive evaluated beyond its table");
  return table_[k] + panel(k * step_, x);
}

DirichletUnitLoad::DirichletUnitLoad(CosineCoefficient a, double eps)
    : a_(a), eps_(eps), j1_([a, eps](double s) { return s / a.a(s / eps); }, eps) {
  c1_ = j1_(1.0) / (eps_ * a_.inv_integral(1.0 / eps_));
}

double DirichletUnitLoad::u(double x) const { return c1_ * eps_ * a_.inv_integral(x / eps_) - j1_(x); }
double DirichletUnitLoad::du(double x) const { return (c1_ - x) / a_.a(x / eps_); }
double DirichletUnitLoad::u0(double x) const { return x * (1.0 - x) / (2.0 * a_.ahat()); }
double DirichletUnitLoad::du0(double x) const { return (1.0 - 2.0 * x) / (2.0 * a_.ahat()); }

NeumannCosineLoad::NeumannCosineLoad(CosineCoefficient a, double eps)
    : a_(a),
      eps_(eps),
      prim_([a, eps](double s) { return -std::sin(2.0 * kPi * s) / (2.0 * kPi * a.a(s / eps)); }, eps) {
  // int_0^1 u = int_0^1 (1 - s) u'(s) ds for u(0) = 0
  const Primitive m([a, eps](double s) { return -(1.0 - s) * std::sin(2.0 * kPi * s) / (2.0 * kPi * a.a(s / eps)); },
                    eps);
  mean_ = m(1.0);
}

double NeumannCosineLoad::u(double x) const { return prim_(x) - mean_; }
double NeumannCosineLoad::du(double x) const { return -std::sin(2.0 * kPi * x) / (2.0 * kPi * a_.a(x / eps_)); }
double NeumannCosineLoad::u0(double x) const { return std::cos(2.0 * kPi * x) / (4.0 * kPi * kPi * a_.ahat()); }
double NeumannCosineLoad::du0(double x) const { return -std::sin(2.0 * kPi * x) / (2.0 * kPi * a_.ahat()); }

double dirichlet_corrector(const CosineCoefficient& a, double eps, double x) {
  return a.inv_integral(x / eps) / a.inv_integral(1.0 / eps);
}

double dirichlet_corrector_derivative(const CosineCoefficient& a, double eps, double x) {
  return 1.0 / (a.a(x / eps) * eps * a.inv_integral(1.0 / eps));
}

double neumann_corrector(const CosineCoefficient& a, double eps, double x, double x0) {
  return x0 + a.ahat() * eps * (a.inv_integral(x / eps) - a.inv_integral(x0 / eps));
}

}  // namespace homlab::oned
