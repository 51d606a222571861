#include "homlab/coeff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace homlab {

CoeffTensor::CoeffTensor(int d, int m) : d_(d), m_(m) {
  if (d < 1 || d > 2 || m < 1 || m > 2) {
    throw ValidationError("coefficient tensor requires d, m in {1, 2}");
  }
}

CoeffTensor CoeffTensor::identity(int d, int m, double scale) {
  CoeffTensor t(d, m);
  for (int i = 0; i < d; ++i) {
    for (int a = 0; a < m; ++a) t(i, i, a, a) = scale;
  }
  return t;
}

CoeffTensor CoeffTensor::adjoint() const {
  CoeffTensor t(d_, m_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j)
      for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b) t(i, j, a, b) = (*this)(j, i, b, a);
  return t;
}

Eigen::MatrixXd CoeffTensor::matrix() const {
  Eigen::MatrixXd q(size(), size());
  for (int r = 0; r < size(); ++r)
    for (int c = 0; c < size(); ++c) q(r, c) = flat(r, c);
  return q;
}

CoeffTensor CoeffTensor::from_matrix(int d, int m, const Eigen::MatrixXd& q) {
  CoeffTensor t(d, m);
  if (q.rows() != t.size() || q.cols() != t.size()) {
    throw ValidationError("coefficient matrix has wrong shape");
  }
  for (int r = 0; r < t.size(); ++r)
    for (int c = 0; c < t.size(); ++c) t.flat(r, c) = q(r, c);
  return t;
}

double CoeffTensor::max_abs() const {
  double v = 0.0;
  for (int k = 0; k < size() * size(); ++k) v = std::max(v, std::abs(data_[k]));
  return v;
}

double CoeffTensor::max_abs_diff(const CoeffTensor& other) const {
  if (other.d_ != d_ || other.m_ != m_) return std::numeric_limits<double>::infinity();
  double v = 0.0;
  for (int k = 0; k < size() * size(); ++k) v = std::max(v, std::abs(data_[k] - other.data_[k]));
  return v;
}

bool CoeffTensor::is_finite() const {
  for (int k = 0; k < size() * size(); ++k) {
    if (!std::isfinite(data_[k])) return false;
  }
  return true;
}

CoeffTensor& CoeffTensor::operator+=(const CoeffTensor& other) {
  if (other.d_ != d_ || other.m_ != m_) throw ValidationError("tensor shape mismatch");
  for (int k = 0; k < size() * size(); ++k) data_[k] += other.data_[k];
  return *this;
}

CoeffTensor& CoeffTensor::operator*=(double s) {
  for (int k = 0; k < size() * size(); ++k) data_[k] *= s;
  return *this;
}

std::string to_string(Smoothness s) {
  switch (s) {
    case Smoothness::constant: return "constant";
    case Smoothness::smooth_periodic: return "smooth-periodic";
    case Smoothness::piecewise_constant: return "piecewise-constant";
  }
  return "unknown";
}

std::string to_string(EllipticityClass c) {
  switch (c) {
    case EllipticityClass::legendre: return "legendre";
    case EllipticityClass::legendre_hadamard: return "legendre-hadamard";
    case EllipticityClass::elasticity: return "elasticity";
  }
  return "unknown";
}

Point reduce_periodic(const Point& y, int d) {
  Point r{0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    double v = y[k] - std::floor(y[k]);
    if (v >= 1.0) v = 0.0;  // y slightly below an integer can round up
    r[k] = v;
  }
  return r;
}

CoefficientField::CoefficientField(std::string name, int d, int m, Evaluator evaluator,
                                   Smoothness smoothness, bool symmetric,
                                   EllipticityClass ellipticity_class)
    : name_(std::move(name)),
      d_(d),
      m_(m),
      evaluator_(std::move(evaluator)),
      smoothness_(smoothness),
      symmetric_(symmetric),
      class_(ellipticity_class) {
  if (d < 1 || d > 2 || m < 1 || m > 2) {
    throw ValidationError("coefficient field requires d, m in {1, 2}");
  }
  if (ellipticity_class == EllipticityClass::elasticity && (d != 2 || m != 2)) {
    throw ValidationError("elasticity coefficients require d = m = 2");
  }
}

CoeffTensor CoefficientField::operator()(const Point& y) const {
  return evaluator_(reduce_periodic(y, d_));
}

// ---------------------------------------------------------------------------
// Ellipticity
// ---------------------------------------------------------------------------
namespace {

double min_sym_eigenvalue(const Eigen::MatrixXd& q) {
  Eigen::MatrixXd s = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Smallest eigenvalue of the m x m symbol sym(a_ij^{ab} η_i η_j).
double symbol_min_eigenvalue(const CoeffTensor& a, const Point& eta) {
  const int d = a.dim();
  const int m = a.components();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s(al, be) += a(i, j, al, be) * eta[i] * eta[j];
  return min_sym_eigenvalue(s);
}

double legendre_hadamard_constant(const CoeffTensor& a) {
  if (a.components() == 1 || a.dim() == 1) {
    if (a.dim() == 1) return symbol_min_eigenvalue(a, {1.0, 0.0});
    return min_sym_eigenvalue(a.matrix());
  }
  // d = 2, m = 2: minimise over the direction angle θ ∈ [0, π).
  auto f = [&](double t) { return symbol_min_eigenvalue(a, {std::cos(t), std::sin(t)}); };
  constexpr int kAngles = 180;
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 0; k < kAngles; ++k) {
    const double v = f(kPi * k / kAngles);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  // golden-section refinement on the bracketing interval
  double lo = kPi * (best_k - 1) / kAngles;
  double hi = kPi * (best_k + 1) / kAngles;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({best, f1, f2});
}

// Orthonormal (Frobenius) basis of symmetric d x d matrices in the flat layout.
Eigen::MatrixXd symmetric_basis(int d) {
  const int n = d * (d + 1) / 2;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d * d, n);
  int col = 0;
  for (int i = 0; i < d; ++i) {
    for (int al = i; al < d; ++al) {
      if (i == al) {
        b(al * d + i, col) = 1.0;
      } else {
        b(al * d + i, col) = std::sqrt(0.5);
        b(i * d + al, col) = std::sqrt(0.5);
      }
      ++col;
    }
  }
  return b;
}

struct PointConstants {
  double legendre;
  double legendre_hadamard;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double norm;
  bool symmetric;
  bool minor_symmetric;
};

PointConstants constants_of(const CoeffTensor& a) {
  PointConstants c{};
  const Eigen::MatrixXd q = a.matrix();
  const double scale = std::max(1.0, a.max_abs());
  c.legendre = min_sym_eigenvalue(q);
  c.legendre_hadamard = std::max(legendre_hadamard_constant(a), c.legendre);
  c.norm = Eigen::JacobiSVD<Eigen::MatrixXd>(q).singularValues()(0);
  c.symmetric = (q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
  c.minor_symmetric = false;
  if (a.dim() == a.components()) {
    const int d = a.dim();
    bool minor = true;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int al = 0; al < d; ++al)
          for (int be = 0; be < d; ++be)
            minor = minor && std::abs(a(i, j, al, be) - a(al, j, i, be)) <= 1e-12 * scale;
    c.minor_symmetric = minor;
    const Eigen::MatrixXd b = symmetric_basis(d);
    const Eigen::MatrixXd r = b.transpose() * (0.5 * (q + q.transpose())) * b;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r, Eigen::EigenvaluesOnly);
    c.kappa1 = es.eigenvalues().minCoeff();
    c.kappa2 = es.eigenvalues().maxCoeff();
  }
  return c;
}

void finish_report(EllipticityReport& r, bool has_elasticity, bool minor_symmetric) {
  r.legendre_pass = r.legendre > kEllipticityTolerance;
  r.legendre_hadamard_pass = r.legendre_hadamard > kEllipticityTolerance;
  r.elasticity_pass = has_elasticity && r.symmetric && minor_symmetric &&
                      r.kappa1.value_or(0.0) > kEllipticityTolerance;
}

}  // namespace

nlohmann::json EllipticityReport::to_json() const {
  nlohmann::json j;
  j["legendre"] = legendre;
  j["legendre_hadamard"] = legendre_hadamard;
  j["kappa1"] = kappa1 ? nlohmann::json(*kappa1) : nlohmann::json(nullptr);
  j["kappa2"] = kappa2 ? nlohmann::json(*kappa2) : nlohmann::json(nullptr);
  j["upper_bound"] = upper_bound;
  j["legendre_pass"] = legendre_pass;
  j["legendre_hadamard_pass"] = legendre_hadamard_pass;
  j["elasticity_pass"] = elasticity_pass;
  j["symmetric"] = symmetric;
  j["samples"] = samples;
  return j;
}

EllipticityReport check_ellipticity(const CoeffTensor& a) {
  if (!a.is_finite()) throw ValidationError("non-finite coefficient tensor");
  const PointConstants c = constants_of(a);
  EllipticityReport r;
  r.legendre = c.legendre;
  r.legendre_hadamard = c.legendre_hadamard;
  r.upper_bound = c.norm;
  r.symmetric = c.symmetric;
  r.samples = 1;
  const bool has_el = a.dim() == a.components();
  if (has_el) {
    r.kappa1 = c.kappa1;
    r.kappa2 = c.kappa2;
  }
  finish_report(r, has_el, c.minor_symmetric);
  return r;
}

EllipticityReport check_ellipticity(const CoefficientField& a, int sample_density) {
  if (sample_density < 8) {
    throw ValidationError("check_ellipticity needs at least 8 samples per period");
  }
  const int d = a.dim();
  const int n = sample_density;
  const Index total = d == 1 ? n : static_cast<Index>(n) * n;
  const bool has_el = d == a.components();

  EllipticityReport r;
  r.legendre = std::numeric_limits<double>::infinity();
  r.legendre_hadamard = std::numeric_limits<double>::infinity();
  r.symmetric = true;
  bool minor = true;
  double k1 = std::numeric_limits<double>::infinity();
  double k2 = -std::numeric_limits<double>::infinity();
  for (Index s = 0; s < total; ++s) {
    Point y{static_cast<double>(s % n) / n, d == 2 ? static_cast<double>(s / n) / n : 0.0};
    const CoeffTensor t = a(y);
    if (!t.is_finite()) {
      std::ostringstream os;
      os << "non-finite coefficient at y = (" << y[0];
      if (d == 2) os << ", " << y[1];
      os << ")";
      throw ValidationError(os.str());
    }
    const PointConstants c = constants_of(t);
    r.legendre = std::min(r.legendre, c.legendre);
    r.legendre_hadamard = std::min(r.legendre_hadamard, c.legendre_hadamard);
    r.upper_bound = std::max(r.upper_bound, c.norm);
    r.symmetric = r.symmetric && c.symmetric;
    if (has_el) {
      minor = minor && c.minor_symmetric;
      k1 = std::min(k1, c.kappa1);
      k2 = std::max(k2, c.kappa2);
    }
  }
  r.samples = static_cast<int>(total);
  if (has_el) {
    r.kappa1 = k1;
    r.kappa2 = k2;
  }
  finish_report(r, has_el, minor);
  return r;
}

// ---------------------------------------------------------------------------
// Transformations
// ---------------------------------------------------------------------------
CoefficientField adjoint(const CoefficientField& a) {
  auto inner = a;
  CoefficientField out(
      a.name() + "*", a.dim(), a.components(),
      [inner](const Point& y) { return inner(y).adjoint(); }, a.smoothness(), a.symmetric(),
      a.ellipticity_class());
  out.tags = a.tags;
  return out;
}

CoeffTensor elasticity_rewrite(const CoeffTensor& a, double mu) {
  CoeffTensor t = a;
  const int d = a.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int al = 0; al < d; ++al)
        for (int be = 0; be < d; ++be) {
          const double dd = (i == al && j == be ? 1.0 : 0.0) - (i == be && j == al ? 1.0 : 0.0);
          t(i, j, al, be) += mu * dd;
        }
  return t;
}

CoefficientField elasticity_rewrite(const CoefficientField& a, double mu) {
  if (a.dim() != a.components()) {
    throw ValidationError("elasticity_rewrite requires m = d");
  }
  const EllipticityReport rep = check_ellipticity(a, 16);
  if (!rep.elasticity_pass) {
    throw ValidationError("elasticity_rewrite requires an elasticity-class tensor");
  }
  if (mu < 0.0) throw ValidationError("elasticity_rewrite requires mu >= 0");
  if (mu > 0.5 * *rep.kappa1 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "elasticity_rewrite: mu = " << mu << " exceeds kappa1/2 = " << 0.5 * *rep.kappa1;
    throw ValidationError(os.str());
  }
  if (mu == 0.0) return a;
  auto inner = a;
  CoefficientField out(
      a.name() + "~", a.dim(), a.components(),
      [inner, mu](const Point& y) { return elasticity_rewrite(inner(y), mu); }, a.smoothness(),
      true, EllipticityClass::legendre);
  out.tags = a.tags;
  return out;
}

CoeffTensor isotropic_elasticity(double lambda, double mu) {
  CoeffTensor t(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int al = 0; al < 2; ++al)
        for (int be = 0; be < 2; ++be) {
          const double dia = i == al ? 1.0 : 0.0;
          const double djb = j == be ? 1.0 : 0.0;
          const double dij = i == j ? 1.0 : 0.0;
          const double dab = al == be ? 1.0 : 0.0;
          const double dib = i == be ? 1.0 : 0.0;
          const double dja = j == al ? 1.0 : 0.0;
          t(i, j, al, be) = lambda * dia * djb + mu * (dij * dab + dib * dja);
        }
  return t;
}

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------
namespace {

class Params {
 public:
  Params(const std::string& family, const nlohmann::json& p, std::set<std::string> allowed)
      : family_(family), p_(p.is_null() ? nlohmann::json::object() : p) {
    if (!p_.is_object()) throw ValidationError(family + ": params must be an object");
    for (const auto& [key, _] : p_.items()) {
      if (!allowed.count(key)) throw ValidationError(family + ": unknown parameter '" + key + "'");
    }
  }

  double number(const std::string& key, double fallback) const {
    if (!p_.contains(key)) return fallback;
    const auto& v = p_.at(key);
    if (!v.is_number()) throw ValidationError(family_ + ": parameter '" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(family_ + ": parameter '" + key + "' is not finite");
    return x;
  }

  int integer(const std::string& key, int fallback) const {
    if (!p_.contains(key)) return fallback;
    const auto& v = p_.at(key);
    if (!v.is_number_integer()) {
      throw ValidationError(family_ + ": parameter '" + key + "' must be an integer");
    }
    return v.get<int>();
  }

  const nlohmann::json& raw(const std::string& key) const { return p_.at(key); }
  bool has(const std::string& key) const { return p_.contains(key); }

 private:
  std::string family_;
  nlohmann::json p_;
};

double cos2pi(double t) { return std::cos(2.0 * kPi * t); }
double sin2pi(double t) { return std::sin(2.0 * kPi * t); }

CoefficientField make_constant(const Params& p) {
  const int d = p.integer("d", 2);
  const int m = p.integer("m", 1);
  if (d < 1 || d > 2 || m < 1 || m > 2) throw ValidationError("constant: d and m must be 1 or 2");
  CoeffTensor t(d, m);
  if (!p.has("value") || p.raw("value").is_number()) {
    t = CoeffTensor::identity(d, m, p.number("value", 1.0));
  } else {
    const auto& v = p.raw("value");
    if (!v.is_array() || static_cast<int>(v.size()) != t.size() * t.size()) {
      throw ValidationError("constant: value must be a number or (d*m)^2 entries");
    }
    for (int k = 0; k < t.size() * t.size(); ++k) {
      if (!v[k].is_number()) throw ValidationError("constant: value entries must be numbers");
      t.flat(k / t.size(), k % t.size()) = v[k].get<double>();
    }
  }
  const EllipticityReport rep = check_ellipticity(t);
  if (!rep.legendre_hadamard_pass) {
    throw ValidationError("constant: tensor violates the Legendre-Hadamard condition");
  }
  EllipticityClass cls = rep.legendre_pass ? EllipticityClass::legendre
                         : rep.elasticity_pass ? EllipticityClass::elasticity
                                               : EllipticityClass::legendre_hadamard;
  if (cls == EllipticityClass::elasticity && (d != 2 || m != 2)) {
    cls = EllipticityClass::legendre_hadamard;
  }
  return CoefficientField(
      "constant", d, m, [t](const Point&) { return t; }, Smoothness::constant, rep.symmetric, cls);
}

CoefficientField make_scalar_cos(const Params& p) {
  const double base = p.number("base", 2.0);
  const double amp = p.number("amp", 1.0);
  const double shift = p.number("shift", 0.0);
  if (base - std::abs(amp) <= 0.0) throw ValidationError("scalar-1d-cos: need base > |amp|");
  return CoefficientField(
      "scalar-1d-cos", 1, 1,
      [=](const Point& y) {
        CoeffTensor t(1, 1);
        t(0, 0, 0, 0) = base + amp * cos2pi(y[0] - shift);
        return t;
      },
      amp == 0.0 ? Smoothness::constant : Smoothness::smooth_periodic, true,
      EllipticityClass::legendre);
}

CoefficientField make_laminate(const Params& p) {
  const double base = p.number("base", 2.0);
  const double amp = p.number("amp", 1.0);
  const double shift = p.number("shift", 0.0);
  if (base - std::abs(amp) <= 0.0) throw ValidationError("laminate-2d: need base > |amp|");
  return CoefficientField(
      "laminate-2d", 2, 1,
      [=](const Point& y) {
        return CoeffTensor::identity(2, 1, base + amp * cos2pi(y[0] - shift));
      },
      amp == 0.0 ? Smoothness::constant : Smoothness::smooth_periodic, true,
      EllipticityClass::legendre);
}

CoefficientField make_checkerboard(const Params& p) {
  const double alpha = p.number("alpha", 1.0);
  const double beta = p.number("beta", 4.0);
  if (alpha <= 0.0 || beta <= 0.0) {
    throw ValidationError("checkerboard-2d: values must be positive");
  }
  // Half-open subsquares: [0,1/2)^2 and [1/2,1)^2 carry alpha.
  return CoefficientField(
      "checkerboard-2d", 2, 1,
      [=](const Point& y) {
        const bool left = y[0] < 0.5;
        const bool low = y[1] < 0.5;
        return CoeffTensor::identity(2, 1, left == low ? alpha : beta);
      },
      alpha == beta ? Smoothness::constant : Smoothness::piecewise_constant, true,
      EllipticityClass::legendre);
}

CoefficientField make_smooth_matrix(const Params& p) {
  const double base = p.number("base", 3.0);
  const double amp = p.number("amp", 1.0);
  const double coupling = p.number("coupling", 0.5);
  const double skew = p.number("skew", 0.0);
  if (base - std::abs(amp) - std::abs(coupling) <= 0.0) {
    throw ValidationError("smooth-matrix-2d: need base > |amp| + |coupling|");
  }
  return CoefficientField(
      "smooth-matrix-2d", 2, 1,
      [=](const Point& y) {
        CoeffTensor t(2, 1);
        const double s = coupling * sin2pi(y[1]);
        const double k = skew * cos2pi(y[0]);
        t(0, 0, 0, 0) = base + amp * cos2pi(y[0]);
        t(1, 1, 0, 0) = base + amp * sin2pi(y[0] + y[1]);
        t(0, 1, 0, 0) = s + k;
        t(1, 0, 0, 0) = s - k;
        return t;
      },
      Smoothness::smooth_periodic, skew == 0.0, EllipticityClass::legendre);
}

CoefficientField make_elasticity(const Params& p) {
  const double lambda = p.number("lambda", 1.0);
  const double mu = p.number("mu", 1.0);
  const double lambda_amp = p.number("lambda_amp", 0.0);
  const double mu_amp = p.number("mu_amp", 0.0);
  const double mu_min = mu - std::abs(mu_amp);
  const double lambda_min = lambda - std::abs(lambda_amp);
  if (mu_min <= 0.0 || mu_min + lambda_min <= 0.0) {
    throw ValidationError("elasticity-isotropic-periodic: need mu > 0 and lambda + mu > 0");
  }
  const bool constant = lambda_amp == 0.0 && mu_amp == 0.0;
  return CoefficientField(
      "elasticity-isotropic-periodic", 2, 2,
      [=](const Point& y) {
        const double c = cos2pi(y[0]);
        return isotropic_elasticity(lambda + lambda_amp * c, mu + mu_amp * c);
      },
      constant ? Smoothness::constant : Smoothness::smooth_periodic, true,
      EllipticityClass::elasticity);
}

}  // namespace

const std::vector<std::string>& builtin_family_names() {
  static const std::vector<std::string> names = {
      "constant",          "scalar-1d-cos",   "laminate-2d",
      "checkerboard-2d",   "smooth-matrix-2d", "elasticity-isotropic-periodic"};
  return names;
}

CoefficientField builtin_family(const std::string& name, const nlohmann::json& params) {
  if (name == "constant") return make_constant(Params(name, params, {"d", "m", "value"}));
  if (name == "scalar-1d-cos") {
    return make_scalar_cos(Params(name, params, {"base", "amp", "shift"}));
  }
  if (name == "laminate-2d") return make_laminate(Params(name, params, {"base", "amp", "shift"}));
  if (name == "checkerboard-2d") {
    return make_checkerboard(Params(name, params, {"alpha", "beta"}));
  }
  if (name == "smooth-matrix-2d") {
    return make_smooth_matrix(Params(name, params, {"base", "amp", "coupling", "skew"}));
  }
  if (name == "elasticity-isotropic-periodic") {
    return make_elasticity(Params(name, params, {"lambda", "mu", "lambda_amp", "mu_amp"}));
  }
  throw ValidationError("unknown coefficient family '" + name + "'");
}

}  // namespace homlab
