#include "homlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "homlab/gridfile.hpp"
#include "homlab/oned.hpp"
#include "homlab/parallel.hpp"
#include "homlab/twoscale.hpp"

namespace homlab {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::degenerate_zero: return "degenerate-zero";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw ValidationError("fit_rate needs at least 3 points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [e, v] : pairs) {
    if (!(e > 0.0) || !(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError("fit_rate: nonpositive or non-finite (eps, error) pair");
    }
    sx += std::log(e);
    sy += std::log(v);
  }
  const double n = static_cast<double>(pairs.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [e, v] : pairs) {
    const double dx = std::log(e) - mx, dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw ValidationError("fit_rate: all eps values coincide");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (const auto& [e, v] : pairs) {
    const double r = std::log(v) - f.intercept - f.slope * std::log(e);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  f.points = static_cast<int>(pairs.size());
  return f;
}

void RateStudy::grade(double zero_level) {
  fit.reset();
  if (points.empty()) {
    verdict = Verdict::inconclusive;
    diagnostics.push_back("no points");
    return;
  }
  double vmax = 0.0;
  for (const auto& p : points) vmax = std::max(vmax, std::abs(p.value));
  if (vmax <= zero_level) {
    verdict = Verdict::degenerate_zero;
    diagnostics.push_back("all errors below " + format_double(zero_level));
    return;
  }
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : points)
    if (p.admitted && p.value > 0.0) pairs.emplace_back(p.eps, p.value);
  if (pairs.size() < 3) {
    verdict = Verdict::inconclusive;
    std::ostringstream os;
    os << "gate admitted " << pairs.size() << " of " << points.size() << " points";
    for (const auto& p : points) {
      os << "; eps=" << format_double(p.eps) << " estimate/value="
         << format_double(p.value > 0.0 ? p.estimate / p.value : std::numeric_limits<double>::infinity());
    }
    diagnostics.push_back(os.str());
    return;
  }
  fit = fit_rate(pairs);
  verdict = (fit->slope >= window[0] && fit->slope <= window[1]) ? Verdict::pass : Verdict::fail;
}

nlohmann::json RateStudy::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"eps", p.eps},
                   {"h", p.h},
                   {"value", p.value},
                   {"estimate", p.estimate},
                   {"admitted", p.admitted},
                   {"gate", p.gate}});
  }
  nlohmann::json j = {{"name", name},       {"quantity", quantity}, {"window", window},
                      {"graded", graded},   {"points", pts},        {"verdict", to_string(verdict)},
                      {"diagnostics", diagnostics}};
  if (fit) {
    j["slope"] = fit->slope;
    j["intercept"] = fit->intercept;
    j["r2"] = fit->r2;
    j["fit_points"] = fit->points;
  } else {
    j["slope"] = nullptr;
  }
  return j;
}

nlohmann::json Check::to_json() const {
  return {{"name", name}, {"pass", pass}, {"value", value}, {"limit", limit}, {"detail", detail}};
}

Verdict StudyReport::verdict() const {
  bool any_inconclusive = false;
  bool all_zero = true;
  bool any_graded = false;
  for (const auto& s : studies) {
    if (!s.graded) continue;
    any_graded = true;
    if (s.verdict == Verdict::fail) return Verdict::fail;
    if (s.verdict == Verdict::inconclusive) any_inconclusive = true;
    if (s.verdict != Verdict::degenerate_zero) all_zero = false;
  }
  for (const auto& c : checks)
    if (!c.pass) return Verdict::fail;
  if (any_inconclusive) return Verdict::inconclusive;
  if (any_graded && all_zero) return Verdict::degenerate_zero;
  return Verdict::pass;
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& st : studies) s.push_back(st.to_json());
  nlohmann::json c = nlohmann::json::array();
  for (const auto& ch : checks) c.push_back(ch.to_json());
  return {{"experiment", experiment}, {"verdict", to_string(verdict())}, {"studies", s}, {"checks", c},
          {"summary", summary}};
}

const RateStudy& StudyReport::study(const std::string& name) const {
  for (const auto& s : studies)
    if (s.name == name) return s;
  throw ValidationError("report has no study '" + name + "'");
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

CoefficientField Sweep::coefficient() const {
  if (!grid.empty()) return sampled_coefficient(read_grid_file(grid));
  return builtin_family(family, params);
}

int Sweep::dim() const { return domain == Shape::interval ? 1 : 2; }

int Sweep::cells_for(double e, int m) const {
  const bool even = domain == Shape::lshape;
  auto round_up = [even](double x) {
    int n = static_cast<int>(std::ceil(x - 1e-9));
    return even && n % 2 ? n + 1 : n;
  };
  const int lo = round_up(8.0 / e);
  int n = round_up(cells_per_eps / e);
  // largest coarse n whose refined level 2n fits the budget
  const double root = dim() == 1 ? static_cast<double>(max_dofs) / m : std::sqrt(static_cast<double>(max_dofs) / m);
  int cap = static_cast<int>(std::floor((root - 1.0) / 2.0));
  if (even && cap % 2) --cap;
  n = std::min(n, cap);
  return std::max(n, lo);
}

void Sweep::validate() const {
  if (eps.size() < 3) throw ValidationError("a sweep needs at least 3 eps values");
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!(eps[k] > 0.0) || !std::isfinite(eps[k])) throw ValidationError("eps must be positive");
    if (k && !(eps[k] < eps[k - 1])) throw ValidationError("eps list must be strictly decreasing");
  }
  validate_single(eps.front());
  validate_setup(eps.back());
}

void Sweep::validate_single(double e) const {
  if (!(e > 0.0) || !std::isfinite(e)) throw ValidationError("eps must be positive");
  if (8.0 * e > 1.0 + 1e-12) throw ValidationError("eps must be at most 1/8 for the cutoff");
}

void Sweep::validate_setup(double finest) const {
  if (domain == Shape::torus) throw ValidationError("sweeps need a bounded domain");
  if (cells_per_eps < 8) throw ValidationError("cells_per_eps must be at least 8 (h <= eps/8)");
  if (cell_n < 8 || cell_n % 2) throw ValidationError("cell_n must be even and at least 8");
  if (!(tol >= 1e-14 && tol <= 1e-6)) throw ValidationError("tol must lie in [1e-14, 1e-6]");
  if (!(gate_fraction > 0.0 && gate_fraction < 1.0)) throw ValidationError("gate_fraction must lie in (0, 1)");
  if (jobs < 1) throw ValidationError("jobs must be positive");
  if (eigen_count < 1 || eigen_count > 5) throw ValidationError("eigen_count must lie in 1..5");
  if (data != "unit-load" && data != "manufactured") {
    throw ValidationError("data must be 'unit-load' or 'manufactured'");
  }
  const CoefficientField a = coefficient();
  if (a.dim() != dim()) throw ValidationError("family dimension does not match the domain");
  const Index n = 2 * static_cast<Index>(cells_for(finest, a.components())) + 1;
  const Index dofs = a.components() * (dim() == 1 ? n : n * n);
  if (dofs > max_dofs) {
    throw ValidationError("finest level needs " + std::to_string(dofs) + " dofs, above max_dofs " +
                          std::to_string(max_dofs));
  }
}

nlohmann::json Sweep::to_json() const {
  return {{"family", family},        {"params", params},
          {"domain", to_string(domain)}, {"eps", eps},
          {"cells_per_eps", cells_per_eps}, {"cell_n", cell_n},
          {"tol", tol},              {"gate_fraction", gate_fraction},
          {"jobs", jobs},            {"seed", seed},
          {"eigen_count", eigen_count}, {"data", data},
          {"oracle", oracle},        {"max_dofs", max_dofs},
          {"grid", grid}};
}

namespace {

// settings echoed into results; the worker count must not show up there
nlohmann::json result_settings(const Sweep& s) {
  nlohmann::json j = s.to_json();
  j.erase("jobs");
  return j;
}

}  // namespace

Sweep Sweep::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("sweep must be an object");
  static const std::vector<std::string> keys = {"family", "params",        "domain",      "eps",
                                                "cells_per_eps", "cell_n",  "tol",         "gate_fraction",
                                                "jobs",   "seed",          "eigen_count", "data",
                                                "oracle", "max_dofs",      "grid"};
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ValidationError("unknown key '" + k + "'");
    }
  }
  Sweep s;
  try {
    if (j.contains("family")) s.family = j.at("family").get<std::string>();
    if (j.contains("params")) s.params = j.at("params");
    if (j.contains("domain")) s.domain = shape_from_string(j.at("domain").get<std::string>());
    if (j.contains("eps")) s.eps = j.at("eps").get<std::vector<double>>();
    if (j.contains("cells_per_eps")) s.cells_per_eps = j.at("cells_per_eps").get<int>();
    if (j.contains("cell_n")) s.cell_n = j.at("cell_n").get<int>();
    if (j.contains("tol")) s.tol = j.at("tol").get<double>();
    if (j.contains("gate_fraction")) s.gate_fraction = j.at("gate_fraction").get<double>();
    if (j.contains("jobs")) s.jobs = j.at("jobs").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("eigen_count")) s.eigen_count = j.at("eigen_count").get<int>();
    if (j.contains("data")) s.data = j.at("data").get<std::string>();
    if (j.contains("oracle")) s.oracle = j.at("oracle").get<bool>();
    if (j.contains("max_dofs")) s.max_dofs = j.at("max_dofs").get<Index>();
    if (j.contains("grid")) s.grid = j.at("grid").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sweep: ") + e.what());
  }
  return s;
}

std::vector<double> dyadic_eps(int first, int last, double shift) {
  std::vector<double> out;
  for (int k = first; k <= last; ++k) out.push_back(1.0 / (std::ldexp(1.0, k) + shift));
  return out;
}

namespace {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Problem setup
// ---------------------------------------------------------------------------

struct Problem {
  CoefficientField a;
  CoefficientField form;
  CoeffTensor ahat;
  std::shared_ptr<CorrectorSet> chi;
  CorrectorFn chi_fn;
  std::optional<oned::CosineCoefficient> cosine;
  Json cell_summary;
};

std::optional<oned::CosineCoefficient> cosine_oracle(const Sweep& s) {
  if (!s.oracle || !s.grid.empty() || s.family != "scalar-1d-cos") return std::nullopt;
  const Json& p = s.params.is_null() ? Json::object() : s.params;
  if (p.value("shift", 0.0) != 0.0) return std::nullopt;
  oned::CosineCoefficient c;
  c.base = p.value("base", 2.0);
  c.amp = p.value("amp", 1.0);
  if (c.amp == 0.0) return std::nullopt;
  return c;
}

Problem make_problem(const Sweep& s, BoundaryKind kind, double single_eps = 0.0) {
  if (single_eps != 0.0) {
    s.validate_single(single_eps);
    s.validate_setup(single_eps);
  } else {
    s.validate();
  }
  const CoefficientField a = s.coefficient();
  Problem p{a, a, {}, nullptr, nullptr, cosine_oracle(s), Json::object()};
  p.form = solver_form(p.a, kind);
  if (p.cosine) {
    const oned::CosineCoefficient c = *p.cosine;
    p.ahat = CoeffTensor(1, 1);
    p.ahat(0, 0, 0, 0) = c.ahat();
    p.chi_fn = [c](const Point& y, int, int, double* v, double* g) {
      if (v) v[0] = c.chi(y[0]);
      if (g) g[0] = c.dchi(y[0]);
    };
    p.cell_summary = {{"ahat", "closed form"}, {"value", c.ahat()}};
    return p;
  }
  CellOptions opt;
  opt.tol = std::min(s.tol, 1e-10);
  const HomogenizedTensor ht = effective_tensor(p.form, s.cell_n, opt);
  p.ahat = ht.best();
  p.chi = std::make_shared<CorrectorSet>(solve_correctors(p.form, s.cell_n, opt));
  auto chi = p.chi;
  p.chi_fn = [chi](const Point& y, int j, int beta, double* v, double* g) { chi->eval(y, j, beta, v, g); };
  p.cell_summary = ht.to_json();
  return p;
}

// ---------------------------------------------------------------------------
// Data: F, boundary values and the homogenized solution
// ---------------------------------------------------------------------------

/// Prescribed homogenized solution: products of sines (Dirichlet) or sums
/// of cosines (Neumann); F and g are derived from A_hat.
class Manufactured {
 public:
  Manufactured(int d, int m, BoundaryKind kind, Shape shape, const CoeffTensor& ahat)
      : d_(d), m_(m), kind_(kind), k_(shape == Shape::lshape ? 2 : 1), ahat_(ahat) {}

  // value, gradient and Hessian of component alpha
  void eval(const Point& x, int alpha, double& v, double* g, double (*hs)[2]) const {
    if (kind_ == BoundaryKind::dirichlet) {
      double f[2] = {kPi * k_, kPi * k_ * (1 + alpha)};
      if (d_ == 1) f[0] = kPi * k_ * (1 + alpha);
      double s[2] = {1.0, 1.0}, c[2] = {0.0, 0.0};
      for (int i = 0; i < d_; ++i) {
        s[i] = std::sin(f[i] * x[i]);
        c[i] = std::cos(f[i] * x[i]);
      }
      v = s[0] * s[1];
      if (d_ == 1) {
        g[0] = f[0] * c[0];
        hs[0][0] = -f[0] * f[0] * s[0];
        return;
      }
      g[0] = f[0] * c[0] * s[1];
      g[1] = f[1] * s[0] * c[1];
      hs[0][0] = -f[0] * f[0] * v;
      hs[1][1] = -f[1] * f[1] * v;
      hs[0][1] = hs[1][0] = f[0] * f[1] * c[0] * c[1];
      return;
    }
    v = 0.0;
    hs[0][0] = hs[0][1] = hs[1][0] = hs[1][1] = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double amp = (alpha == 0 ? 1.0 : 0.5) / (4.0 * kPi * kPi * ahat_(i, i, alpha, alpha));
      const double w = 2.0 * kPi;
      v += amp * std::cos(w * x[i]);
      g[i] = -amp * w * std::sin(w * x[i]);
      hs[i][i] = -amp * w * w * std::cos(w * x[i]);
    }
  }

  void source(const Point& x, double* out) const {
    double v, g[4][2], hs[4][2][2];
    for (int b = 0; b < m_; ++b) eval(x, b, v, g[b], hs[b]);
    for (int a = 0; a < m_; ++a) {
      double f = 0.0;
      for (int b = 0; b < m_; ++b)
        for (int i = 0; i < d_; ++i)
          for (int j = 0; j < d_; ++j) f -= ahat_(i, j, a, b) * hs[b][i][j];
      out[a] = f;
    }
  }

  void boundary(const Point& x, double* out) const {
    double g[2], hs[2][2];
    for (int a = 0; a < m_; ++a) eval(x, a, out[a], g, hs);
  }

  void conormal(const Point& x, const Point& n, double* out) const {
    double v, g[4][2], hs[2][2];
    for (int b = 0; b < m_; ++b) eval(x, b, v, g[b], hs);
    for (int a = 0; a < m_; ++a) {
      double s = 0.0;
      for (int b = 0; b < m_; ++b)
        for (int i = 0; i < d_; ++i)
          for (int j = 0; j < d_; ++j) s += n[i] * ahat_(i, j, a, b) * g[b][j];
      out[a] = s;
    }
  }

 private:
  int d_;
  int m_;
  BoundaryKind kind_;
  int k_;
  CoeffTensor ahat_;
};

BVPSpec make_spec(const Sweep& s, const Problem& p, BoundaryKind kind, const Coefficient& coef, double eps) {
  BVPSpec spec;
  spec.coefficient = coef;
  spec.eps = eps;
  spec.boundary = kind;
  const int m = p.a.components();
  if (s.data == "unit-load") {
    if (kind != BoundaryKind::dirichlet) throw ValidationError("unit-load data is Dirichlet only");
    spec.source = [m](const Point&, double* f) { std::fill(f, f + m, 1.0); };
  } else {
    auto man = std::make_shared<Manufactured>(p.a.dim(), m, kind, s.domain, p.ahat);
    spec.source = [man](const Point& x, double* f) { man->source(x, f); };
    if (kind == BoundaryKind::dirichlet) {
      spec.dirichlet = [man](const Point& x, double* f) { man->boundary(x, f); };
    } else {
      spec.neumann = [man](const Point& x, const Point& n, double* f) { man->conormal(x, n, f); };
    }
  }
  if (kind == BoundaryKind::neumann && p.a.ellipticity_class() == EllipticityClass::elasticity) {
    spec.nullspace = NullspacePolicy::rigid_modes;
  }
  return spec;
}

struct Level {
  std::shared_ptr<const Mesh> mesh;
  std::unique_ptr<FEField> ue;
  std::unique_ptr<FEField> u0;
  SolveInfo info;
};

Level solve_level(const Sweep& s, const Problem& p, BoundaryKind kind, double eps, int n) {
  Level l;
  l.mesh = std::make_shared<const Mesh>(Mesh::make(s.domain, s.dim(), n));
  const BVPSpec se = make_spec(s, p, kind, Coefficient::oscillatory(p.form, eps), eps);
  Solution ue = solve_bvp(se, l.mesh, s.tol);
  const BVPSpec s0 = make_spec(s, p, kind, Coefficient::constant_tensor(p.ahat), 0.0);
  Solution u0 = solve_bvp(s0, l.mesh, s.tol);
  l.info = ue.info;
  l.ue = std::make_unique<FEField>(std::move(ue.u));
  l.u0 = std::make_unique<FEField>(std::move(u0.u));
  return l;
}

RatePoint make_point(const Sweep& s, double eps, double h, double value, double estimate) {
  RatePoint pt;
  pt.eps = eps;
  pt.h = h;
  pt.value = value;
  pt.estimate = estimate;
  pt.admitted = estimate <= s.gate_fraction * value;
  pt.gate = pt.admitted ? "pass" : "fail";
  return pt;
}

RatePoint exact_point(double eps, double h, double value) {
  RatePoint pt;
  pt.eps = eps;
  pt.h = h;
  pt.value = value;
  pt.admitted = true;
  pt.gate = "exact";
  return pt;
}

RateStudy make_study(const std::string& name, const std::string& quantity, std::array<double, 2> window,
                     bool graded) {
  RateStudy st;
  st.name = name;
  st.quantity = quantity;
  st.window = window;
  st.graded = graded;
  return st;
}

ClosedFormField scalar_field(std::function<double(double)> f, std::function<double(double)> df) {
  return ClosedFormField(1, 1, [f = std::move(f), df = std::move(df)](const Point& x, double* v, double* g) {
    if (v) v[0] = f(x[0]);
    if (g) g[0] = df(x[0]);
  });
}

double norm_scale(const Mesh& mesh, const Field& f, NormKind kind, double p = 2.0) {
  return std::max(1.0, norm(mesh, f, kind, p));
}

Check monotone_check(const RateStudy& st) {
  Check c;
  c.name = st.name + "-monotone";
  c.pass = true;
  for (std::size_t k = 1; k < st.points.size(); ++k) {
    if (!(st.points[k].value < st.points[k - 1].value)) c.pass = false;
  }
  c.detail = "errors strictly decrease with eps";
  return c;
}

// ---------------------------------------------------------------------------
// Boundary-value sweeps
// ---------------------------------------------------------------------------

struct BvpQuantities {
  bool l2 = false;
  bool h1 = false;
  bool lp = false;
  double p = 2.0;
  bool lp_extra = false;  // also p = 4/3 in 2D
};

struct BvpPoint {
  double h = 0.0;
  double l2 = 0.0, l2_est = 0.0;
  double h1 = 0.0, h1_est = 0.0;
  double lp = 0.0, lp_est = 0.0;
  double lq = 0.0, lq_est = 0.0;
  double ref_l2 = 1.0, ref_h1 = 1.0, ref_lp = 1.0, ref_lq = 1.0;
  bool exact = false;
  double nullspace_defect = 0.0;
  double compatibility = 0.0;
};

constexpr double kFourThirds = 4.0 / 3.0;

BvpPoint bvp_point_oracle(const Sweep& s, const Problem& p, BoundaryKind kind, double eps,
                          const BvpQuantities& q) {
  const oned::CosineCoefficient c = *p.cosine;
  const int n = s.cells_for(eps);
  const auto mesh = std::make_shared<const Mesh>(Mesh::interval(n));
  BvpPoint r;
  r.h = mesh->h();
  r.exact = true;
  std::unique_ptr<ClosedFormField> ue, u0;
  if (kind == BoundaryKind::dirichlet) {
    auto sol = std::make_shared<oned::DirichletUnitLoad>(c, eps);
    ue = std::make_unique<ClosedFormField>(
        scalar_field([sol](double x) { return sol->u(x); }, [sol](double x) { return sol->du(x); }));
    u0 = std::make_unique<ClosedFormField>(
        scalar_field([sol](double x) { return sol->u0(x); }, [sol](double x) { return sol->du0(x); }));
  } else {
    auto sol = std::make_shared<oned::NeumannCosineLoad>(c, eps);
    ue = std::make_unique<ClosedFormField>(
        scalar_field([sol](double x) { return sol->u(x); }, [sol](double x) { return sol->du(x); }));
    u0 = std::make_unique<ClosedFormField>(
        scalar_field([sol](double x) { return sol->u0(x); }, [sol](double x) { return sol->du0(x); }));
  }
  LinearCombination diff;
  diff.add(1.0, *ue).add(-1.0, *u0);
  if (q.l2) {
    r.l2 = norm(*mesh, diff, NormKind::L2, 2.0, 5);
    r.ref_l2 = norm_scale(*mesh, *u0, NormKind::L2);
  }
  if (q.lp) {
    r.lp = norm(*mesh, diff, NormKind::Lp, q.p, 5);
    r.ref_lp = norm_scale(*mesh, *u0, NormKind::Lp, q.p);
  }
  if (q.h1) {
    const Expansion w(*ue, *u0, mesh, p.chi_fn, 1, 1, eps, Variant::smoothed);
    r.h1 = norm(*mesh, w, NormKind::H1, 2.0, 5);
    r.ref_h1 = norm_scale(*mesh, *u0, NormKind::H1);
  }
  return r;
}

BvpPoint bvp_point_fe(const Sweep& s, const Problem& p, BoundaryKind kind, double eps, const BvpQuantities& q) {
  const int n = s.cells_for(eps, p.a.components());
  const Level coarse = solve_level(s, p, kind, eps, n);
  const Level fine = solve_level(s, p, kind, eps, 2 * n);
  const Mesh& mf = *fine.mesh;
  const int d = s.dim();
  const int m = p.a.components();
  BvpPoint r;
  r.h = mf.h();
  r.nullspace_defect = std::max(coarse.info.nullspace_defect, fine.info.nullspace_defect);
  r.compatibility = std::max(coarse.info.compatibility_after, fine.info.compatibility_after);
  LinearCombination df, dc, dd;
  df.add(1.0, *fine.ue).add(-1.0, *fine.u0);
  dc.add(1.0, *coarse.ue).add(-1.0, *coarse.u0);
  dd.add(1.0, dc).add(-1.0, df);
  if (q.l2) {
    r.l2 = norm(mf, df, NormKind::L2);
    r.l2_est = norm(mf, dd, NormKind::L2) / 3.0;
    r.ref_l2 = norm_scale(mf, *fine.u0, NormKind::L2);
  }
  if (q.lp) {
    r.lp = norm(mf, df, NormKind::Lp, q.p);
    r.lp_est = norm(mf, dd, NormKind::Lp, q.p) / 3.0;
    r.ref_lp = norm_scale(mf, *fine.u0, NormKind::Lp, q.p);
    if (q.lp_extra) {
      r.lq = norm(mf, df, NormKind::Lp, kFourThirds);
      r.lq_est = norm(mf, dd, NormKind::Lp, kFourThirds) / 3.0;
      r.ref_lq = norm_scale(mf, *fine.u0, NormKind::Lp, kFourThirds);
    }
  }
  if (q.h1) {
    const Expansion wf(*fine.ue, *fine.u0, fine.mesh, p.chi_fn, d, m, eps, Variant::smoothed);
    const Expansion wc(*coarse.ue, *coarse.u0, coarse.mesh, p.chi_fn, d, m, eps, Variant::smoothed);
    LinearCombination dw;
    dw.add(1.0, wc).add(-1.0, wf);
    r.h1 = norm(mf, wf, NormKind::H1);
    r.h1_est = norm(mf, dw, NormKind::H1);
    r.ref_h1 = norm_scale(mf, *fine.u0, NormKind::H1);
  }
  return r;
}

std::vector<BvpPoint> bvp_sweep(const Sweep& s, const Problem& p, BoundaryKind kind, const BvpQuantities& q,
                                bool oracle) {
  std::vector<BvpPoint> out(s.eps.size());
  parallel_for(static_cast<int>(s.eps.size()), s.jobs, [&](int k) {
    out[k] = oracle ? bvp_point_oracle(s, p, kind, s.eps[k], q) : bvp_point_fe(s, p, kind, s.eps[k], q);
  });
  return out;
}

void add_points(const Sweep& s, RateStudy& st, const std::vector<BvpPoint>& pts, double BvpPoint::*value,
                double BvpPoint::*estimate, double BvpPoint::*ref) {
  double scale = 1.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const BvpPoint& b = pts[k];
    st.points.push_back(b.exact ? exact_point(s.eps[k], b.h, b.*value)
                                : make_point(s, s.eps[k], b.h, b.*value, b.*estimate));
    scale = std::max(scale, b.*ref);
  }
  st.grade(1e-9 * scale);
}

bool oracle_for(const Sweep& s, const Problem& p, BoundaryKind kind) {
  if (!p.cosine) return false;
  return kind == BoundaryKind::dirichlet ? s.data == "unit-load" : s.data == "manufactured";
}

Json summary_for(const Sweep& s, const Problem& p, bool oracle) {
  return {{"sweep", result_settings(s)}, {"cell", p.cell_summary}, {"oracle", oracle}};
}

}  // namespace

StudyReport run_dirichlet_rates(const Sweep& s) {
  if (s.domain != Shape::interval && s.domain != Shape::square && s.domain != Shape::lshape) {
    throw ValidationError("dirichlet rates run on the interval, the square or the L-shape");
  }
  const Problem p = make_problem(s, BoundaryKind::dirichlet);
  const bool oracle = oracle_for(s, p, BoundaryKind::dirichlet);
  BvpQuantities q;
  q.l2 = q.h1 = true;
  const auto pts = bvp_sweep(s, p, BoundaryKind::dirichlet, q, oracle);
  const bool graded = s.domain != Shape::lshape;
  StudyReport r;
  r.experiment = "dirichlet";
  r.summary = summary_for(s, p, oracle);
  RateStudy l2 = make_study("L2", "||u_eps - u0||_L2", {0.8, 1.2}, graded);
  add_points(s, l2, pts, &BvpPoint::l2, &BvpPoint::l2_est, &BvpPoint::ref_l2);
  RateStudy h1 = make_study("H1", "||w_eps||_H1 (smoothed)", {0.4, 0.7}, graded);
  add_points(s, h1, pts, &BvpPoint::h1, &BvpPoint::h1_est, &BvpPoint::ref_h1);
  if (oracle) {
    r.checks.push_back(monotone_check(l2));
    r.checks.push_back(monotone_check(h1));
  }
  r.studies = {std::move(l2), std::move(h1)};
  return r;
}

StudyReport run_neumann_rates(const Sweep& s) {
  if (s.data != "manufactured") throw ValidationError("neumann rates use manufactured data");
  const Problem p = make_problem(s, BoundaryKind::neumann);
  const bool oracle = oracle_for(s, p, BoundaryKind::neumann);
  BvpQuantities q;
  q.l2 = q.h1 = true;
  const auto pts = bvp_sweep(s, p, BoundaryKind::neumann, q, oracle);
  const bool graded = s.domain != Shape::lshape;
  StudyReport r;
  r.experiment = "neumann";
  r.summary = summary_for(s, p, oracle);
  RateStudy h1 = make_study("H1", "||w_eps||_H1 (smoothed)", {0.4, 0.7}, graded);
  add_points(s, h1, pts, &BvpPoint::h1, &BvpPoint::h1_est, &BvpPoint::ref_h1);
  RateStudy l2 = make_study("L2", "||u_eps - u0||_L2", {0.8, 1.2}, false);
  add_points(s, l2, pts, &BvpPoint::l2, &BvpPoint::l2_est, &BvpPoint::ref_l2);
  if (!oracle) {
    Check c;
    c.name = "nullspace-orthogonality";
    c.limit = 1e-8;
    for (const auto& b : pts) c.value = std::max(c.value, b.nullspace_defect);
    c.pass = c.value <= c.limit;
    c.detail = "max |<u, r>| over the nullspace basis, all eps";
    r.checks.push_back(c);
  } else {
    r.checks.push_back(monotone_check(h1));
  }
  r.studies = {std::move(h1), std::move(l2)};
  return r;
}

StudyReport run_Lp_rates(const Sweep& s) {
  const Problem p = make_problem(s, BoundaryKind::dirichlet);
  if (!p.a.symmetric()) throw ValidationError("L^p rates need a symmetric coefficient");
  const bool oracle = oracle_for(s, p, BoundaryKind::dirichlet);
  const int d = s.dim();
  BvpQuantities q;
  q.lp = true;
  q.p = d == 1 ? 2.0 : 2.0 * d / (d - 1.0);
  q.lp_extra = d == 2;
  const auto pts = bvp_sweep(s, p, BoundaryKind::dirichlet, q, oracle);
  StudyReport r;
  r.experiment = "lp";
  r.summary = summary_for(s, p, oracle);
  r.summary["p"] = q.p;
  const std::array<double, 2> window = s.domain == Shape::lshape ? std::array{0.7, 1.2} : std::array{0.8, 1.2};
  RateStudy lp = make_study("Lp", "||u_eps - u0||_Lp, p=" + format_double(q.p), window, true);
  add_points(s, lp, pts, &BvpPoint::lp, &BvpPoint::lp_est, &BvpPoint::ref_lp);
  r.studies.push_back(std::move(lp));
  if (q.lp_extra) {
    RateStudy lq = make_study("Lp-4/3", "||u_eps - u0||_Lp, p=4/3", window, false);
    add_points(s, lq, pts, &BvpPoint::lq, &BvpPoint::lq_est, &BvpPoint::ref_lq);
    r.studies.push_back(std::move(lq));
  }
  return r;
}

StudyReport run_elasticity_rates(const Sweep& s) {
  const CoefficientField a = s.coefficient();
  if (a.dim() != 2 || a.components() != 2 || a.ellipticity_class() != EllipticityClass::elasticity) {
    throw ValidationError("elasticity rates need an m = d = 2 elasticity family");
  }
  if (s.data != "manufactured") throw ValidationError("elasticity rates use manufactured data");
  const Problem p = make_problem(s, BoundaryKind::dirichlet);
  BvpQuantities q;
  q.h1 = q.lp = true;
  q.p = 4.0;
  const auto pts = bvp_sweep(s, p, BoundaryKind::dirichlet, q, false);
  StudyReport r;
  r.experiment = "elasticity";
  r.summary = summary_for(s, p, false);
  RateStudy h1 = make_study("H1", "||w_eps||_H1 (smoothed)", {0.4, 0.7}, true);
  add_points(s, h1, pts, &BvpPoint::h1, &BvpPoint::h1_est, &BvpPoint::ref_h1);
  RateStudy lp = make_study("Lp", "||u_eps - u0||_Lp, p=4", {0.7, 1.2}, true);
  add_points(s, lp, pts, &BvpPoint::lp, &BvpPoint::lp_est, &BvpPoint::ref_lp);
  r.studies = {std::move(h1), std::move(lp)};

  // Neumann solves with rigid modes on the measurement mesh of each eps
  const Problem pn = make_problem(s, BoundaryKind::neumann);
  std::vector<SolveInfo> infos(s.eps.size());
  parallel_for(static_cast<int>(s.eps.size()), s.jobs, [&](int k) {
    const double e = s.eps[k];
    const auto mesh = std::make_shared<const Mesh>(Mesh::make(s.domain, 2, s.cells_for(e, 2)));
    infos[k] = solve_bvp(make_spec(s, pn, BoundaryKind::neumann, Coefficient::oscillatory(pn.form, e), e), mesh,
                         s.tol)
                   .info;
  });
  Check orth{"rigid-orthogonality", true, 0.0, 1e-8, "max |<u, r>| over rigid modes, all eps"};
  Check comp{"compatibility", true, 0.0, 1e-8, "traction defect after projection, all eps"};
  for (const auto& i : infos) {
    orth.value = std::max(orth.value, i.nullspace_defect);
    comp.value = std::max(comp.value, i.compatibility_after);
  }
  orth.pass = orth.value <= orth.limit;
  comp.pass = comp.value <= comp.limit;
  r.checks = {orth, comp};
  return r;
}

// ---------------------------------------------------------------------------
// Dirichlet corrector study
// ---------------------------------------------------------------------------

namespace {

struct CorrectorPoint {
  double h = 0.0;
  double dev = 0.0, dev_est = 0.0;
  double h1 = 0.0, h1_est = 0.0;
  double ref = 1.0;
  bool exact = false;
};

CorrectorPoint corrector_oracle(const Sweep& s, const Problem& p, double eps) {
  const oned::CosineCoefficient c = *p.cosine;
  const int n = s.cells_for(eps);
  const auto mesh = std::make_shared<const Mesh>(Mesh::interval(n));
  auto sol = std::make_shared<oned::DirichletUnitLoad>(c, eps);
  CorrectorPoint r;
  r.h = mesh->h();
  r.exact = true;
  for (Index k = 0; k < mesh->num_nodes(); ++k) {
    const double x = mesh->node(k)[0];
    r.dev = std::max(r.dev, std::abs(oned::dirichlet_corrector(c, eps, x) - x));
  }
  const double ahat = c.ahat();
  const ClosedFormField w(1, 1, [sol, c, eps, ahat](const Point& x, double* v, double* g) {
    const double phi = oned::dirichlet_corrector(c, eps, x[0]) - x[0];
    const double dphi = oned::dirichlet_corrector_derivative(c, eps, x[0]) - 1.0;
    if (v) v[0] = sol->u(x[0]) - sol->u0(x[0]) - phi * sol->du0(x[0]);
    if (g) g[0] = sol->du(x[0]) - sol->du0(x[0]) - dphi * sol->du0(x[0]) + phi / ahat;
  });
  r.h1 = norm(*mesh, w, NormKind::H1, 2.0, 5);
  return r;
}

double nodal_difference(const FEField& coarse, const FEField& fine, int components) {
  const Mesh& mc = coarse.mesh();
  const Mesh& mf = fine.mesh();
  double s = 0.0;
  for (Index k = 0; k < mc.num_nodes(); ++k) {
    const auto gi = mc.grid_index(k);
    const Index kf = mf.node_at(2 * gi[0], 2 * gi[1]);
    for (int a = 0; a < components; ++a) s = std::max(s, std::abs(coarse(k, a) - fine(kf, a)));
  }
  return s;
}

CorrectorPoint corrector_fe(const Sweep& s, const Problem& p, double eps) {
  const int n = s.cells_for(eps, p.a.components());
  const Level coarse = solve_level(s, p, BoundaryKind::dirichlet, eps, n);
  const Level fine = solve_level(s, p, BoundaryKind::dirichlet, eps, 2 * n);
  const BoundaryCorrector pc = solve_dirichlet_corrector(p.form, eps, coarse.mesh, s.tol);
  const BoundaryCorrector pf = solve_dirichlet_corrector(p.form, eps, fine.mesh, s.tol);
  const int d = s.dim();
  const int m = p.a.components();
  CorrectorPoint r;
  r.h = fine.mesh->h();
  r.dev = pf.max_deviation();
  for (std::size_t c = 0; c < pc.columns.size(); ++c) {
    r.dev_est = std::max(r.dev_est, nodal_difference(pc.columns[c], pf.columns[c], m) / 3.0);
  }
  const Expansion wf(*fine.ue, *fine.u0, fine.mesh, nullptr, d, m, eps, Variant::dirichlet_corrector, &pf);
  const Expansion wc(*coarse.ue, *coarse.u0, coarse.mesh, nullptr, d, m, eps, Variant::dirichlet_corrector, &pc);
  LinearCombination dw;
  dw.add(1.0, wc).add(-1.0, wf);
  r.h1 = norm(*fine.mesh, wf, NormKind::H1);
  r.h1_est = norm(*fine.mesh, dw, NormKind::H1);
  r.ref = norm_scale(*fine.mesh, *fine.u0, NormKind::H1);
  return r;
}

}  // namespace

StudyReport run_corrector_study(const Sweep& s) {
  if (s.domain != Shape::interval && s.domain != Shape::square) {
    throw ValidationError("the corrector study runs on the interval or the square");
  }
  const Problem p = make_problem(s, BoundaryKind::dirichlet);
  if (!p.form.symmetric()) throw ValidationError("the corrector study needs a symmetric coefficient");
  const bool oracle = oracle_for(s, p, BoundaryKind::dirichlet);
  std::vector<CorrectorPoint> pts(s.eps.size());
  parallel_for(static_cast<int>(s.eps.size()), s.jobs, [&](int k) {
    pts[k] = oracle ? corrector_oracle(s, p, s.eps[k]) : corrector_fe(s, p, s.eps[k]);
  });
  StudyReport r;
  r.experiment = "corrector";
  r.summary = summary_for(s, p, oracle);
  RateStudy dev = make_study("deviation", "max ||Phi - P||_inf", {0.8, 1.2}, true);
  RateStudy h1 = make_study("variant-H1", "||u_eps - u0 - (Phi - P) grad u0||_H1", {0.8, 1.2}, true);
  double ref = 1.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto& c = pts[k];
    const double e = s.eps[k];
    dev.points.push_back(c.exact ? exact_point(e, c.h, c.dev) : make_point(s, e, c.h, c.dev, c.dev_est));
    h1.points.push_back(c.exact ? exact_point(e, c.h, c.h1) : make_point(s, e, c.h, c.h1, c.h1_est));
    ref = std::max(ref, c.ref);
  }
  dev.grade(1e-9);
  h1.grade(1e-9 * ref);
  if (oracle) {
    r.checks.push_back(monotone_check(dev));
    r.checks.push_back(monotone_check(h1));
  }
  r.studies = {std::move(dev), std::move(h1)};
  return r;
}

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------

namespace {

/// ||T_eps - T_0|| in the M-norm, T = K^{-1} M, by power iteration.
double resolvent_difference(const DirichletOperator& ke, const DirichletOperator& k0, const SparseMatrix& mass,
                            std::uint64_t seed) {
  const Mesh& mesh = *ke.mesh();
  const Index n = mass.rows();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd x(n);
  for (Index k = 0; k < n; ++k) x[k] = uni(rng);
  const int m = static_cast<int>(n / mesh.num_nodes());
  for (Index node = 0; node < mesh.num_nodes(); ++node)
    if (mesh.on_boundary(node))
      for (int a = 0; a < m; ++a) x[node * m + a] = 0.0;
  auto mnorm = [&](const Eigen::VectorXd& v) { return std::sqrt(v.dot(mass * v)); };
  x /= mnorm(x);
  double est = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd load = mass * x;
    const Eigen::VectorXd y = ke.solve_load(load, nullptr).u.values - k0.solve_load(load, nullptr).u.values;
    const double ny = mnorm(y);
    if (ny == 0.0) return 0.0;
    const double prev = est;
    est = ny;
    x = y / ny;
    if (it > 5 && std::abs(est - prev) <= 1e-8 * est) break;
  }
  return est;
}

struct EigenPoint {
  double h = 0.0;
  std::vector<double> lam_e, lam_0, diff, est;
  bool multiplicity = false;
  double minimax_ratio = 0.0;  // max_k |dsigma_k| / ||T_eps - T_0||
};

EigenPoint eigen_point(const Sweep& s, const Problem& p, double eps) {
  const int K = s.eigen_count;
  const int n = s.cells_for(eps, p.a.components());
  EigenPoint r;
  std::vector<double> dc;
  for (int level = 0; level < 2; ++level) {
    const auto mesh = std::make_shared<const Mesh>(Mesh::make(s.domain, s.dim(), level ? 2 * n : n));
    check_resolution(*mesh, eps);
    const Coefficient ce = Coefficient::oscillatory(p.form, eps);
    const Coefficient c0 = Coefficient::constant_tensor(p.ahat);
    const SpectralResult se = solve_eigen_dirichlet(ce, mesh, K, s.tol, s.seed);
    const SpectralResult s0 = solve_eigen_dirichlet(c0, mesh, K, s.tol, s.seed);
    std::vector<double> diff(K);
    for (int k = 0; k < K; ++k) {
      diff[k] = std::abs(se.eigenvalues[k] - s0.eigenvalues[k]);
      if (se.multiplicity[k] || s0.multiplicity[k]) r.multiplicity = true;
    }
    if (level == 0) {
      dc = diff;
      const DirichletOperator ke(mesh, ce, eps), k0(mesh, c0);
      const SparseMatrix mass = assemble_mass(*mesh, p.a.components());
      const double dt = resolvent_difference(ke, k0, mass, s.seed);
      for (int k = 0; k < K; ++k) {
        const double ds = std::abs(1.0 / se.eigenvalues[k] - 1.0 / s0.eigenvalues[k]);
        r.minimax_ratio = std::max(r.minimax_ratio, dt > 0.0 ? ds / dt : (ds > 0.0 ? 1e300 : 0.0));
      }
    } else {
      r.h = mesh->h();
      r.lam_e = se.eigenvalues;
      r.lam_0 = s0.eigenvalues;
      r.diff = diff;
      r.est.resize(K);
      for (int k = 0; k < K; ++k) r.est[k] = std::abs(dc[k] - diff[k]) / 3.0;
    }
  }
  return r;
}

}  // namespace

StudyReport run_eigen_rates(const Sweep& s) {
  const Problem p = make_problem(s, BoundaryKind::dirichlet);
  if (!p.a.symmetric()) throw ValidationError("eigenvalue rates need a symmetric coefficient");
  const int K = s.eigen_count;
  std::vector<EigenPoint> pts(s.eps.size());
  parallel_for(static_cast<int>(s.eps.size()), s.jobs, [&](int k) { pts[k] = eigen_point(s, p, s.eps[k]); });
  StudyReport r;
  r.experiment = "eigen";
  r.summary = summary_for(s, p, false);
  std::vector<double> constants(K, 0.0);
  bool crossing = false;
  for (int k = 0; k < K; ++k) {
    RateStudy st = make_study("lambda" + std::to_string(k + 1), "|lambda_eps,k - lambda_0,k|",
                              {s.dim() == 1 ? 0.8 : 0.7, 1.2}, true);
    for (std::size_t e = 0; e < pts.size(); ++e) {
      const EigenPoint& ep = pts[e];
      st.points.push_back(make_point(s, s.eps[e], ep.h, ep.diff[k], ep.est[k]));
      if (st.points.back().admitted) {
        constants[k] = std::max(constants[k], ep.diff[k] / (s.eps[e] * std::pow(ep.lam_0[k], 1.5)));
      }
      crossing = crossing || ep.multiplicity;
    }
    st.grade(1e-9 * pts.front().lam_0[k]);
    r.studies.push_back(std::move(st));
  }
  if (crossing) {
    r.summary["multiplicity"] = "eigenvalues within 1e-8 of a neighbour; paired by sorted order";
  }
  Json lam = Json::array();
  for (std::size_t e = 0; e < pts.size(); ++e) {
    lam.push_back({{"eps", s.eps[e]}, {"lambda_eps", pts[e].lam_e}, {"lambda_0", pts[e].lam_0}});
  }
  r.summary["eigenvalues"] = lam;
  r.summary["normalized_constants"] = constants;

  Check ratio;
  ratio.name = "normalized-constants";
  ratio.limit = 10.0;
  const double cmax = *std::max_element(constants.begin(), constants.end());
  const double cmin = *std::min_element(constants.begin(), constants.end());
  bool degenerate = true;
  for (const auto& st : r.studies) degenerate = degenerate && st.verdict == Verdict::degenerate_zero;
  ratio.value = cmin > 0.0 ? cmax / cmin : (degenerate ? 1.0 : std::numeric_limits<double>::infinity());
  ratio.pass = ratio.value <= ratio.limit;
  ratio.detail = "max/min over k of |dlambda| / (eps lambda0^{3/2})";
  r.checks.push_back(ratio);

  Check mm;
  mm.name = "minimax";
  mm.limit = 1.1;
  for (const auto& ep : pts) mm.value = std::max(mm.value, ep.minimax_ratio);
  mm.pass = mm.value <= mm.limit;
  mm.detail = "|1/lambda_eps - 1/lambda_0| over ||T_eps - T_0|| (power iteration), all k and eps";
  r.checks.push_back(mm);
  return r;
}

SingleSolve solve_single(const Sweep& s, double eps, BoundaryKind kind) {
  const Problem p = make_problem(s, kind, eps);
  const int n = s.cells_for(eps, p.a.components());
  Level l = solve_level(s, p, kind, eps, n);
  const int d = s.dim();
  const int m = p.a.components();
  LinearCombination diff;
  diff.add(1.0, *l.ue).add(-1.0, *l.u0);
  const Expansion w(*l.ue, *l.u0, l.mesh, p.chi_fn, d, m, eps, Variant::smoothed);
  SingleSolve r;
  r.mesh = l.mesh;
  r.summary = {{"sweep", result_settings(s)},
               {"eps", eps},
               {"boundary", kind == BoundaryKind::dirichlet ? "dirichlet" : "neumann"},
               {"cells", n},
               {"h", l.mesh->h()},
               {"dofs", l.ue->values.size()},
               {"cell", p.cell_summary},
               {"L2_u_eps_minus_u0", norm(*l.mesh, diff, NormKind::L2)},
               {"H1_smoothed_expansion", norm(*l.mesh, w, NormKind::H1)},
               {"solver",
                {{"name", l.info.solver},
                 {"residual", l.info.residual},
                 {"energy", l.info.energy},
                 {"compatibility_before", l.info.compatibility_before},
                 {"compatibility_after", l.info.compatibility_after},
                 {"nullspace_defect", l.info.nullspace_defect}}}};
  r.fields.push_back(std::move(*l.ue));
  r.fields.push_back(std::move(*l.u0));
  return r;
}

nlohmann::json eigen_single(const Sweep& s, double eps) {
  const Problem p = make_problem(s, BoundaryKind::dirichlet, eps);
  if (!p.a.symmetric()) throw ValidationError("eigenvalues need a symmetric coefficient");
  const int n = s.cells_for(eps, p.a.components());
  const auto mesh = std::make_shared<const Mesh>(Mesh::make(s.domain, s.dim(), n));
  const SpectralResult se = solve_eigen_dirichlet(Coefficient::oscillatory(p.form, eps), mesh, s.eigen_count,
                                                  s.tol, s.seed);
  const SpectralResult s0 =
      solve_eigen_dirichlet(Coefficient::constant_tensor(p.ahat), mesh, s.eigen_count, s.tol, s.seed);
  std::vector<double> diff;
  for (int k = 0; k < s.eigen_count; ++k) diff.push_back(std::abs(se.eigenvalues[k] - s0.eigenvalues[k]));
  return {{"sweep", result_settings(s)},    {"eps", eps},
          {"cells", n},              {"h", mesh->h()},
          {"cell", p.cell_summary},  {"lambda_eps", se.eigenvalues},
          {"lambda_0", s0.eigenvalues}, {"difference", diff},
          {"residuals_eps", se.residuals}, {"residuals_0", s0.residuals},
          {"method", se.method}};
}

// ---------------------------------------------------------------------------
// Dispatch and output
// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> n = {"dirichlet", "neumann", "lp", "eigen", "corrector", "elasticity"};
  return n;
}

StudyReport run_experiment(const std::string& name, const Sweep& sweep) {
  if (name == "dirichlet") return run_dirichlet_rates(sweep);
  if (name == "neumann") return run_neumann_rates(sweep);
  if (name == "lp") return run_Lp_rates(sweep);
  if (name == "eigen") return run_eigen_rates(sweep);
  if (name == "corrector") return run_corrector_study(sweep);
  if (name == "elasticity") return run_elasticity_rates(sweep);
  throw ValidationError("unknown experiment '" + name + "'");
}

std::string study_csv(const StudyReport& report) {
  std::string out = "eps,h,quantity,value,gate-status\r\n";
  for (const auto& st : report.studies) {
    for (const auto& p : st.points) {
      const std::string row = format_double(p.eps) + "," + format_double(p.h) + ",";
      out += row + st.name + "," + format_double(p.value) + "," + p.gate + "\r\n";
      out += row + st.name + ".estimate," + format_double(p.estimate) + "," + p.gate + "\r\n";
    }
  }
  return out;
}

std::string study_svg(const StudyReport& report) {
  constexpr double W = 640, H = 440, L = 70, R = 20, T = 30, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& st : report.studies)
    for (const auto& p : st.points) {
      if (!(p.value > 0.0)) continue;
      xmin = std::min(xmin, std::log10(p.eps));
      xmax = std::max(xmax, std::log10(p.eps));
      ymin = std::min(ymin, std::log10(p.value));
      ymax = std::max(ymax, std::log10(p.value));
    }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << report.experiment
     << "</text>\n";
  if (xmin > xmax) {
    os << "</svg>\n";
    return os.str();
  }
  xmin = std::floor(xmin * 2) / 2;
  xmax = std::ceil(xmax * 2) / 2;
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (xmax == xmin) xmax += 0.5;
  if (ymax == ymin) ymax += 1.0;
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
  os << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
     << "\" height=\"" << H - T - B << "\"/></g>\n";
  os << "<g font-size=\"11\" text-anchor=\"middle\">\n";
  for (double lx = xmin; lx <= xmax + 1e-9; lx += 0.5) {
    os << "<text x=\"" << px(lx) << "\" y=\"" << H - B + 16 << "\">1e" << format_double(lx) << "</text>\n";
  }
  for (double ly = ymin; ly <= ymax + 1e-9; ly += 1.0) {
    os << "<text x=\"" << L - 24 << "\" y=\"" << py(ly) + 4 << "\">1e" << static_cast<int>(ly) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\">eps</text>\n</g>\n";
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  int ci = 0;
  for (const auto& st : report.studies) {
    const char* col = colors[ci++ % 6];
    std::string path;
    for (const auto& p : st.points) {
      if (!(p.value > 0.0)) continue;
      const double x = px(std::log10(p.eps)), y = py(std::log10(p.value));
      path += (path.empty() ? "M" : " L") + format_double(x) + " " + format_double(y);
      os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << (p.admitted ? col : "white")
         << "\" stroke=\"" << col << "\"/>\n";
    }
    if (!path.empty()) os << "<path d=\"" << path << "\" stroke=\"" << col << "\" fill=\"none\"/>\n";
    if (st.fit) {
      const double y0 = st.fit->intercept / std::log(10.0);
      auto fy = [&](double lx) { return py(y0 + st.fit->slope * lx); };
      os << "<line x1=\"" << px(xmin) << "\" y1=\"" << fy(xmin) << "\" x2=\"" << px(xmax) << "\" y2=\""
         << fy(xmax) << "\" stroke=\"" << col << "\" stroke-dasharray=\"5,4\"/>\n";
    }
    os << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 14 * (ci - 1) << "\" font-size=\"11\" fill=\"" << col
       << "\">" << st.name;
    if (st.fit) os << " slope " << format_double(std::round(st.fit->slope * 1000) / 1000);
    os << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace homlab
