#include "homlab/twoscale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace homlab {

// ---------------------------------------------------------------------------
// Mollifier and S_eps
// ---------------------------------------------------------------------------

double Mollifier::profile(double z2) {
  const double t = 4.0 * z2;
  return t < 1.0 ? std::exp(-1.0 / (1.0 - t)) : 0.0;
}

namespace {

// int over |z| < 1/2 of the profile, d = 1 or 2 (radial Gauss quadrature).
double profile_mass(int d) {
  const GaussRule& r = gauss_rule(6);
  const int panels = 64;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = 0.5 * p / panels;
    const double hi = 0.5 * (p + 1) / panels;
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const double rho = lo + (hi - lo) * r.points[q];
      const double w = r.weights[q] * (hi - lo);
      s += w * Mollifier::profile(rho * rho) * (d == 1 ? 2.0 : 2.0 * kPi * rho);
    }
  }
  return s;
}

}  // namespace

Mollifier Mollifier::build(int d, double eps, double h) {
  if (!(eps > 0.0) || !(h > 0.0)) throw ValidationError("mollifier needs eps > 0 and h > 0");
  if (eps < 2.0 * h * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "smoothing kernel under-resolved: eps = " << eps << " < 2h = " << 2.0 * h;
    throw ValidationError(os.str());
  }
  Mollifier mo;
  mo.d = d;
  mo.eps = eps;
  mo.h = h;
  const int reach = static_cast<int>(std::ceil(0.5 * eps / h));
  double sum = 0.0;
  for (int j = (d == 1 ? 0 : -reach); j <= (d == 1 ? 0 : reach); ++j)
    for (int i = -reach; i <= reach; ++i) {
      const double zx = i * h / eps;
      const double zy = j * h / eps;
      const double w = profile(zx * zx + zy * zy);
      if (w <= 0.0) continue;
      mo.offsets.push_back({i, j});
      mo.weights.push_back(w);
      sum += w;
    }
  const double cell = d == 1 ? h / eps : (h / eps) * (h / eps);
  mo.mass_defect = sum * cell / profile_mass(d) - 1.0;
  for (double& w : mo.weights) w /= sum;
  return mo;
}

namespace {

FEField smooth_once(const FEField& f, const Mollifier& mo) {
  const Mesh& mesh = f.mesh();
  const int m = f.components();
  const int ex = mesh.grid_extent();
  const int ey = mesh.dim() == 1 ? 1 : ex;
  std::vector<Index> grid(static_cast<std::size_t>(ex) * ey);
  for (int j = 0; j < ey; ++j)
    for (int i = 0; i < ex; ++i) grid[static_cast<std::size_t>(j) * ex + i] = mesh.node_at(i, j);
  int reach = 0;
  std::vector<std::ptrdiff_t> lin(mo.offsets.size());
  for (std::size_t o = 0; o < mo.offsets.size(); ++o) {
    reach = std::max({reach, std::abs(mo.offsets[o][0]), std::abs(mo.offsets[o][1])});
    lin[o] = mo.offsets[o][0] + static_cast<std::ptrdiff_t>(mo.offsets[o][1]) * ex;
  }
  const int ry = mesh.dim() == 1 ? 0 : reach;
  const int corner = (ex - 1) / 2;
  // stencil box inside the active grid: no wrap or reflection needed
  auto interior = [&](int i, int j) {
    if (i < reach || i + reach >= ex || j < ry || j + ry >= ey) return false;
    return mesh.shape() != Shape::lshape || i + reach <= corner || j + ry <= corner;
  };
  FEField out(f.mesh_ptr(), m);
  for (Index k = 0; k < mesh.num_nodes(); ++k) {
    const auto g = mesh.grid_index(k);
    double* dst = &out.values[k * m];
    if (interior(g[0], g[1])) {
      const Index* base = grid.data() + static_cast<std::ptrdiff_t>(g[1]) * ex + g[0];
      for (std::size_t o = 0; o < lin.size(); ++o) {
        const double* v = &f.values[base[lin[o]] * m];
        for (int a = 0; a < m; ++a) dst[a] += mo.weights[o] * v[a];
      }
      continue;
    }
    for (std::size_t o = 0; o < mo.offsets.size(); ++o) {
      const auto r = mesh.reflect_index(g[0] + mo.offsets[o][0], g[1] + mo.offsets[o][1]);
      const Index src = grid[static_cast<std::size_t>(r[1]) * ex + r[0]];
      for (int a = 0; a < m; ++a) dst[a] += mo.weights[o] * f.values[src * m + a];
    }
  }
  return out;
}

}  // namespace

FEField smooth(const FEField& f, double eps, int passes) {
  if (passes < 1 || passes > 2) throw ValidationError("smoothing passes must be 1 or 2");
  const Mollifier mo = Mollifier::build(f.mesh().dim(), eps, f.mesh().h());
  FEField out = smooth_once(f, mo);
  if (passes == 2) out = smooth_once(out, mo);
  return out;
}

FEField smooth(const FEField::PointFn& f, int m, std::shared_ptr<const Mesh> mesh, double eps, int passes) {
  return smooth(FEField::interpolate(std::move(mesh), m, f), eps, passes);
}

// ---------------------------------------------------------------------------
// Cutoff
// ---------------------------------------------------------------------------

double Cutoff::ramp(double dist, double eps) {
  const double t = std::clamp((dist - 3.0 * eps) / eps, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

namespace {

double diameter(const Mesh& mesh) {
  switch (mesh.shape()) {
    case Shape::interval: return mesh.length();
    case Shape::square: return std::sqrt(2.0) * mesh.length();
    case Shape::lshape: return std::sqrt(2.0);
    case Shape::torus: break;
  }
  throw ValidationError("cutoff needs a bounded domain");
}

}  // namespace

Cutoff build_cutoff(std::shared_ptr<const Mesh> mesh, double eps) {
  if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
  if (8.0 * eps > diameter(*mesh) * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "epsilon " << eps << " too large for the domain (8 eps > diameter)";
    throw ValidationError(os.str());
  }
  Cutoff c;
  c.eps = eps;
  auto eta = std::make_shared<FEField>(mesh, 1);
  for (Index k = 0; k < mesh->num_nodes(); ++k) {
    eta->values[k] = Cutoff::ramp(mesh->boundary_distance(mesh->node(k)), eps);
  }
  const int d = mesh->dim();
  double gmax = 0.0;
  double grad[2];
  // one-point (cell midpoint) gradient of the interpolant
  for (Index cell = 0; cell < mesh->num_cells(); ++cell) {
    eta->eval(*mesh, cell, {0.5, d == 1 ? 0.0 : 0.5}, nullptr, grad);
    gmax = std::max(gmax, std::sqrt(grad[0] * grad[0] + (d == 2 ? grad[1] * grad[1] : 0.0)));
  }
  c.gradient_constant = gmax * eps;
  c.eta = std::move(eta);
  return c;
}

// ---------------------------------------------------------------------------
// Correctors
// ---------------------------------------------------------------------------

CorrectorFn corrector_fn(const CorrectorSet& chi) {
  return [&chi](const Point& y, int j, int beta, double* value, double* grad) {
    chi.eval(y, j, beta, value, grad);
  };
}

double BoundaryCorrector::max_deviation() const {
  double s = 0.0;
  for (double v : deviation) s = std::max(s, v);
  return s;
}

FEField BoundaryCorrector::deviation_field(int j, int beta) const {
  FEField out = column(j, beta);
  for (Index k = 0; k < mesh->num_nodes(); ++k) out(k, beta) -= mesh->node(k)[j];
  return out;
}

nlohmann::json BoundaryCorrector::to_json() const {
  return {{"kind", kind},
          {"eps", eps},
          {"d", d},
          {"m", m},
          {"deviation_inf", deviation},
          {"max_deviation", max_deviation()},
          {"max_gradient", max_gradient},
          {"anchor_node", anchor}};
}

namespace {

void finish_statistics(BoundaryCorrector& bc) {
  for (int beta = 0; beta < bc.m; ++beta)
    for (int j = 0; j < bc.d; ++j) {
      const FEField dev = bc.deviation_field(j, beta);
      bc.deviation.push_back(dev.values.cwiseAbs().maxCoeff());
      const FEField g = bc.column(j, beta).recovered_gradient();
      const int w = bc.m * bc.d;
      double gm = 0.0;
      for (Index k = 0; k < bc.mesh->num_nodes(); ++k) gm = std::max(gm, g.values.segment(k * w, w).norm());
      bc.max_gradient.push_back(gm);
    }
}

}  // namespace

BoundaryCorrector solve_dirichlet_corrector(const CoefficientField& a, double eps, std::shared_ptr<const Mesh> mesh,
                                            double tol) {
  if (a.dim() != mesh->dim()) throw ValidationError("coefficient and mesh dimensions differ");
  const int d = a.dim();
  const int m = a.components();
  const CoefficientField form = solver_form(a, BoundaryKind::dirichlet);
  const DirichletOperator op(mesh, Coefficient::oscillatory(form, eps), eps);
  BoundaryCorrector bc;
  bc.mesh = mesh;
  bc.d = d;
  bc.m = m;
  bc.eps = eps;
  bc.kind = "dirichlet";
  for (int beta = 0; beta < m; ++beta)
    for (int j = 0; j < d; ++j) {
      const SourceFn p = [j, beta, m](const Point& x, double* v) {
        for (int al = 0; al < m; ++al) v[al] = al == beta ? x[j] : 0.0;
      };
      bc.columns.push_back(op.solve(nullptr, p, tol).u);
    }
  finish_statistics(bc);
  return bc;
}

BoundaryCorrector solve_neumann_corrector(const CoefficientField& a, const CoeffTensor& ahat, double eps,
                                          std::shared_ptr<const Mesh> mesh, double tol) {
  if (a.dim() != mesh->dim()) throw ValidationError("coefficient and mesh dimensions differ");
  if (!a.symmetric() || a.ellipticity_class() != EllipticityClass::legendre) {
    throw ValidationError("Neumann correctors need a symmetric Legendre-elliptic coefficient");
  }
  const int d = a.dim();
  const int m = a.components();
  BoundaryCorrector bc;
  bc.mesh = mesh;
  bc.d = d;
  bc.m = m;
  bc.eps = eps;
  bc.kind = "neumann";
  bc.anchor = mesh->anchor_node();
  const Point x0 = mesh->node(bc.anchor);
  for (int beta = 0; beta < m; ++beta)
    for (int j = 0; j < d; ++j) {
      BVPSpec spec;
      spec.coefficient = Coefficient::oscillatory(a, eps);
      spec.eps = eps;
      spec.boundary = BoundaryKind::neumann;
      spec.neumann = [ahat, d, m, j, beta](const Point&, const Point& n, double* g) {
        for (int al = 0; al < m; ++al) {
          g[al] = 0.0;
          for (int i = 0; i < d; ++i) g[al] += n[i] * ahat(i, j, al, beta);
        }
      };
      FEField psi = solve_neumann(spec, mesh, tol).u;
      for (int al = 0; al < m; ++al) {
        const double target = al == beta ? x0[j] : 0.0;
        const double shift = target - psi(bc.anchor, al);
        for (Index k = 0; k < mesh->num_nodes(); ++k) psi(k, al) += shift;
      }
      bc.columns.push_back(std::move(psi));
    }
  finish_statistics(bc);
  return bc;
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

std::string to_string(Variant v) {
  switch (v) {
    case Variant::smoothed: return "smoothed";
    case Variant::plain: return "plain";
    case Variant::dirichlet_corrector: return "dirichlet-corrector";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "smoothed") return Variant::smoothed;
  if (s == "plain") return Variant::plain;
  if (s == "dirichlet-corrector") return Variant::dirichlet_corrector;
  throw ValidationError("unknown expansion variant '" + s + "'");
}

FEField nodal_gradient(const Field& u0, std::shared_ptr<const Mesh> mesh) {
  const int m = u0.components();
  const int d = mesh->dim();
  const int w = m * d;
  FEField out(mesh, w);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(mesh->num_nodes());
  std::vector<double> g(w);
  for (Index c = 0; c < mesh->num_cells(); ++c) {
    const auto& nodes = mesh->cell_nodes(c);
    for (int q = 0; q < mesh->nodes_per_cell(); ++q) {
      const Point xi{static_cast<double>(q & 1), static_cast<double>((q >> 1) & 1)};
      u0.eval(*mesh, c, xi, nullptr, g.data());
      for (int r = 0; r < w; ++r) out.values[nodes[q] * w + r] += g[r];
      count[nodes[q]] += 1.0;
    }
  }
  for (Index k = 0; k < mesh->num_nodes(); ++k)
    for (int r = 0; r < w; ++r) out.values[k * w + r] /= count[k];
  return out;
}

Expansion::Expansion(const Field& u_eps, const Field& u0, std::shared_ptr<const Mesh> mesh, CorrectorFn chi, int d,
                     int m, double eps, Variant variant, const BoundaryCorrector* phi)
    : u_eps_(u_eps),
      u0_(u0),
      mesh_(std::move(mesh)),
      chi_(std::move(chi)),
      d_(d),
      m_(m),
      eps_(eps),
      variant_(variant),
      phi_(phi) {
  if (mesh_->dim() != d) throw ValidationError("expansion mesh dimension mismatch");
  if (u_eps.components() != m || u0.components() != m) throw ValidationError("expansion component mismatch");
  if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
  if (variant == Variant::dirichlet_corrector) {
    if (!phi_) throw ValidationError("corrector variant needs the Dirichlet corrector");
    if (phi_->mesh != mesh_) throw ValidationError("Dirichlet corrector lives on a different mesh");
  } else if (!chi_) {
    throw ValidationError("expansion needs the cell correctors");
  }
  FEField grad = nodal_gradient(u0, mesh_);
  if (variant == Variant::smoothed) {
    cutoff_ = build_cutoff(mesh_, eps);
    grad = smooth(grad, eps, 2);
    const int w = m * d;
    for (Index k = 0; k < mesh_->num_nodes(); ++k) grad.values.segment(k * w, w) *= cutoff_->eta->values[k];
  }
  g_ = std::make_unique<FEField>(std::move(grad));
}

void Expansion::correction(const Mesh& mesh, Index cell, const Point& xi, double* value, double* grad) const {
  double gv[8];
  double gg[16];
  g_->eval(mesh, cell, xi, gv, gg);  // gv[beta*d + j], gg[(beta*d + j)*d + k]
  for (int a = 0; a < m_; ++a) {
    if (value) value[a] = 0.0;
    if (grad)
      for (int k = 0; k < d_; ++k) grad[a * d_ + k] = 0.0;
  }
  const Point x = mesh.map(cell, xi);
  double cv[4];
  double cg[8];
  for (int beta = 0; beta < m_; ++beta)
    for (int j = 0; j < d_; ++j) {
      const int col = beta * d_ + j;
      const double gval = gv[col];
      if (variant_ == Variant::dirichlet_corrector) {
        phi_->column(j, beta).eval(mesh, cell, xi, cv, cg);
        cv[beta] -= x[j];
        cg[beta * d_ + j] -= 1.0;
        for (int a = 0; a < m_; ++a) {
          if (value) value[a] += cv[a] * gval;
          if (grad)
            for (int k = 0; k < d_; ++k) grad[a * d_ + k] += cg[a * d_ + k] * gval + cv[a] * gg[col * d_ + k];
        }
      } else {
        chi_({x[0] / eps_, d_ == 1 ? 0.0 : x[1] / eps_}, j, beta, cv, cg);
        for (int a = 0; a < m_; ++a) {
          if (value) value[a] += eps_ * cv[a] * gval;
          if (grad)
            for (int k = 0; k < d_; ++k) grad[a * d_ + k] += cg[a * d_ + k] * gval + eps_ * cv[a] * gg[col * d_ + k];
        }
      }
    }
}

void Expansion::eval(const Mesh& mesh, Index cell, const Point& xi, double* value, double* grad) const {
  double v1[2], v0[2], vc[2];
  double g1[4], g0[4], gc[4];
  u_eps_.eval(mesh, cell, xi, value ? v1 : nullptr, grad ? g1 : nullptr);
  u0_.eval(mesh, cell, xi, value ? v0 : nullptr, grad ? g0 : nullptr);
  correction(mesh, cell, xi, value ? vc : nullptr, grad ? gc : nullptr);
  if (value)
    for (int a = 0; a < m_; ++a) value[a] = v1[a] - v0[a] - vc[a];
  if (grad)
    for (int r = 0; r < m_ * d_; ++r) grad[r] = g1[r] - g0[r] - gc[r];
}

double Expansion::boundary_max() const {
  double s = 0.0;
  double v[2];
  for (Index k : mesh_->boundary_nodes()) {
    const auto loc = mesh_->locate(mesh_->node(k));
    eval(*mesh_, loc->first, loc->second, v, nullptr);
    for (int a = 0; a < m_; ++a) s = std::max(s, std::abs(v[a]));
  }
  return s;
}

}  // namespace homlab
