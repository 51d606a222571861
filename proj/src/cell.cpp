#include "homlab/cell.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "homlab/assembly.hpp"
#include "homlab/gridfile.hpp"
#include "homlab/parallel.hpp"

namespace homlab {

namespace {

void validate_grid(int d, int n) {
  if (n < 16 || (n & (n - 1)) != 0) {
    throw ValidationError("torus grid needs N >= 16 and a power of two, got " + std::to_string(n));
  }
  if (d < 1 || d > 2) throw ValidationError("torus dimension must be 1 or 2");
}

int ellipticity_density(int n) { return std::max(8, std::min(8 * n, 256)); }

// A load at round-off level of its natural scale is exactly zero (e.g. the
// cell problem for a constant tensor).
bool negligible(const Eigen::VectorXd& rhs, double scale) {
  return rhs.norm() <= 1e-14 * scale * std::sqrt(static_cast<double>(rhs.size()));
}

// Subtract the nodal mean of every component (the torus has uniform nodal mass).
Projector mean_projector(int m) {
  return [m](Eigen::VectorXd& v) {
    const Index nodes = v.size() / m;
    for (int a = 0; a < m; ++a) {
      double s = 0.0;
      for (Index k = 0; k < nodes; ++k) s += v[k * m + a];
      s /= static_cast<double>(nodes);
      for (Index k = 0; k < nodes; ++k) v[k * m + a] -= s;
    }
  };
}

struct QuadRule2 {
  std::vector<Point> xi;
  std::vector<double> w;
};

QuadRule2 stiffness_rule(int d) {
  const GaussRule& r = gauss_rule(2);
  QuadRule2 out;
  for (int qy = 0; qy < (d == 1 ? 1 : 2); ++qy)
    for (int qx = 0; qx < 2; ++qx) {
      out.xi.push_back({r.points[qx], d == 1 ? 0.0 : r.points[qy]});
      out.w.push_back(r.weights[qx] * (d == 1 ? 1.0 : r.weights[qy]));
    }
  return out;
}

CorrectorSet solve_cell(const CoefficientField& a, int n, const CellOptions& opt) {
  const int d = a.dim();
  const int m = a.components();
  validate_grid(d, n);
  if (!(opt.tol >= 1e-14 && opt.tol <= 1e-6)) {
    throw ValidationError("cell solver tolerance must lie in [1e-14, 1e-6]");
  }
  const EllipticityReport rep = check_ellipticity(a, ellipticity_density(n));
  if (!rep.legendre_hadamard_pass) {
    throw ValidationError("coefficient '" + a.name() + "' fails the Legendre-Hadamard condition");
  }

  CorrectorSet out;
  out.grid = std::make_shared<const Mesh>(Mesh::torus(d, n));
  out.d = d;
  out.m = m;
  out.tol = opt.tol;
  out.coefficient_name = a.name();
  const Mesh& mesh = *out.grid;
  const Coefficient coef = Coefficient::oscillatory(a, 1.0);
  const SparseMatrix k = assemble_stiffness(mesh, coef, 2);
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 50 * n;
  const Projector project = mean_projector(m);

  const int ncol = d * m;
  out.columns.assign(ncol, FEField(out.grid, m));
  out.residuals.assign(ncol, 0.0);
  out.iterations.assign(ncol, 0);
  parallel_for(ncol, opt.jobs, [&](int col) {
    const int beta = col / d;
    const int j = col % d;
    const Eigen::VectorXd rhs = assemble_flux(
        mesh, m,
        [&](const Point& y, double* g) {
          const CoeffTensor t = a(y);
          for (int al = 0; al < m; ++al)
            for (int i = 0; i < d; ++i) g[al * d + i] = -t(i, j, al, beta);
        },
        2);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
    KrylovResult r;
    if (!negligible(rhs, rep.upper_bound * std::pow(mesh.h(), d - 1))) {
      r = a.symmetric() ? pcg(k, rhs, x, opt.tol, max_iter, project)
                        : gmres(k, rhs, x, opt.tol, max_iter, 50, project);
    }
    project(x);
    out.columns[col].values = std::move(x);
    out.residuals[col] = r.residual;
    out.iterations[col] = r.iterations;
  });

  // gradients at the stiffness quadrature points
  const QuadRule2 rule = stiffness_rule(d);
  const int nq = static_cast<int>(rule.xi.size());
  out.quad_grad.assign(static_cast<std::size_t>(mesh.num_cells()) * nq * ncol * m * d, 0.0);
  for (Index c = 0; c < mesh.num_cells(); ++c)
    for (int q = 0; q < nq; ++q)
      for (int col = 0; col < ncol; ++col) {
        double* g = &out.quad_grad[((static_cast<std::size_t>(c) * nq + q) * ncol + col) * m * d];
        out.columns[col].eval(mesh, c, rule.xi[q], nullptr, g);
      }
  return out;
}

}  // namespace

double CorrectorSet::grad(Index cell, int q, int j, int beta, int alpha, int k) const {
  const int ncol = d * m;
  const int col = beta * d + j;
  return quad_grad[(((static_cast<std::size_t>(cell) * quad_points() + q) * ncol + col) * m + alpha) *
                       d + k];
}

void CorrectorSet::eval(const Point& y, int j, int beta, double* value, double* g) const {
  chi(j, beta).eval_at(y, value, g);
}

CorrectorSet solve_correctors(const CoefficientField& a, int n, const CellOptions& opt) {
  return solve_cell(a, n, opt);
}

CorrectorSet adjoint_correctors(const CoefficientField& a, int n, const CellOptions& opt) {
  return solve_cell(adjoint(a), n, opt);
}

nlohmann::json HomogenizedTensor::to_json() const {
  auto tensor_json = [](const CoeffTensor& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < t.size(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < t.size(); ++c) row.push_back(t.flat(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["d"] = value.dim();
  j["m"] = value.components();
  j["layout"] = "row alpha*d+i, column beta*d+j";
  j["value"] = tensor_json(value);
  j["extrapolated"] = extrapolated ? tensor_json(*extrapolated) : nlohmann::json(nullptr);
  j["N"] = N;
  j["tol"] = tol;
  j["symmetry_defect"] = symmetry_defect;
  j["certificate"] = certificate.to_json();
  return j;
}

HomogenizedTensor homogenized_tensor(const CoefficientField& a, const CorrectorSet& chi) {
  if (!chi.grid || !chi.grid->periodic() || chi.d != a.dim() || chi.m != a.components()) {
    throw ValidationError("corrector set does not match the coefficient's torus grid");
  }
  if (chi.quad_grad.size() != static_cast<std::size_t>(chi.grid->num_cells()) *
                                   chi.quad_points() * chi.d * chi.m * chi.m * chi.d) {
    throw ValidationError("corrector gradients were not computed on the quadrature grid");
  }
  const int d = chi.d;
  const int m = chi.m;
  const Mesh& mesh = *chi.grid;
  const QuadRule2 rule = stiffness_rule(d);
  const int nq = static_cast<int>(rule.xi.size());
  const double meas = std::pow(mesh.h(), d);
  HomogenizedTensor out;
  out.value = CoeffTensor(d, m);
  out.N = chi.N();
  out.tol = chi.tol;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    CoeffTensor acc(d, m);
    for (int q = 0; q < nq; ++q) {
      const CoeffTensor t = a(mesh.map(c, rule.xi[q]));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          for (int al = 0; al < m; ++al)
            for (int be = 0; be < m; ++be) {
              double s = t(i, j, al, be);
              for (int k = 0; k < d; ++k)
                for (int ga = 0; ga < m; ++ga) s += t(i, k, al, ga) * chi.grad(c, q, j, be, ga, k);
              acc(i, j, al, be) += rule.w[q] * s;
            }
    }
    acc *= meas;
    out.value += acc;
  }
  out.symmetry_defect = out.value.max_abs_diff(out.value.adjoint());
  out.certificate = check_ellipticity(out.value);
  return out;
}

HomogenizedTensor effective_tensor(const CoefficientField& a, int n, const CellOptions& opt) {
  HomogenizedTensor fine = homogenized_tensor(a, solve_correctors(a, n, opt));
  if (a.smoothness() == Smoothness::smooth_periodic && n >= 32) {
    const HomogenizedTensor coarse = homogenized_tensor(a, solve_correctors(a, n / 2, opt));
    CoeffTensor ex = (4.0 / 3.0) * fine.value - (1.0 / 3.0) * coarse.value;
    fine.extrapolated = ex;
    fine.symmetry_defect = ex.max_abs_diff(ex.adjoint());
    fine.certificate = check_ellipticity(ex);
  }
  return fine;
}

// ---------------------------------------------------------------------------
// Flux machinery
// ---------------------------------------------------------------------------

FluxData flux_field(const CoefficientField& a, const CorrectorSet& chi, const HomogenizedTensor& ahat) {
  if (!chi.grid || chi.d != a.dim() || chi.m != a.components() || ahat.N != chi.N()) {
    throw ValidationError("flux_field inputs live on different grids");
  }
  const int d = chi.d;
  const int m = chi.m;
  const Mesh& mesh = *chi.grid;
  const QuadRule2 rule = stiffness_rule(d);
  const int nq = static_cast<int>(rule.xi.size());
  const int dm2 = d * m * d * m;
  FluxData out;
  out.grid = chi.grid;
  out.d = d;
  out.m = m;
  out.b.assign(static_cast<std::size_t>(mesh.num_cells()) * dm2, 0.0);
  std::vector<double> mean(dm2, 0.0);
  const double meas = std::pow(mesh.h(), d);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    double* bc = &out.b[static_cast<std::size_t>(c) * dm2];
    for (int q = 0; q < nq; ++q) {
      const CoeffTensor t = a(mesh.map(c, rule.xi[q]));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          for (int al = 0; al < m; ++al)
            for (int be = 0; be < m; ++be) {
              double s = t(i, j, al, be);
              for (int k = 0; k < d; ++k)
                for (int ga = 0; ga < m; ++ga) s += t(i, k, al, ga) * chi.grad(c, q, j, be, ga, k);
              bc[out.flat(i, j, al, be)] += rule.w[q] * s;
            }
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int al = 0; al < m; ++al)
          for (int be = 0; be < m; ++be) {
            const int f = out.flat(i, j, al, be);
            bc[f] -= ahat.value(i, j, al, be);
            mean[f] += meas * bc[f];
          }
  }
  for (double v : mean) out.mean_defect = std::max(out.mean_defect, std::abs(v));
  for (double r : chi.residuals) out.weak_divergence = std::max(out.weak_divergence, r);
  return out;
}

void flux_correctors(FluxData& data, double tol, int jobs) {
  const int d = data.d;
  const int m = data.m;
  const Mesh& mesh = *data.grid;
  const int n = mesh.cells_per_side();
  const int dm2 = d * m * d * m;
  Coefficient lap;
  lap.d = d;
  lap.m = 1;
  lap.constant = true;
  lap.symmetric = true;
  lap.at = [d](const Point&) { return CoeffTensor::identity(d, 1); };
  const SparseMatrix k = assemble_stiffness(mesh, lap, 2);
  const Projector project = mean_projector(1);
  const double share = std::pow(mesh.h(), d) / mesh.nodes_per_cell();

  const double b_scale = std::max(data.max_abs_b(), 1e-300);
  data.f.assign(dm2, FEField(data.grid, 1));
  data.poisson_residuals.assign(dm2, 0.0);
  parallel_for(dm2, jobs, [&](int f) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const double bc = data.b[static_cast<std::size_t>(c) * dm2 + f];
      for (int a = 0; a < mesh.nodes_per_cell(); ++a) rhs[mesh.cell_nodes(c)[a]] -= share * bc;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
    KrylovResult r;
    if (!negligible(rhs, b_scale * std::pow(mesh.h(), d))) r = pcg(k, rhs, x, tol, 50 * n, project);
    project(x);
    data.f[f].values = std::move(x);
    data.poisson_residuals[f] = r.residual;
  });

  // phi_kij = D_k f_ij - D_i f_kj, central differences at nodes
  const double inv2h = 0.5 / mesh.h();
  auto central = [&](const Eigen::VectorXd& v, int k, Index node) {
    const auto g = mesh.grid_index(node);
    const Index fwd = k == 0 ? mesh.node_at(g[0] + 1, g[1]) : mesh.node_at(g[0], g[1] + 1);
    const Index bwd = k == 0 ? mesh.node_at(g[0] - 1, g[1]) : mesh.node_at(g[0], g[1] - 1);
    return (v[fwd] - v[bwd]) * inv2h;
  };
  data.phi.assign(static_cast<std::size_t>(d) * d * d * m * m, Eigen::VectorXd());
  for (int kk = 0; kk < d; ++kk)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int al = 0; al < m; ++al)
          for (int be = 0; be < m; ++be) {
            Eigen::VectorXd p(mesh.num_nodes());
            const Eigen::VectorXd& fij = data.f[data.flat(i, j, al, be)].values;
            const Eigen::VectorXd& fkj = data.f[data.flat(kk, j, al, be)].values;
            for (Index node = 0; node < mesh.num_nodes(); ++node) {
              p[node] = central(fij, kk, node) - central(fkj, i, node);
            }
            data.phi[((kk * d + i) * d + j) * m * m + al * m + be] = std::move(p);
          }
}

double FluxData::antisymmetry_defect() const {
  double mx = 0.0;
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int al = 0; al < m; ++al)
          for (int be = 0; be < m; ++be) {
            const Eigen::VectorXd& a = phi_at(k, i, j, al, be);
            const Eigen::VectorXd& b = phi_at(i, k, j, al, be);
            mx = std::max(mx, (a + b).cwiseAbs().maxCoeff());
          }
  return mx;
}

double FluxData::reconstruction_error() const {
  const Mesh& mesh = *grid;
  const QuadRule2 rule = stiffness_rule(d);
  const double meas = std::pow(mesh.h(), d);
  const double inv_h = 1.0 / mesh.h();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int al = 0; al < m; ++al)
        for (int be = 0; be < m; ++be) {
          double acc = 0.0;
          for (Index c = 0; c < mesh.num_cells(); ++c) {
            const auto& nodes = mesh.cell_nodes(c);
            const double bc = b_at(c, i, j, al, be);
            for (std::size_t q = 0; q < rule.xi.size(); ++q) {
              double nv[4];
              double g[4][2];
              shape_functions(d, rule.xi[q], nv, g);
              double div = 0.0;
              for (int k = 0; k < d; ++k) {
                const Eigen::VectorXd& p = phi_at(k, i, j, al, be);
                for (int a = 0; a < mesh.nodes_per_cell(); ++a) div += g[a][k] * inv_h * p[nodes[a]];
              }
              acc += rule.w[q] * meas * (div - bc) * (div - bc);
            }
          }
          worst = std::max(worst, std::sqrt(acc));
        }
  return worst;
}

double FluxData::max_abs_b() const {
  double mx = 0.0;
  for (double v : b) mx = std::max(mx, std::abs(v));
  return mx;
}

void export_correctors(const CorrectorSet& chi, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (int be = 0; be < chi.m; ++be)
    for (int j = 0; j < chi.d; ++j) {
      const std::string name = "chi_j" + std::to_string(j + 1) + "_beta" + std::to_string(be + 1);
      write_grid_file(dir + "/" + name + ".hglb", grid_from_field(chi.chi(j, be), name));
    }
}

void export_flux(const FluxData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const Mesh& mesh = *data.grid;
  const int n = mesh.cells_per_side();
  const int dm2 = data.d * data.m * data.d * data.m;
  GridData b;
  b.name = "B";
  b.d = data.d;
  b.m = dm2;
  b.dims.assign(data.d, static_cast<std::uint32_t>(n));
  b.values = data.b;  // cells are numbered in grid order on the torus
  write_grid_file(dir + "/B.hglb", b);
  if (data.phi.empty()) return;
  GridData p;
  p.name = "phi";
  p.d = data.d;
  p.m = static_cast<int>(data.phi.size());
  p.dims.assign(data.d, static_cast<std::uint32_t>(mesh.grid_extent()));
  p.values.resize(static_cast<std::size_t>(mesh.num_nodes()) * p.m);
  for (Index node = 0; node < mesh.num_nodes(); ++node)
    for (int c = 0; c < p.m; ++c) p.values[static_cast<std::size_t>(node) * p.m + c] = data.phi[c][node];
  write_grid_file(dir + "/phi.hglb", p);
}

}  // namespace homlab
