#include "homlab/fem.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/UmfPackSupport>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace homlab {

// ---------------------------------------------------------------------------
// Direct solver
// ---------------------------------------------------------------------------

struct DirectSolver::Impl {
  SparseMatrix a;
  double norm_inf = 0.0;
  std::unique_ptr<Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower>> llt;
  std::unique_ptr<Eigen::UmfPackLU<SparseMatrix>> lu;

  Eigen::VectorXd raw_solve(const Eigen::VectorXd& b) const {
    return llt ? Eigen::VectorXd(llt->solve(b)) : Eigen::VectorXd(lu->solve(b));
  }
};

DirectSolver::DirectSolver(const SparseMatrix& a, bool spd) : impl_(std::make_unique<Impl>()), spd_(spd) {
  if (a.rows() != a.cols()) throw ValidationError("direct solver needs a square matrix");
  impl_->a = a;
  impl_->a.makeCompressed();
  if (a.rows() == 0) return;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(impl_->a.rows());
  for (Index c = 0; c < impl_->a.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(impl_->a, c); it; ++it) rows[it.row()] += std::abs(it.value());
  impl_->norm_inf = rows.maxCoeff();
  if (spd) {
    impl_->llt = std::make_unique<Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower>>();
    // AMD only (the default analysis also tries METIS)
    impl_->llt->cholmod().nmethods = 1;
    impl_->llt->cholmod().method[0].ordering = CHOLMOD_AMD;
    impl_->llt->compute(impl_->a);
    if (impl_->llt->info() != Eigen::Success) {
      throw SolverError("Cholesky factorization failed: matrix is not positive definite", NAN);
    }
  } else {
    impl_->lu = std::make_unique<Eigen::UmfPackLU<SparseMatrix>>();
    impl_->lu->compute(impl_->a);
    if (impl_->lu->info() != Eigen::Success) {
      throw SolverError("LU factorization failed: matrix is singular", NAN);
    }
  }
}

DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;

Index DirectSolver::size() const noexcept { return impl_->a.rows(); }

Eigen::VectorXd DirectSolver::solve(const Eigen::VectorXd& b, double tol) const {
  if (b.size() != impl_->a.rows()) throw ValidationError("right-hand side has the wrong length");
  if (b.size() == 0) return b;
  const double bnorm = b.lpNorm<Eigen::Infinity>();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());
  // normwise backward error ||b - Ax|| / (||A|| ||x|| + ||b||), infinity norms
  auto backward = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    return r.lpNorm<Eigen::Infinity>() / (impl_->norm_inf * x.lpNorm<Eigen::Infinity>() + bnorm);
  };
  Eigen::VectorXd x = impl_->raw_solve(b);
  Eigen::VectorXd r = b - impl_->a * x;
  double res = backward(x, r);
  for (int it = 0; it < 3 && res > 1e-15; ++it) {
    const Eigen::VectorXd x2 = x + impl_->raw_solve(r);
    const Eigen::VectorXd r2 = b - impl_->a * x2;
    const double res2 = backward(x2, r2);
    if (!(res2 < res)) break;
    x = x2;
    r = r2;
    res = res2;
  }
  if (!std::isfinite(res) || res > tol) {
    throw SolverError("direct solve backward error above tolerance", res);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

SparseMatrix restrict_matrix(const SparseMatrix& a, const std::vector<Index>& keep, Index kept) {
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(a.nonZeros());
  for (Index col = 0; col < a.outerSize(); ++col) {
    const Index c = keep[col];
    if (c < 0) continue;
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      const Index r = keep[it.row()];
      if (r >= 0 && it.value() != 0.0) t.emplace_back(static_cast<int>(r), static_cast<int>(c), it.value());
    }
  }
  SparseMatrix out(kept, kept);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

CoefficientField solver_form(const CoefficientField& a, BoundaryKind kind) {
  if (kind == BoundaryKind::neumann || a.ellipticity_class() != EllipticityClass::elasticity) return a;
  const EllipticityReport rep = check_ellipticity(a, 64);
  if (!rep.kappa1 || !rep.elasticity_pass) throw ValidationError("field is not in the elasticity class");
  return elasticity_rewrite(a, 0.5 * *rep.kappa1);
}

void check_resolution(const Mesh& mesh, double eps) {
  if (eps > 0.0 && mesh.h() > eps / 8.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "resolution rule violated: h = " << mesh.h() << " > eps / 8 = " << eps / 8.0;
    throw ValidationError(os.str());
  }
}

std::vector<CoeffTensor> sample_oscillatory(const CoefficientField& a, double eps, const Mesh& mesh,
                                            int order) {
  if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
  const GaussRule& r = gauss_rule(order);
  const int nq = static_cast<int>(r.points.size());
  const int d = mesh.dim();
  std::vector<CoeffTensor> out;
  out.reserve(static_cast<std::size_t>(mesh.num_cells()) * (d == 1 ? nq : nq * nq));
  for (Index c = 0; c < mesh.num_cells(); ++c)
    for (int qy = 0; qy < (d == 1 ? 1 : nq); ++qy)
      for (int qx = 0; qx < nq; ++qx) {
        const Point x = mesh.map(c, {r.points[qx], d == 1 ? 0.0 : r.points[qy]});
        out.push_back(a({x[0] / eps, x[1] / eps}));
      }
  return out;
}

nlohmann::json SolveInfo::to_json() const {
  return {{"residual", residual},
          {"energy", energy},
          {"compatibility_before", compatibility_before},
          {"compatibility_after", compatibility_after},
          {"nullspace_defect", nullspace_defect},
          {"solver", solver}};
}

namespace {

bool try_cholesky(const SparseMatrix& a, bool symmetric, std::unique_ptr<DirectSolver>& out) {
  if (!symmetric) {
    out = std::make_unique<DirectSolver>(a, false);
    return false;
  }
  out = std::make_unique<DirectSolver>(a, true);
  return true;
}

Eigen::VectorXd load_vector(const BVPSpec& spec, const Mesh& mesh, const SparseMatrix* mass) {
  const int m = spec.coefficient.m;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_nodes() * m);
  if (spec.source) b += assemble_source(mesh, m, spec.source, 3);
  if (spec.nodal_source) {
    if (spec.nodal_source->size() != b.size()) throw ValidationError("nodal source has the wrong length");
    b += (*mass) * (*spec.nodal_source);
  }
  return b;
}

double mass_inner(const SparseMatrix& mass, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(mass * b);
}

}  // namespace

// ---------------------------------------------------------------------------
// Nullspaces
// ---------------------------------------------------------------------------

std::vector<FEField> nullspace_basis(std::shared_ptr<const Mesh> mesh, int m, NullspacePolicy policy) {
  std::vector<FEField> raw;
  const int d = mesh->dim();
  if (policy == NullspacePolicy::rigid_modes) {
    if (m != d) throw ValidationError("rigid displacements need m = d");
    for (int a = 0; a < d; ++a) {
      raw.push_back(FEField::interpolate(mesh, m, [a, m](const Point&, double* v) {
        for (int b = 0; b < m; ++b) v[b] = a == b ? 1.0 : 0.0;
      }));
    }
    if (d == 2) {
      raw.push_back(FEField::interpolate(mesh, m, [](const Point& x, double* v) {
        v[0] = -x[1];
        v[1] = x[0];
      }));
    }
  } else {
    for (int a = 0; a < m; ++a) {
      raw.push_back(FEField::interpolate(mesh, m, [a, m](const Point&, double* v) {
        for (int b = 0; b < m; ++b) v[b] = a == b ? 1.0 : 0.0;
      }));
    }
  }
  // Gram-Schmidt in the consistent mass inner product (exact L2 for Q1)
  const SparseMatrix mass = assemble_mass(*mesh, m);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < k; ++j) {
        raw[k].values -= mass_inner(mass, raw[j].values, raw[k].values) * raw[j].values;
      }
    raw[k].values /= std::sqrt(mass_inner(mass, raw[k].values, raw[k].values));
  }
  return raw;
}

std::vector<FEField> rigid_basis(std::shared_ptr<const Mesh> mesh) {
  return nullspace_basis(mesh, mesh->dim(), NullspacePolicy::rigid_modes);
}

// ---------------------------------------------------------------------------
// Dirichlet
// ---------------------------------------------------------------------------

DirichletOperator::DirichletOperator(std::shared_ptr<const Mesh> mesh, const Coefficient& a, double eps)
    : mesh_(std::move(mesh)), m_(a.m) {
  if (mesh_->periodic()) throw ValidationError("Dirichlet problems need a bounded domain");
  if (a.d != mesh_->dim()) throw ValidationError("coefficient and mesh dimensions differ");
  check_resolution(*mesh_, eps);
  k_ = assemble_stiffness(*mesh_, a, 2);
  const Index ndof = mesh_->num_nodes() * m_;
  free_.assign(ndof, -1);
  for (Index node = 0; node < mesh_->num_nodes(); ++node) {
    if (mesh_->on_boundary(node)) continue;
    for (int al = 0; al < m_; ++al) {
      free_[node * m_ + al] = static_cast<Index>(free_dofs_.size());
      free_dofs_.push_back(node * m_ + al);
    }
  }
  kff_ = restrict_matrix(k_, free_, static_cast<Index>(free_dofs_.size()));
  try_cholesky(kff_, a.symmetric, solver_);
}

Solution DirichletOperator::solve(const SourceFn& source, const SourceFn& boundary, double tol) const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh_->num_nodes() * m_);
  if (source) b = assemble_source(*mesh_, m_, source, 3);
  return solve_load(b, boundary, tol);
}

Solution DirichletOperator::solve_load(const Eigen::VectorXd& b, const SourceFn& boundary, double tol) const {
  const Mesh& mesh = *mesh_;
  if (b.size() != mesh.num_nodes() * m_) throw ValidationError("load vector has the wrong length");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(b.size());
  if (boundary) {
    std::vector<double> v(m_);
    for (Index node = 0; node < mesh.num_nodes(); ++node) {
      if (!mesh.on_boundary(node)) continue;
      boundary(mesh.node(node), v.data());
      for (int al = 0; al < m_; ++al) u[node * m_ + al] = v[al];
    }
  }
  const Eigen::VectorXd rhs_full = b - k_ * u;
  Eigen::VectorXd rhs(static_cast<Index>(free_dofs_.size()));
  for (std::size_t k = 0; k < free_dofs_.size(); ++k) rhs[k] = rhs_full[free_dofs_[k]];
  const Eigen::VectorXd x = solver_->solve(rhs, tol);
  for (std::size_t k = 0; k < free_dofs_.size(); ++k) u[free_dofs_[k]] = x[k];

  Solution s{FEField(mesh_, m_, u), {}};
  const double rn = rhs.norm();
  s.info.residual = rn > 0.0 ? (rhs - kff_ * x).norm() / rn : 0.0;
  s.info.energy = std::sqrt(std::max(0.0, u.dot(k_ * u)));
  s.info.solver = solver_->spd() ? "cholmod" : "umfpack";
  return s;
}

Solution solve_dirichlet(const BVPSpec& spec, std::shared_ptr<const Mesh> mesh, double tol) {
  if (spec.boundary != BoundaryKind::dirichlet) throw ValidationError("spec is not a Dirichlet problem");
  DirichletOperator op(mesh, spec.coefficient, spec.eps);
  if (!spec.nodal_source) return op.solve(spec.source, spec.dirichlet, tol);
  const SparseMatrix mass = assemble_mass(*mesh, spec.coefficient.m);
  return op.solve_load(load_vector(spec, *mesh, &mass), spec.dirichlet, tol);
}

// ---------------------------------------------------------------------------
// Neumann
// ---------------------------------------------------------------------------

Solution solve_neumann(const BVPSpec& spec, std::shared_ptr<const Mesh> mesh, double tol) {
  if (spec.boundary != BoundaryKind::neumann) throw ValidationError("spec is not a Neumann problem");
  if (mesh->periodic()) throw ValidationError("Neumann problems need a bounded domain");
  const Coefficient& a = spec.coefficient;
  const int m = a.m;
  const int d = mesh->dim();
  if (a.d != d) throw ValidationError("coefficient and mesh dimensions differ");
  check_resolution(*mesh, spec.eps);

  const SparseMatrix k = assemble_stiffness(*mesh, a, 2);
  const SparseMatrix mass = assemble_mass(*mesh, m);
  Eigen::VectorXd b = load_vector(spec, *mesh, &mass);
  if (spec.neumann) b += assemble_boundary(*mesh, m, spec.neumann, 3);

  const std::vector<FEField> basis = nullspace_basis(mesh, m, spec.nullspace);
  SolveInfo info;
  // compatibility: r_k^T b = 0 for every nullspace vector
  // defects relative to the discrete dual norm of the load (lumped mass)
  const Eigen::VectorXd lumped = mass * Eigen::VectorXd::Ones(mass.rows());
  const double dual = std::sqrt(b.cwiseAbs2().cwiseQuotient(lumped).sum());
  const double scale = dual > 0.0 ? dual : 1.0;
  double defect = 0.0;
  for (const FEField& r : basis) defect = std::max(defect, std::abs(r.values.dot(b)));
  info.compatibility_before = defect / scale;
  if (info.compatibility_before > spec.compatibility_tolerance) {
    std::ostringstream os;
    os << "Neumann data incompatible beyond the correction tolerance (relative defect "
       << info.compatibility_before << ")";
    throw ValidationError(os.str());
  }
  for (const FEField& r : basis) b -= r.values.dot(b) * (mass * r.values);
  defect = 0.0;
  for (const FEField& r : basis) defect = std::max(defect, std::abs(r.values.dot(b)));
  info.compatibility_after = defect / scale;

  // pin enough dofs to remove the nullspace
  const Index anchor = mesh->anchor_node();
  std::vector<Index> pinned;
  for (int al = 0; al < m; ++al) pinned.push_back(anchor * m + al);
  if (spec.nullspace == NullspacePolicy::rigid_modes && d == 2) {
    const Point xa = mesh->node(anchor);
    Index far = -1;
    double best = 0.0;
    for (Index node = 0; node < mesh->num_nodes(); ++node) {
      const Point& x = mesh->node(node);
      if (std::abs(x[1] - xa[1]) > 1e-12) continue;
      if (std::abs(x[0] - xa[0]) > best) {
        best = std::abs(x[0] - xa[0]);
        far = node;
      }
    }
    pinned.push_back(far * m + 1);
  }
  const Index ndof = mesh->num_nodes() * m;
  std::vector<Index> keep(ndof, 0);
  for (Index p : pinned) keep[p] = -1;
  std::vector<Index> dofs;
  for (Index dof = 0; dof < ndof; ++dof) {
    if (keep[dof] < 0) continue;
    keep[dof] = static_cast<Index>(dofs.size());
    dofs.push_back(dof);
  }
  const SparseMatrix kff = restrict_matrix(k, keep, static_cast<Index>(dofs.size()));
  std::unique_ptr<DirectSolver> solver;
  try_cholesky(kff, a.symmetric, solver);
  Eigen::VectorXd rhs(static_cast<Index>(dofs.size()));
  for (std::size_t q = 0; q < dofs.size(); ++q) rhs[q] = b[dofs[q]];
  const Eigen::VectorXd x = solver->solve(rhs, tol);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
  for (std::size_t q = 0; q < dofs.size(); ++q) u[dofs[q]] = x[q];

  // L2-orthogonal to the nullspace
  for (int pass = 0; pass < 2; ++pass)
    for (const FEField& r : basis) u -= mass_inner(mass, r.values, u) * r.values;
  for (const FEField& r : basis) {
    info.nullspace_defect = std::max(info.nullspace_defect, std::abs(mass_inner(mass, r.values, u)));
  }
  const Eigen::VectorXd res = k * u - b;
  const double bn = b.norm();
  info.residual = bn > 0.0 ? res.norm() / bn : 0.0;
  info.energy = std::sqrt(std::max(0.0, u.dot(k * u)));
  info.solver = solver->spd() ? "cholmod" : "umfpack";
  // normwise backward error of the full (unpinned) system
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(k.rows());
  for (Index c = 0; c < k.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(k, c); it; ++it) rows[it.row()] += std::abs(it.value());
  const double knorm = rows.maxCoeff();
  const double denom = knorm * u.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
  const double backward = denom > 0.0 ? res.lpNorm<Eigen::Infinity>() / denom : 0.0;
  if (backward > std::max(tol, 1e-8)) {
    throw SolverError("Neumann solve backward error above tolerance", backward);
  }
  return {FEField(mesh, m, u), info};
}

Solution solve_bvp(const BVPSpec& spec, std::shared_ptr<const Mesh> mesh, double tol) {
  return spec.boundary == BoundaryKind::dirichlet ? solve_dirichlet(spec, mesh, tol)
                                                  : solve_neumann(spec, mesh, tol);
}

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------

nlohmann::json SpectralResult::to_json() const {
  nlohmann::json j;
  j["eigenvalues"] = eigenvalues;
  j["residuals"] = residuals;
  j["orthonormality_defect"] = orthonormality_defect;
  j["multiplicity"] = multiplicity;
  j["method"] = method;
  return j;
}

namespace {

struct Eigenpairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // M-orthonormal columns
};

Eigenpairs dense_eigen(const SparseMatrix& k, const SparseMatrix& m, int nev) {
  const lapack_int n = static_cast<lapack_int>(k.rows());
  Eigen::MatrixXd kd = Eigen::MatrixXd(k);
  Eigen::MatrixXd md = Eigen::MatrixXd(m);
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, nev);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dsygvx(LAPACK_COL_MAJOR, 1, 'V', 'I', 'U', n, kd.data(), n, md.data(), n, 0.0, 0.0, 1, nev,
                     0.0, &found, w.data(), z.data(), n, ifail.data());
  if (info != 0 || found != nev) throw SolverError("dense generalized eigensolver failed", NAN);
  return {w.head(nev), z};
}

// Shift-invert Lanczos (shift 0) for K x = lambda M x with full
// reorthogonalization in the M inner product.
// Vectors in `locked` (M-orthonormal, converged) are deflated.
Eigenpairs lanczos_run(const SparseMatrix& k, const SparseMatrix& m, const DirectSolver& solver, int nev,
                       double tol, std::uint64_t seed, const Eigen::MatrixXd& locked) {
  const Index n = k.rows();
  auto deflate = [&](Eigen::VectorXd& w) {
    if (locked.cols() == 0) return;
    const Eigen::VectorXd c = locked.transpose() * (m * w);
    w -= locked * c;
  };
  const int max_steps = static_cast<int>(std::min<Index>(n, std::max(120, 6 * nev + 40)));
  Eigen::MatrixXd v(n, max_steps + 1);
  std::vector<double> alpha, beta;

  // deterministic start vector (splitmix64)
  std::uint64_t state = seed;
  auto next = [&state] {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) / 9007199254740992.0 - 0.5;
  };
  Eigen::VectorXd q(n);
  for (Index i = 0; i < n; ++i) q[i] = next();
  deflate(q);
  q /= std::sqrt(q.dot(m * q));
  v.col(0) = q;

  Eigenpairs best;
  double worst_res = INFINITY;
  for (int j = 0; j < max_steps; ++j) {
    const Eigen::VectorXd mq = m * v.col(j);
    Eigen::VectorXd w = solver.solve(mq, 1e-8);
    deflate(w);
    const double a = w.dot(mq);
    alpha.push_back(a);
    w -= a * v.col(j);
    if (j > 0) w -= beta.back() * v.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd mw = m * w;
      const Eigen::VectorXd c = v.leftCols(j + 1).transpose() * mw;
      w -= v.leftCols(j + 1) * c;
    }
    const double b = std::sqrt(std::max(0.0, w.dot(m * w)));
    const int steps = j + 1;
    const bool last = steps == max_steps || b <= 1e-14 * std::abs(a);
    if (steps >= std::min<Index>(n, nev + 8) && (steps % 5 == 0 || last)) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
      for (int i = 0; i < steps; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < steps) t(i, i + 1) = t(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      // largest theta = smallest lambda
      const int take = std::min(nev, steps);
      Eigenpairs cand;
      cand.values.resize(take);
      cand.vectors.resize(n, take);
      double res = 0.0;
      for (int i = 0; i < take; ++i) {
        const int col = steps - 1 - i;
        const double theta = es.eigenvalues()[col];
        Eigen::VectorXd x = v.leftCols(steps) * es.eigenvectors().col(col);
        x /= std::sqrt(x.dot(m * x));
        (void)theta;
        const Eigen::VectorXd mx = m * x;
        const double lam = x.dot(k * x);  // Rayleigh quotient, x is M-normalized
        res = std::max(res, (k * x - lam * mx).norm() / lam);
        cand.values[i] = lam;
        cand.vectors.col(i) = x;
      }
      const bool stalled = res <= 1e-5 && res > 0.5 * worst_res;
      if (res < worst_res) {
        worst_res = res;
        best = cand;
      }
      if (res <= tol || stalled) break;
    }
    if (last) break;
    beta.push_back(b);
    v.col(j + 1) = w / b;
  }
  if (!(worst_res <= 1e-4)) throw SolverError("Lanczos stagnated", worst_res);
  // Lanczos vectors carry high-frequency noise from the inexact inner
  // solves; block inverse iteration with Rayleigh-Ritz removes it.
  for (int pass = 0; pass < 4 && worst_res > tol; ++pass) {
    const int nb = static_cast<int>(best.values.size());
    Eigen::MatrixXd y(n, nb);
    for (int i = 0; i < nb; ++i) {
      Eigen::VectorXd yi = solver.solve(m * best.vectors.col(i), 1e-8);
      deflate(yi);
      y.col(i) = yi;
    }
    const Eigen::MatrixXd ky = k * y;
    const Eigen::MatrixXd my = m * y;
    Eigen::MatrixXd kp = y.transpose() * ky;
    Eigen::MatrixXd mp = y.transpose() * my;
    kp = 0.5 * (kp + kp.transpose()).eval();
    mp = 0.5 * (mp + mp.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(kp, mp);
    Eigenpairs next;
    next.values = es.eigenvalues();
    next.vectors = y * es.eigenvectors();
    double res = 0.0;
    for (int i = 0; i < nb; ++i) {
      const Eigen::VectorXd x = next.vectors.col(i);
      res = std::max(res, (k * x - next.values[i] * (m * x)).norm() / next.values[i]);
    }
    if (!(res < worst_res)) break;
    worst_res = res;
    best = next;
  }
  if (!(worst_res <= 1e-8)) throw SolverError("Lanczos stagnated", worst_res);
  return best;
}

// A single Krylov sequence cannot see a second copy of a multiple
// eigenvalue; restart with the converged pairs deflated until no new
// eigenvalue below the current K-th appears.
Eigenpairs lanczos_eigen(const SparseMatrix& k, const SparseMatrix& m, int nev, double tol,
                         std::uint64_t seed) {
  const DirectSolver solver(k, true);
  Eigenpairs found = lanczos_run(k, m, solver, nev, tol, seed, Eigen::MatrixXd(k.rows(), 0));
  for (int round = 1; round <= nev; ++round) {
    if (found.vectors.cols() >= k.rows()) break;
    const Eigenpairs extra = lanczos_run(k, m, solver, 1, tol, seed + round, found.vectors);
    const double top = found.values.maxCoeff();
    if (!(extra.values[0] < top * (1.0 - 1e-12))) break;
    // replace the largest found pair
    Index imax = 0;
    found.values.maxCoeff(&imax);
    found.values[imax] = extra.values[0];
    found.vectors.col(imax) = extra.vectors.col(0);
  }
  return found;
}

}  // namespace

SpectralResult solve_eigen_dirichlet(const Coefficient& a, std::shared_ptr<const Mesh> mesh, int kev,
                                     double tol, std::uint64_t seed) {
  if (!a.symmetric) throw ValidationError("Dirichlet eigenvalues require a symmetric coefficient");
  if (kev < 1 || kev > 20) throw ValidationError("number of eigenvalues must lie in 1..20");
  if (mesh->periodic()) throw ValidationError("Dirichlet eigenvalues need a bounded domain");
  const int m = a.m;
  const SparseMatrix k = assemble_stiffness(*mesh, a, 2);
  const SparseMatrix mass = assemble_mass(*mesh, m);
  std::vector<Index> keep(mesh->num_nodes() * m, -1);
  std::vector<Index> dofs;
  for (Index node = 0; node < mesh->num_nodes(); ++node) {
    if (mesh->on_boundary(node)) continue;
    for (int al = 0; al < m; ++al) {
      keep[node * m + al] = static_cast<Index>(dofs.size());
      dofs.push_back(node * m + al);
    }
  }
  const Index nf = static_cast<Index>(dofs.size());
  if (nf < kev) throw ValidationError("mesh has fewer free dofs than requested eigenvalues");
  const SparseMatrix kff = restrict_matrix(k, keep, nf);
  const SparseMatrix mff = restrict_matrix(mass, keep, nf);

  SpectralResult out;
  Eigenpairs pairs;
  if (nf <= kDenseEigenLimit) {
    pairs = dense_eigen(kff, mff, kev);
    out.method = "dense";
  } else {
    pairs = lanczos_eigen(kff, mff, kev, tol, seed);
    out.method = "lanczos";
  }
  // ascending order, deterministic sign (largest entry positive)
  std::vector<int> order(kev);
  for (int i = 0; i < kev; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return pairs.values[x] < pairs.values[y]; });
  Eigen::MatrixXd vecs(nf, kev);
  for (int i = 0; i < kev; ++i) {
    Eigen::VectorXd x = pairs.vectors.col(order[i]);
    Index imax = 0;
    x.cwiseAbs().maxCoeff(&imax);
    if (x[imax] < 0.0) x = -x;
    vecs.col(i) = x;
    out.eigenvalues.push_back(pairs.values[order[i]]);
  }
  const Eigen::MatrixXd gram = vecs.transpose() * (mff * vecs);
  out.orthonormality_defect = (gram - Eigen::MatrixXd::Identity(kev, kev)).cwiseAbs().maxCoeff();
  for (int i = 0; i < kev; ++i) {
    const double lam = out.eigenvalues[i];
    const Eigen::VectorXd mx = mff * vecs.col(i);
    out.residuals.push_back((kff * vecs.col(i) - lam * mx).norm() / lam);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(mesh->num_nodes() * m);
    for (Index q = 0; q < nf; ++q) full[dofs[q]] = vecs(q, i);
    out.modes.emplace_back(mesh, m, full);
  }
  out.multiplicity.assign(kev, false);
  for (int i = 0; i + 1 < kev; ++i) {
    if (std::abs(out.eigenvalues[i + 1] - out.eigenvalues[i]) <= 1e-8 * out.eigenvalues[i + 1]) {
      out.multiplicity[i] = out.multiplicity[i + 1] = true;
    }
  }
  return out;
}

}  // namespace homlab
