#include "homlab/krylov.hpp"

#include <cmath>
#include <vector>

namespace homlab {

namespace {

Eigen::VectorXd inverse_diagonal(const SparseMatrix& a) {
  Eigen::VectorXd d = a.diagonal();
  for (Index k = 0; k < d.size(); ++k) {
    if (!(d[k] > 0.0)) {
      throw SolverError("non-positive diagonal entry: the system is not elliptic", NAN);
    }
    d[k] = 1.0 / d[k];
  }
  return d;
}

}  // namespace

KrylovResult pcg(const SparseMatrix& a, const Eigen::VectorXd& b_in, Eigen::VectorXd& x,
                 double tol, int max_iter, const Projector& project) {
  const Eigen::VectorXd dinv = inverse_diagonal(a);
  Eigen::VectorXd b = b_in;
  if (project) project(b);
  const double bnorm = b.norm();
  if (x.size() != b.size()) x = Eigen::VectorXd::Zero(b.size());
  if (bnorm == 0.0) {
    x.setZero();
    return {};
  }
  if (project) project(x);
  Eigen::VectorXd r = b - a * x;
  if (project) project(r);
  Eigen::VectorXd z = dinv.cwiseProduct(r);
  if (project) project(z);
  Eigen::VectorXd p = z;
  Eigen::VectorXd q(b.size());
  double rz = r.dot(z);
  KrylovResult res;
  res.residual = r.norm() / bnorm;
  for (int it = 0; it < max_iter; ++it) {
    if (res.residual <= tol) {
      res.iterations = it;
      return res;
    }
    q.noalias() = a * p;
    const double pq = p.dot(q);
    if (!(pq > 0.0)) {
      throw SolverError("conjugate gradients met a non-positive curvature: indefinite system",
                        res.residual);
    }
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    if (project) project(r);
    z = dinv.cwiseProduct(r);
    if (project) project(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    res.residual = r.norm() / bnorm;
    // guard against drift of the recursive residual
    if ((it + 1) % 500 == 0) {
      r = b - a * x;
      if (project) project(r);
      res.residual = r.norm() / bnorm;
    }
  }
  if (project) project(x);
  const Eigen::VectorXd rt = b - a * x;
  res.residual = rt.norm() / bnorm;
  res.iterations = max_iter;
  if (res.residual <= tol) return res;
  throw SolverError("conjugate gradients did not converge", res.residual);
}

KrylovResult gmres(const SparseMatrix& a, const Eigen::VectorXd& b_in, Eigen::VectorXd& x,
                   double tol, int max_iter, int restart, const Projector& project) {
  const Eigen::VectorXd dinv = inverse_diagonal(a);
  Eigen::VectorXd b = b_in;
  if (project) project(b);
  const Index n = b.size();
  const double bnorm = b.norm();
  if (x.size() != n) x = Eigen::VectorXd::Zero(n);
  if (bnorm == 0.0) {
    x.setZero();
    return {};
  }
  KrylovResult res;
  int total = 0;
  Eigen::MatrixXd v(n, restart + 1);
  Eigen::MatrixXd hm = Eigen::MatrixXd::Zero(restart + 1, restart);
  std::vector<double> cs(restart), sn(restart);
  Eigen::VectorXd g(restart + 1);
  Eigen::VectorXd w(n);
  while (total < max_iter) {
    if (project) project(x);
    Eigen::VectorXd r = b - a * x;
    if (project) project(r);
    const double beta = r.norm();
    res.residual = beta / bnorm;
    if (res.residual <= tol) {
      res.iterations = total;
      return res;
    }
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    hm.setZero();
    int k = 0;
    for (; k < restart && total < max_iter; ++k, ++total) {
      Eigen::VectorXd zk = dinv.cwiseProduct(v.col(k));
      if (project) project(zk);
      w.noalias() = a * zk;
      if (project) project(w);
      for (int i = 0; i <= k; ++i) {  // modified Gram-Schmidt
        hm(i, k) = v.col(i).dot(w);
        w -= hm(i, k) * v.col(i);
      }
      hm(k + 1, k) = w.norm();
      if (hm(k + 1, k) > 0.0) v.col(k + 1) = w / hm(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * hm(i, k) + sn[i] * hm(i + 1, k);
        hm(i + 1, k) = -sn[i] * hm(i, k) + cs[i] * hm(i + 1, k);
        hm(i, k) = t;
      }
      const double den = std::hypot(hm(k, k), hm(k + 1, k));
      cs[k] = hm(k, k) / den;
      sn[k] = hm(k + 1, k) / den;
      hm(k, k) = den;
      hm(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      res.residual = std::abs(g[k + 1]) / bnorm;
      if (res.residual <= tol) {
        ++k;
        ++total;
        break;
      }
    }
    // back substitution and update
    Eigen::VectorXd y = hm.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    Eigen::VectorXd dx = v.leftCols(k) * y;
    x += dinv.cwiseProduct(dx);
  }
  if (project) project(x);
  Eigen::VectorXd r = b - a * x;
  if (project) project(r);
  res.residual = r.norm() / bnorm;
  res.iterations = total;
  if (res.residual <= tol) return res;
  throw SolverError("GMRES did not converge", res.residual);
}

}  // namespace homlab
