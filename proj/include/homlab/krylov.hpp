#pragma once

#include <Eigen/Sparse>

#include <functional>

#include "homlab/common.hpp"

namespace homlab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct KrylovResult {
  int iterations = 0;
  double residual = 0.0;  ///< final relative residual ||b - Ax|| / ||b||
};

/// In-place projection applied to iterates (e.g. removal of constants).
using Projector = std::function<void(Eigen::VectorXd&)>;

/// Jacobi-preconditioned conjugate gradients. Throws SolverError on
/// non-convergence within max_iter, or when p^T A p <= 0 (indefinite system).
KrylovResult pcg(const SparseMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                 double tol, int max_iter, const Projector& project = {});

/// Right-preconditioned (Jacobi) restarted GMRES for nonsymmetric systems.
KrylovResult gmres(const SparseMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                   double tol, int max_iter, int restart = 50, const Projector& project = {});

}  // namespace homlab
