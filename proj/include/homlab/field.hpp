#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "homlab/mesh.hpp"

namespace homlab {

/// Anything that can be evaluated with its gradient inside a mesh cell.
/// grad is laid out as grad[alpha * d + k] = d_k u^alpha.
class Field {
 public:
  virtual ~Field() = default;
  virtual int components() const = 0;
  virtual void eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
                    double* grad) const = 0;
};

/// Nodal Q1/P1 field; values[node * m + alpha].
class FEField : public Field {
 public:
  FEField(std::shared_ptr<const Mesh> mesh, int m);
  FEField(std::shared_ptr<const Mesh> mesh, int m, Eigen::VectorXd values);

  using PointFn = std::function<void(const Point& x, double* value)>;
  static FEField interpolate(std::shared_ptr<const Mesh> mesh, int m, const PointFn& fn);

  int components() const override { return m_; }
  void eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
            double* grad) const override;

  /// Value and gradient at a physical point; throws outside the mesh.
  void eval_at(const Point& x, double* value, double* grad) const;

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  double& operator()(Index node, int alpha) { return values[node * m_ + alpha]; }
  double operator()(Index node, int alpha) const { return values[node * m_ + alpha]; }

  /// Nodal gradient recovered by averaging the adjacent cell gradients
  /// (m*d components, alpha*d + k).
  FEField recovered_gradient() const;

  Eigen::VectorXd values;

 private:
  void eval_local(Index cell, const Point& xi, double* value, double* grad) const;

  std::shared_ptr<const Mesh> mesh_;
  int m_;
};

/// Closed-form field; fn writes the value and (optionally) the gradient.
class ClosedFormField : public Field {
 public:
  using Fn = std::function<void(const Point& x, double* value, double* grad)>;
  ClosedFormField(int m, int d, Fn fn) : m_(m), d_(d), fn_(std::move(fn)) {}

  int components() const override { return m_; }
  void eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
            double* grad) const override;
  void eval_point(const Point& x, double* value, double* grad) const { fn_(x, value, grad); }
  int dim() const { return d_; }

 private:
  int m_;
  int d_;
  Fn fn_;
};

/// sum_k c_k f_k for fields sharing a component count.
class LinearCombination : public Field {
 public:
  LinearCombination() = default;
  LinearCombination& add(double c, const Field& f);

  int components() const override;
  void eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
            double* grad) const override;

 private:
  std::vector<std::pair<double, const Field*>> terms_;
};

enum class NormKind { L2, H1, H1_semi, Lp, Linf, boundary_L2 };

NormKind norm_kind_from_string(const std::string& s);
std::string to_string(NormKind k);

/// Quadrature norm on the given mesh (Gauss order 3 per direction by
/// default). Linf is the max over nodes (cell corners). Pointwise magnitude
/// is the Euclidean norm over components.
double norm(const Mesh& mesh, const Field& f, NormKind kind, double p = 2.0, int order = 3);

/// Integral of each component over the mesh.
Eigen::VectorXd integrate(const Mesh& mesh, const Field& f, int order = 3);

/// L2 inner product of two fields with the same component count.
double inner_l2(const Mesh& mesh, const Field& a, const Field& b, int order = 3);

}  // namespace homlab
