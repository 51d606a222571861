#include "homlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace homlab {

FEField::FEField(std::shared_ptr<const Mesh> mesh, int m)
    : values(Eigen::VectorXd::Zero(mesh->num_nodes() * m)), mesh_(std::move(mesh)), m_(m) {}

FEField::FEField(std::shared_ptr<const Mesh> mesh, int m, Eigen::VectorXd v)
    : values(std::move(v)), mesh_(std::move(mesh)), m_(m) {
  if (values.size() != mesh_->num_nodes() * m_) {
    throw ValidationError("field length must equal m * node count");
  }
}

FEField FEField::interpolate(std::shared_ptr<const Mesh> mesh, int m, const PointFn& fn) {
  FEField f(mesh, m);
  for (Index k = 0; k < mesh->num_nodes(); ++k) fn(mesh->node(k), f.values.data() + k * m);
  return f;
}

void FEField::eval_local(Index cell, const Point& xi, double* value, double* grad) const {
  const Mesh& msh = *mesh_;
  const int d = msh.dim();
  const int nn = msh.nodes_per_cell();
  double n[4];
  double g[4][2];
  shape_functions(d, xi, n, g);
  const auto& nodes = msh.cell_nodes(cell);
  const double inv_h = 1.0 / msh.h();
  for (int a = 0; a < m_; ++a) {
    double v = 0.0;
    double gx = 0.0;
    double gy = 0.0;
    for (int q = 0; q < nn; ++q) {
      const double u = values[nodes[q] * m_ + a];
      v += n[q] * u;
      gx += g[q][0] * u;
      gy += g[q][1] * u;
    }
    if (value) value[a] = v;
    if (grad) {
      grad[a * d] = gx * inv_h;
      if (d == 2) grad[a * d + 1] = gy * inv_h;
    }
  }
}

void FEField::eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
                   double* grad) const {
  if (&mesh == mesh_.get()) {
    eval_local(cell, xi, value, grad);
    return;
  }
  eval_at(mesh.map(cell, xi), value, grad);
}

void FEField::eval_at(const Point& x, double* value, double* grad) const {
  const auto loc = mesh_->locate(x);
  if (!loc) {
    std::ostringstream os;
    os << "point (" << x[0] << ", " << x[1] << ") lies outside the field's mesh";
    throw ValidationError(os.str());
  }
  eval_local(loc->first, loc->second, value, grad);
}

FEField FEField::recovered_gradient() const {
  const Mesh& msh = *mesh_;
  const int d = msh.dim();
  const int nn = msh.nodes_per_cell();
  FEField out(mesh_, m_ * d);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(msh.num_nodes());
  std::vector<double> grad(m_ * d);
  for (Index c = 0; c < msh.num_cells(); ++c) {
    const auto& nodes = msh.cell_nodes(c);
    for (int q = 0; q < nn; ++q) {
      const Point xi{static_cast<double>(q & 1), static_cast<double>((q >> 1) & 1)};
      eval_local(c, xi, nullptr, grad.data());
      for (int r = 0; r < m_ * d; ++r) out.values[nodes[q] * m_ * d + r] += grad[r];
      count[nodes[q]] += 1.0;
    }
  }
  for (Index k = 0; k < msh.num_nodes(); ++k) {
    for (int r = 0; r < m_ * d; ++r) out.values[k * m_ * d + r] /= count[k];
  }
  return out;
}

void ClosedFormField::eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
                           double* grad) const {
  fn_(mesh.map(cell, xi), value, grad);
}

LinearCombination& LinearCombination::add(double c, const Field& f) {
  if (!terms_.empty() && f.components() != terms_.front().second->components()) {
    throw ValidationError("linear combination of fields with different component counts");
  }
  terms_.emplace_back(c, &f);
  return *this;
}

int LinearCombination::components() const {
  return terms_.empty() ? 0 : terms_.front().second->components();
}

void LinearCombination::eval(const Mesh& mesh, Index cell, const Point& xi, double* value,
                             double* grad) const {
  const int m = components();
  const int d = mesh.dim();
  double v[8];
  double g[16];
  if (value) std::fill(value, value + m, 0.0);
  if (grad) std::fill(grad, grad + m * d, 0.0);
  for (const auto& [c, f] : terms_) {
    f->eval(mesh, cell, xi, value ? v : nullptr, grad ? g : nullptr);
    for (int a = 0; a < m; ++a) {
      if (value) value[a] += c * v[a];
      if (grad) {
        for (int k = 0; k < d; ++k) grad[a * d + k] += c * g[a * d + k];
      }
    }
  }
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "L2") return NormKind::L2;
  if (s == "H1") return NormKind::H1;
  if (s == "H1-semi") return NormKind::H1_semi;
  if (s == "Lp") return NormKind::Lp;
  if (s == "Linf") return NormKind::Linf;
  if (s == "boundary-L2") return NormKind::boundary_L2;
  throw ValidationError("unknown norm '" + s + "'");
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::L2: return "L2";
    case NormKind::H1: return "H1";
    case NormKind::H1_semi: return "H1-semi";
    case NormKind::Lp: return "Lp";
    case NormKind::Linf: return "Linf";
    case NormKind::boundary_L2: return "boundary-L2";
  }
  return "unknown";
}

double norm(const Mesh& mesh, const Field& f, NormKind kind, double p, int order) {
  const int m = f.components();
  const int d = mesh.dim();
  if (m > 8) throw ValidationError("norm supports at most 8 components");
  double v[8];
  double g[16];

  if (kind == NormKind::Linf) {
    double mx = 0.0;
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      for (int q = 0; q < mesh.nodes_per_cell(); ++q) {
        const Point xi{static_cast<double>(q & 1), static_cast<double>((q >> 1) & 1)};
        f.eval(mesh, c, xi, v, nullptr);
        double s = 0.0;
        for (int a = 0; a < m; ++a) s += v[a] * v[a];
        mx = std::max(mx, std::sqrt(s));
      }
    }
    return mx;
  }

  const GaussRule& rule = gauss_rule(order);
  const int nq = static_cast<int>(rule.points.size());

  if (kind == NormKind::boundary_L2) {
    if (mesh.periodic()) throw ValidationError("the torus has no boundary");
    double acc = 0.0;
    for (const Mesh::Facet& fc : mesh.facets()) {
      if (d == 1) {
        f.eval(mesh, fc.cell, {static_cast<double>(fc.side), 0.0}, v, nullptr);
        for (int a = 0; a < m; ++a) acc += v[a] * v[a];
        continue;
      }
      for (int q = 0; q < nq; ++q) {
        Point xi;
        const double t = rule.points[q];
        switch (fc.side) {
          case 0: xi = {0.0, t}; break;
          case 1: xi = {1.0, t}; break;
          case 2: xi = {t, 0.0}; break;
          default: xi = {t, 1.0}; break;
        }
        f.eval(mesh, fc.cell, xi, v, nullptr);
        double s = 0.0;
        for (int a = 0; a < m; ++a) s += v[a] * v[a];
        acc += rule.weights[q] * fc.length * s;
      }
    }
    return std::sqrt(acc);
  }

  if (kind == NormKind::Lp && !(p >= 1.0)) throw ValidationError("Lp norm requires p >= 1");
  const bool need_val = kind != NormKind::H1_semi;
  const bool need_grad = kind == NormKind::H1 || kind == NormKind::H1_semi;
  const double cell_measure = d == 1 ? mesh.h() : mesh.h() * mesh.h();
  const int nq2 = d == 1 ? 1 : nq;
  double acc = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    double cell_acc = 0.0;
    for (int qy = 0; qy < nq2; ++qy) {
      for (int qx = 0; qx < nq; ++qx) {
        const Point xi{rule.points[qx], d == 1 ? 0.0 : rule.points[qy]};
        const double w = rule.weights[qx] * (d == 1 ? 1.0 : rule.weights[qy]);
        f.eval(mesh, c, xi, need_val ? v : nullptr, need_grad ? g : nullptr);
        double s = 0.0;
        if (need_val) {
          double vv = 0.0;
          for (int a = 0; a < m; ++a) vv += v[a] * v[a];
          s += kind == NormKind::Lp ? std::pow(std::sqrt(vv), p) : vv;
        }
        if (need_grad) {
          for (int r = 0; r < m * d; ++r) s += g[r] * g[r];
        }
        cell_acc += w * s;
      }
    }
    acc += cell_acc * cell_measure;
  }
  return kind == NormKind::Lp ? std::pow(acc, 1.0 / p) : std::sqrt(acc);
}

Eigen::VectorXd integrate(const Mesh& mesh, const Field& f, int order) {
  const int m = f.components();
  const int d = mesh.dim();
  const GaussRule& rule = gauss_rule(order);
  const int nq = static_cast<int>(rule.points.size());
  const int nq2 = d == 1 ? 1 : nq;
  const double cell_measure = d == 1 ? mesh.h() : mesh.h() * mesh.h();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  std::vector<double> v(m);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (int qy = 0; qy < nq2; ++qy) {
      for (int qx = 0; qx < nq; ++qx) {
        const Point xi{rule.points[qx], d == 1 ? 0.0 : rule.points[qy]};
        const double w = rule.weights[qx] * (d == 1 ? 1.0 : rule.weights[qy]) * cell_measure;
        f.eval(mesh, c, xi, v.data(), nullptr);
        for (int a = 0; a < m; ++a) acc[a] += w * v[a];
      }
    }
  }
  return acc;
}

double inner_l2(const Mesh& mesh, const Field& a, const Field& b, int order) {
  if (a.components() != b.components()) throw ValidationError("inner product shape mismatch");
  const int m = a.components();
  const int d = mesh.dim();
  const GaussRule& rule = gauss_rule(order);
  const int nq = static_cast<int>(rule.points.size());
  const int nq2 = d == 1 ? 1 : nq;
  const double cell_measure = d == 1 ? mesh.h() : mesh.h() * mesh.h();
  std::vector<double> va(m);
  std::vector<double> vb(m);
  double acc = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (int qy = 0; qy < nq2; ++qy) {
      for (int qx = 0; qx < nq; ++qx) {
        const Point xi{rule.points[qx], d == 1 ? 0.0 : rule.points[qy]};
        const double w = rule.weights[qx] * (d == 1 ? 1.0 : rule.weights[qy]) * cell_measure;
        a.eval(mesh, c, xi, va.data(), nullptr);
        b.eval(mesh, c, xi, vb.data(), nullptr);
        for (int k = 0; k < m; ++k) acc += w * va[k] * vb[k];
      }
    }
  }
  return acc;
}

}  // namespace homlab
