#include <cmath>
#include <random>

#include "doctest.h"
#include "homlab/cell.hpp"

using namespace homlab;

namespace {

// I(y) = int_0^y dt / (2 + cos 2 pi t), closed form on [0, 1].
double inv_a_integral(double y) {
  const double t = kPi * y;
  return std::atan2(std::sin(t), std::sqrt(3.0) * std::cos(t)) / (kPi * std::sqrt(3.0));
}

// Corrector of a = 2 + cos 2 pi y: chi' = sqrt3 / a - 1, mean zero.
double chi_1d_oracle(double y) {
  static const double mean = [] {
    const int n = 20000;  // composite Simpson
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double x = double(k) / n;
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      s += w * (std::sqrt(3.0) * inv_a_integral(x) - x);
    }
    return s / (3.0 * n);
  }();
  return std::sqrt(3.0) * inv_a_integral(y) - y - mean;
}

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("identity coefficient: zero correctors and exact tensor") {
  const auto a = builtin_family("constant", {{"d", 2}, {"m", 1}, {"value", 1.0}});
  const auto chi = solve_correctors(a, 16);
  for (const auto& c : chi.columns) CHECK(max_abs(c.values) == 0.0);
  const auto ahat = homogenized_tensor(a, chi);
  CHECK(ahat.value.max_abs_diff(CoeffTensor::identity(2, 1)) < 1e-15);
  const auto flux = flux_field(a, chi, ahat);
  CHECK(flux.max_abs_b() < 1e-15);
  auto fl = flux;
  flux_correctors(fl);
  for (const auto& p : fl.phi) CHECK(max_abs(p) == 0.0);
}

TEST_CASE("1D cosine corrector against the quadrature oracle") {
  const auto a = builtin_family("scalar-1d-cos", {});
  const auto chi = solve_correctors(a, 256);
  double err = 0.0;
  double mean = 0.0;
  for (Index k = 0; k < chi.grid->num_nodes(); ++k) {
    const double y = chi.grid->node(k)[0];
    err = std::max(err, std::abs(chi.chi(0, 0)(k, 0) - chi_1d_oracle(y)));
    mean += chi.chi(0, 0)(k, 0);
  }
  CHECK(err <= 1e-4);
  CHECK(std::abs(mean / 256.0) <= 1e-8 * chi.chi(0, 0).values.norm() / 16.0 + 1e-12);
  CHECK(chi.residuals[0] <= 1e-10);

  const auto ahat = homogenized_tensor(a, chi);
  CHECK(std::abs(ahat.value(0, 0, 0, 0) - std::sqrt(3.0)) < 2e-5);
  // Voigt-Reuss: harmonic mean sqrt3 <= a_hat <= arithmetic mean 2
  CHECK(ahat.value(0, 0, 0, 0) >= std::sqrt(3.0) - 1e-4);
  CHECK(ahat.value(0, 0, 0, 0) <= 2.0);

  const auto flux = flux_field(a, chi, ahat);
  CHECK(flux.max_abs_b() <= 1e-8);
  const auto adj = adjoint_correctors(a, 256);
  CHECK(max_abs(adj.chi(0, 0).values - chi.chi(0, 0).values) <= 1e-10);
}

TEST_CASE("extrapolated 1D tensor") {
  const auto a = builtin_family("scalar-1d-cos", {});
  const auto ahat = effective_tensor(a, 512);
  REQUIRE(ahat.extrapolated);
  CHECK(std::abs(ahat.best()(0, 0, 0, 0) - std::sqrt(3.0)) <= 1e-6);
  // the raw Galerkin value carries the second-order quadrature error
  CHECK(std::abs(ahat.value(0, 0, 0, 0) - std::sqrt(3.0)) > 1e-6);
}

TEST_CASE("laminate reduces to the 1D problem") {
  const auto a = builtin_family("laminate-2d", {});
  const auto chi = solve_correctors(a, 64);
  const auto chi1 = solve_correctors(builtin_family("scalar-1d-cos", {}), 64);
  CHECK(max_abs(chi.chi(1, 0).values) <= 1e-8);
  double err = 0.0;
  for (Index k = 0; k < chi.grid->num_nodes(); ++k) {
    const auto g = chi.grid->grid_index(k);
    err = std::max(err, std::abs(chi.chi(0, 0)(k, 0) - chi1.chi(0, 0)(g[0], 0)));
  }
  CHECK(err <= 1e-8);

  const auto ahat = homogenized_tensor(a, solve_correctors(a, 256));
  CoeffTensor expect(2, 1);
  expect(0, 0, 0, 0) = std::sqrt(3.0);
  expect(1, 1, 0, 0) = 2.0;
  CHECK(ahat.value.max_abs_diff(expect) <= 1e-4);
  CHECK(ahat.symmetry_defect <= 1e-8);
}

TEST_CASE("laminate flux field and flux corrector") {
  const auto a = builtin_family("laminate-2d", {});
  const auto chi = solve_correctors(a, 256);
  const auto ahat = homogenized_tensor(a, chi);
  auto flux = flux_field(a, chi, ahat);
  CHECK(flux.mean_defect <= 1e-6 * 3.0);
  const Mesh& g = *flux.grid;
  double e11 = 0.0;
  double e22 = 0.0;
  for (Index c = 0; c < g.num_cells(); ++c) {
    // oracle: cell average of a(y1) - 2 = (sin 2 pi y1) / (2 pi h) differences
    const double y0 = g.cell_origin(c)[0];
    const double h = g.h();
    const double avg = (std::sin(2 * kPi * (y0 + h)) - std::sin(2 * kPi * y0)) / (2 * kPi * h);
    e11 = std::max(e11, std::abs(flux.b_at(c, 0, 0, 0, 0)));
    e22 = std::max(e22, std::abs(flux.b_at(c, 1, 1, 0, 0) - avg));
  }
  CHECK(e11 <= 1e-4);
  CHECK(e22 <= 1e-4);

  flux_correctors(flux);
  const auto& phi = flux.phi_at(0, 1, 1, 0, 0);
  double ephi = 0.0;
  for (Index k = 0; k < g.num_nodes(); ++k) {
    const double y1 = g.node(k)[0];
    ephi = std::max(ephi, std::abs(phi[k] - std::sin(2 * kPi * y1) / (2 * kPi)));
  }
  CHECK(ephi <= 1e-4);
  CHECK(flux.antisymmetry_defect() == 0.0);
}

TEST_CASE("flux corrector reconstruction converges at first order") {
  const auto a = builtin_family("smooth-matrix-2d", {});
  double prev = 0.0;
  for (int n : {32, 64}) {
    const auto chi = solve_correctors(a, n);
    auto flux = flux_field(a, chi, homogenized_tensor(a, chi));
    flux_correctors(flux);
    CHECK(flux.antisymmetry_defect() == 0.0);
    const double e = flux.reconstruction_error();
    if (prev > 0.0) {
      CHECK(e / prev >= 0.35);
      CHECK(e / prev <= 0.65);
    }
    prev = e;
  }
}

TEST_CASE("duality and structure certificates") {
  CellOptions opt;
  opt.tol = 1e-12;
  SUBCASE("nonsymmetric smooth matrix") {
    const auto a = builtin_family("smooth-matrix-2d", {{"skew", 0.4}});
    REQUIRE_FALSE(a.symmetric());
    const auto ahat = homogenized_tensor(a, solve_correctors(a, 32, opt));
    const auto adj = homogenized_tensor(adjoint(a), adjoint_correctors(a, 32, opt));
    CHECK(adj.value.max_abs_diff(ahat.value.adjoint()) <= 1e-8);
    CHECK(ahat.certificate.legendre_pass);
  }
  SUBCASE("symmetric family: symmetric tensor, Legendre constant preserved") {
    const auto a = builtin_family("smooth-matrix-2d", {});
    const auto chi = solve_correctors(a, 32, opt);
    const auto adj = adjoint_correctors(a, 32, opt);
    for (int c = 0; c < 2; ++c) CHECK(max_abs(chi.columns[c].values - adj.columns[c].values) <= 1e-10);
    const auto ahat = homogenized_tensor(a, chi);
    CHECK(ahat.symmetry_defect <= 1e-8);
    const double mu = check_ellipticity(a, 256).legendre;
    CHECK(ahat.certificate.legendre >= mu - 1e-6);
  }
  SUBCASE("elasticity class preserved") {
    const auto a = builtin_family("elasticity-isotropic-periodic",
                                  {{"lambda", 1.0}, {"mu", 1.0}, {"lambda_amp", 0.5}, {"mu_amp", 0.5}});
    const auto rep = check_ellipticity(a, 256);
    const auto ahat = homogenized_tensor(a, solve_correctors(a, 32, opt));
    REQUIRE(ahat.certificate.kappa1);
    CHECK(*ahat.certificate.kappa1 >= *rep.kappa1 - 1e-4);
    CHECK(*ahat.certificate.kappa2 <= *rep.kappa2 + 1e-4);
    CHECK(ahat.symmetry_defect <= 1e-8);
  }
}

TEST_CASE("grid refinement of the effective tensor is second order") {
  const auto a = builtin_family("smooth-matrix-2d", {});
  std::vector<CoeffTensor> t;
  for (int n : {16, 32, 64, 128}) t.push_back(homogenized_tensor(a, solve_correctors(a, n)).value);
  const double d1 = t[0].max_abs_diff(t[1]);
  const double d2 = t[1].max_abs_diff(t[2]);
  const double d3 = t[2].max_abs_diff(t[3]);
  CHECK(d2 < d1);
  CHECK(d3 < d2);
  const double slope = std::log2(d2 / d3);
  CHECK(slope >= 1.5);
  CHECK(slope <= 2.5);
}

TEST_CASE("cell solver input validation") {
  const auto a = builtin_family("scalar-1d-cos", {});
  CHECK_THROWS_AS(solve_correctors(a, 8), ValidationError);
  CHECK_THROWS_AS(solve_correctors(a, 48), ValidationError);
  CellOptions opt;
  opt.tol = 1e-3;
  CHECK_THROWS_AS(solve_correctors(a, 16, opt), ValidationError);
  opt.tol = 1e-10;
  opt.max_iter = 1;
  CHECK_THROWS_AS(solve_correctors(a, 64, opt), SolverError);
}
