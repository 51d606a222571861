#include <cmath>

#include "doctest.h"
#include "homlab/fem.hpp"
#include "homlab/oned.hpp"

using namespace homlab;

TEST_CASE("1D oracle primitives") {
  const oned::CosineCoefficient a;
  CHECK(a.ahat() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  // independent check of the closed-form primitive
  const oned::Primitive p([&a](double s) { return 1.0 / a.a(s); }, 1.0, 4.0);
  for (double y : {0.1, 0.5, 0.77, 1.3, 2.9, 3.5}) {
    CHECK(std::abs(a.inv_integral(y) - p(y)) <= 1e-13);
  }
  CHECK(a.inv_integral(1.0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(std::abs(a.inv_integral(-0.3) + a.inv_integral(0.3)) <= 1e-15);
  // corrector is periodic with the derivative ahat / a - 1
  for (double y : {0.05, 0.4, 0.91}) {
    CHECK(std::abs(a.chi(y + 1.0) - a.chi(y)) <= 1e-14);
    const double fd = (a.chi(y + 1e-6) - a.chi(y - 1e-6)) / 2e-6;
    CHECK(std::abs(fd - a.dchi(y)) <= 1e-8);
  }
}

TEST_CASE("1D oracle solutions satisfy their equations") {
  const oned::CosineCoefficient a;
  const double eps = 1.0 / 16;
  const oned::DirichletUnitLoad dl(a, eps);
  CHECK(std::abs(dl.u(0.0)) <= 1e-15);
  CHECK(std::abs(dl.u(1.0)) <= 1e-13);
  // flux a u' = c1 - x has derivative -1
  const double x = 0.37;
  const double flux_p = a.a((x + 1e-5) / eps) * dl.du(x + 1e-5);
  const double flux_m = a.a((x - 1e-5) / eps) * dl.du(x - 1e-5);
  CHECK((flux_p - flux_m) / 2e-5 == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK((dl.u(x + 1e-6) - dl.u(x - 1e-6)) / 2e-6 == doctest::Approx(dl.du(x)).epsilon(1e-7));

  const oned::NeumannCosineLoad nl(a, eps);
  CHECK(std::abs(nl.du(0.0)) <= 1e-15);
  CHECK(std::abs(nl.du(1.0)) <= 1e-15);
  // mean zero by composite Simpson
  double mean = 0.0;
  const int n = 20000;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    mean += w * nl.u(double(k) / n);
  }
  CHECK(std::abs(mean / (3.0 * n)) <= 1e-9);

  CHECK(oned::dirichlet_corrector(a, eps, 0.0) == 0.0);
  CHECK(oned::dirichlet_corrector(a, eps, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(oned::neumann_corrector(a, eps, 0.5, 0.5) == 0.5);
}

TEST_CASE("oracle agrees with a fine finite element solve") {
  const oned::CosineCoefficient a;
  const double eps = 1.0 / 8;
  const oned::DirichletUnitLoad dl(a, eps);
  BVPSpec spec;
  spec.coefficient = Coefficient::oscillatory(builtin_family("scalar-1d-cos", {}), eps);
  spec.eps = eps;
  spec.source = [](const Point&, double* f) { f[0] = 1.0; };
  const auto mesh = std::make_shared<const Mesh>(Mesh::interval(8 * 1024));
  const Solution s = solve_dirichlet(spec, mesh);
  double err = 0.0;
  for (Index k = 0; k < mesh->num_nodes(); k += 13) err = std::max(err, std::abs(s.u(k, 0) - dl.u(mesh->node(k)[0])));
  CHECK(err <= 1e-7);
}
