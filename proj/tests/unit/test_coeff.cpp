#include <cmath>
#include <random>

#include "doctest.h"
#include "homlab/coeff.hpp"

using namespace homlab;

namespace {

// Random dyadic point: y + 1 is then exactly representable.
Point dyadic_point(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k(0, (1 << 20) - 1);
  return {k(rng) / double(1 << 20), k(rng) / double(1 << 20)};
}

CoeffTensor random_tensor(std::mt19937_64& rng, int d, int m) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  CoeffTensor t(d, m);
  for (int r = 0; r < t.size(); ++r)
    for (int c = 0; c < t.size(); ++c) t.flat(r, c) = u(rng);
  return t;
}

double quad_form(const CoeffTensor& a, const double xi[2][2]) {
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int al = 0; al < 2; ++al)
        for (int be = 0; be < 2; ++be) s += a(i, j, al, be) * xi[al][i] * xi[be][j];
  return s;
}

}  // namespace

TEST_CASE("identity tensor constants") {
  const auto rep = check_ellipticity(builtin_family("constant", {{"d", 2}, {"m", 1}, {"value", 1.0}}), 8);
  CHECK(rep.legendre == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rep.legendre_hadamard == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rep.upper_bound == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rep.legendre_pass);
}

TEST_CASE("scalar cosine coefficient extremes") {
  const auto a = builtin_family("laminate-2d", {{"base", 2.0}, {"amp", 1.0}});
  const auto rep = check_ellipticity(a, 16);
  CHECK(rep.legendre == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.upper_bound == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(rep.legendre == rep.legendre_hadamard);
}

TEST_CASE("isotropic elasticity kappa1 against random symmetric sampling") {
  const CoeffTensor a = isotropic_elasticity(1.0, 1.0);
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> g;
  double oracle = 1e300;
  for (int s = 0; s < 100000; ++s) {
    const double p = g(rng), q = g(rng), r = g(rng);
    const double xi[2][2] = {{p, r}, {r, q}};
    const double n2 = p * p + q * q + 2 * r * r;
    oracle = std::min(oracle, quad_form(a, xi) / n2);
  }
  const auto rep = check_ellipticity(a);
  REQUIRE(rep.kappa1);
  CHECK(*rep.kappa1 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(*rep.kappa1 <= oracle + 1e-12);
  CHECK(oracle - *rep.kappa1 < 1e-2);
  CHECK(rep.elasticity_pass);
  CHECK(rep.legendre <= rep.legendre_hadamard);
  CHECK(rep.legendre == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adjoint index swap and involution") {
  CoeffTensor t(2, 1);
  t(0, 1, 0, 0) = 5.0;
  const CoeffTensor s = t.adjoint();
  CHECK(s(1, 0, 0, 0) == 5.0);
  CHECK(s(0, 1, 0, 0) == 0.0);

  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + k % 2;
    const int m = 1 + (k / 2) % 2;
    const CoeffTensor r = random_tensor(rng, d, m);
    CHECK(r.adjoint().adjoint() == r);
  }

  const auto sym = builtin_family("smooth-matrix-2d", {});
  const auto adj = adjoint(sym);
  std::mt19937_64 r2(11);
  for (int k = 0; k < 20; ++k) {
    const Point y = dyadic_point(r2);
    CHECK(adj(y) == sym(y));
  }
  const auto scalar = builtin_family("scalar-1d-cos", {});
  CHECK(adjoint(scalar)({0.3, 0.0}) == scalar({0.3, 0.0}));
}

TEST_CASE("elasticity rewrite") {
  const auto field = builtin_family("elasticity-isotropic-periodic", {});
  SUBCASE("zero shift") {
    const auto same = elasticity_rewrite(field, 0.0);
    CHECK(same({0.2, 0.7}) == field({0.2, 0.7}));
  }
  SUBCASE("isotropic lambda = mu = 1 becomes Legendre with constant >= 1") {
    const auto rw = elasticity_rewrite(field, 1.0);
    const auto rep = check_ellipticity(rw, 16);
    CHECK(rep.legendre >= 1.0 - 1e-12);
    CHECK(rep.symmetric);
    const CoeffTensor diff = rw({0.1, 0.1}) - field({0.1, 0.1});
    CHECK(diff(0, 1, 1, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(diff(0, 1, 0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("mu above kappa1 / 2 is rejected") {
    CHECK_THROWS_AS(elasticity_rewrite(field, 1.01), ValidationError);
  }
  SUBCASE("property: Legendre constant >= mu for random Lame data") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::uniform_real_distribution<double> frac(0.05, 1.0);
    for (int k = 0; k < 50; ++k) {
      const double mu_l = u(rng);
      const double lam = u(rng) - 0.5 * mu_l;
      const CoeffTensor a = isotropic_elasticity(lam, mu_l);
      const auto rep = check_ellipticity(a);
      REQUIRE(rep.elasticity_pass);
      const double mu = frac(rng) * 0.5 * *rep.kappa1;
      const auto out = check_ellipticity(elasticity_rewrite(a, mu));
      CHECK(out.legendre >= mu - 1e-10);
      CHECK(out.symmetric);
    }
  }
}

TEST_CASE("builtin families") {
  SUBCASE("formulas") {
    const auto c = builtin_family("scalar-1d-cos", {{"base", 2.0}, {"amp", 1.0}});
    CHECK(c({0.0, 0.0})(0, 0, 0, 0) == doctest::Approx(3.0));
    CHECK(c({0.5, 0.0})(0, 0, 0, 0) == doctest::Approx(1.0));
    const auto cb = builtin_family("checkerboard-2d", {{"alpha", 1.0}, {"beta", 4.0}});
    CHECK(cb({0.25, 0.25})(0, 0, 0, 0) == 1.0);
    CHECK(cb({0.75, 0.25})(0, 0, 0, 0) == 4.0);
    CHECK(cb({0.25, 0.75})(0, 0, 0, 0) == 4.0);
    CHECK(cb({0.75, 0.75})(0, 0, 0, 0) == 1.0);
    CHECK(cb({0.5, 0.0})(0, 0, 0, 0) == 4.0);  // half-open cells
    CHECK(cb({0.5, 0.5})(1, 1, 0, 0) == 1.0);
    const auto id = builtin_family("constant", {{"d", 2}, {"value", 1.0}});
    CHECK(id({0.3, 0.9}) == CoeffTensor::identity(2, 1));
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(builtin_family("checkerboard-2d", {{"alpha", 0.0}}), ValidationError);
    CHECK_THROWS_AS(builtin_family("nope", {}), ValidationError);
    CHECK_THROWS_AS(builtin_family("laminate-2d", {{"bogus", 1}}), ValidationError);
    CHECK_THROWS_AS(builtin_family("scalar-1d-cos", {{"amp", 3.0}}), ValidationError);
  }
  SUBCASE("periodicity and m = 1 constants, every family") {
    std::mt19937_64 rng(5);
    for (const auto& name : builtin_family_names()) {
      const auto a = builtin_family(name, {});
      for (int s = 0; s < 50; ++s) {
        const Point y = dyadic_point(rng);
        CHECK(a({y[0] + 1.0, y[1]}) == a(y));
        if (a.dim() == 2) CHECK(a({y[0], y[1] + 1.0}) == a(y));
        CHECK(a({y[0] - 3.0, y[1]}) == a(y));
      }
      const auto rep = check_ellipticity(a, 32);
      if (a.components() == 1 && a.symmetric()) CHECK(rep.legendre == rep.legendre_hadamard);
      CHECK(rep.legendre <= rep.legendre_hadamard + 1e-15);
      switch (a.ellipticity_class()) {
        case EllipticityClass::legendre: CHECK(rep.legendre_pass); break;
        case EllipticityClass::legendre_hadamard: CHECK(rep.legendre_hadamard_pass); break;
        case EllipticityClass::elasticity: CHECK(rep.elasticity_pass); break;
      }
    }
  }
}

TEST_CASE("non-finite coefficient is rejected with its location") {
  CoefficientField bad("bad", 1, 1,
                       [](const Point& y) {
                         CoeffTensor t(1, 1);
                         t(0, 0, 0, 0) = y[0] > 0.4 ? NAN : 1.0;
                         return t;
                       },
                       Smoothness::smooth_periodic, true, EllipticityClass::legendre);
  try {
    check_ellipticity(bad, 8);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("y = (0.5") != std::string::npos);
  }
  CHECK_THROWS_AS(check_ellipticity(bad, 4), ValidationError);
}

TEST_CASE("Legendre-Hadamard but not Legendre tensor") {
  // a_ij^{ab} = delta_ij delta_ab + t (delta_ia delta_jb - delta_ib delta_ja):
  // rank-one forms see |xi|^2, the full form loses ellipticity for t >= 1.
  CoeffTensor a = CoeffTensor::identity(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int al = 0; al < 2; ++al)
        for (int be = 0; be < 2; ++be)
          a(i, j, al, be) += 1.5 * ((i == al && j == be) - (i == be && j == al));
  const auto rep = check_ellipticity(a);
  CHECK(rep.legendre_hadamard == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.legendre == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK_FALSE(rep.legendre_pass);
  CHECK(rep.legendre_hadamard_pass);
}
