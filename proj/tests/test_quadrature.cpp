#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fracmin/quadrature.hpp"

using namespace fracmin;

namespace {
const double kPi = std::numbers::pi;
}

TEST_CASE("principal value of an odd singular integrand is exactly zero") {
  QuadratureSpec q{1e-3, 0.1, 1.0, 1e-8};
  auto res = pv_integrate_symmetric([](double z) { return 1.0 / z; }, 0.0, q);
  CHECK(res.value == 0.0);

  // Shifted pivot: cancellation is down to rounding in x0 +- z, not exact.
  auto shifted = pv_integrate_symmetric(
      [](double z) { return 1.0 / (z - 0.25); }, 0.25, q);
  CHECK(std::abs(shifted.value) < 1e-11);
}

TEST_CASE("integrable even singularity integrates to the closed form") {
  const double s = 0.5;
  QuadratureSpec q{5e-4, 0.1, 1.0, 1e-8};
  auto res = pv_integrate_symmetric(
      [s](double z) { return z * z * std::pow(std::abs(z), -1.0 - s); }, 0.0,
      q);
  // integral of |z|^{1-s} over (-1,1) = 2/(2-s)
  CHECK(res.value == doctest::Approx(2.0 / (2.0 - s)).epsilon(2e-5));
  CHECK(res.est_error < 1e-4);
}

TEST_CASE("smooth integrand: est_error lands under the accuracy target") {
  QuadratureSpec q{1e-3, 0.1, 1.0, 1e-8};
  auto res = pv_integrate_symmetric([](double z) { return std::cos(z); }, 0.0, q);
  CHECK(res.value == doctest::Approx(2.0 * std::sin(1.0)).epsilon(1e-9));
  CHECK(res.est_error <= q.tol);
}

TEST_CASE("symmetric subtraction of a bump against the fractional kernel") {
  const double s = 0.8;
  auto f = [s](double z) {
    return (std::exp(-z * z) - 1.0) * std::pow(std::abs(z), -1.0 - s);
  };
  QuadratureSpec q{1e-3, 0.1, 1.0, 1e-8};
  auto res = pv_integrate_symmetric(f, 0.0, q);
  QuadratureSpec fine = q;
  fine.h = q.h / 4.0;
  auto ref = pv_integrate_symmetric(f, 0.0, fine);
  CHECK(std::abs(res.value - ref.value) <=
        std::max(res.est_error, 1e-9) + ref.est_error);
}

TEST_CASE("non-integrable even parts are refused") {
  QuadratureSpec q{1e-3, 0.1, 1.0, 1e-8};
  CHECK_THROWS_AS(pv_integrate_symmetric(
                      [](double z) { return 1.0 / (z * z); }, 0.0, q),
                  NonIntegrableSingularity);
  CHECK_THROWS_AS(pv_integrate_symmetric(
                      [](double z) { return std::pow(std::abs(z), -1.5); },
                      0.0, q),
                  NonIntegrableSingularity);
}

TEST_CASE("planar principal value: odd kernel cancels exactly") {
  QuadratureSpec q{0.02, 0.1, 1.0, 1e-6};
  const double x0[2] = {0.0, 0.0};
  auto res = pv_integrate_symmetric(
      [](double a, double b) {
        const double r = std::hypot(a, b);
        return a / (r * r * r);
      },
      x0, q);
  CHECK(res.value == 0.0);
}

TEST_CASE("planar principal value: smooth field over the unit disc") {
  QuadratureSpec q{0.01, 0.1, 1.0, 1e-4};
  const double x0[2] = {0.0, 0.0};
  auto res = pv_integrate_symmetric(
      [](double a, double b) { return 1.0 + a * a + b * b * b; }, x0, q);
  // area + ∫ r^2 cos^2 over disc = pi + pi/4; the odd cube cancels
  CHECK(res.value == doctest::Approx(kPi + kPi / 4.0).epsilon(2e-4));
}

TEST_CASE("planar principal value refuses the raw fractional kernel") {
  QuadratureSpec q{0.02, 0.1, 1.0, 1e-6};
  const double x0[2] = {0.0, 0.0};
  const double s = 0.5;
  CHECK_THROWS_AS(pv_integrate_symmetric(
                      [s](double a, double b) {
                        return std::pow(a * a + b * b, -0.5 * (2.0 + s));
                      },
                      x0, q),
                  NonIntegrableSingularity);
}

TEST_CASE("planar principal value passes indicator-type interface integrands") {
  // Integrand of the form u(x+z)|z|^{-2-s} with u = ±1 across a curved
  // interface through x: integrable even though single rays look divergent.
  const double s = 0.95;
  QuadratureSpec q{0.005, 0.1, 1.0, 1e-3};
  const double x0[2] = {0.0, 0.0};
  auto u = [](double a, double b) {
    return (b > 0.2 * a * a) ? 1.0 : -1.0;  // interface tangent to the axis
  };
  auto res = pv_integrate_symmetric(
      [&](double a, double b) {
        return u(a, b) * std::pow(a * a + b * b, -0.5 * (2.0 + s));
      },
      x0, q);
  CHECK(std::isfinite(res.value));
  // The antipodal pair survives only in the thin wedge |b| < 0.2 a^2 where
  // both points sit below the parabola, so the integral tips negative.
  CHECK(res.value < 0.0);
}

TEST_CASE("tail integrals match their closed forms") {
  CHECK(tail_integral(1.0, 4.0, 3) == doctest::Approx(4.0 * kPi).epsilon(1e-12));
  CHECK(tail_integral(2.0, 3.0, 2) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(tail_integral(0.5, 2.5, 1) ==
        doctest::Approx(2.0 * std::pow(0.5, -1.5) / 1.5).epsilon(1e-12));
}

TEST_CASE("tail integral agrees with radial quadrature over a finite shell") {
  // tail(rho) - tail(2 rho) must equal the direct radial integral between.
  struct Case { double rho, power; int dim; };
  for (auto c : {Case{1.3, 3.7, 2}, Case{0.8, 2.1, 1}, Case{1.0, 3.5, 3}}) {
    const double shell = tail_integral(c.rho, c.power, c.dim) -
                         tail_integral(2.0 * c.rho, c.power, c.dim);
    const double surface = c.dim == 1 ? 2.0 : (c.dim == 2 ? 2.0 * kPi : 4.0 * kPi);
    const double direct =
        integrate_de(
            [&](double r) {
              return surface * std::pow(r, c.dim - 1 - c.power);
            },
            c.rho, 2.0 * c.rho)
            .value;
    CHECK(shell == doctest::Approx(direct).epsilon(1e-6));
  }
}

TEST_CASE("tail integral rejects divergent or empty configurations") {
  CHECK_THROWS_AS(tail_integral(-1.0, 4.0, 3), BadDomain);
  CHECK_THROWS_AS(tail_integral(0.0, 4.0, 3), BadDomain);
  CHECK_THROWS_AS(tail_integral(1.0, 3.0, 3), BadDomain);  // power == dim
  CHECK_THROWS_AS(tail_integral(1.0, 2.0, 3), BadDomain);
  CHECK_THROWS_AS(tail_integral(1.0, 4.0, 0), BadDomain);
}

TEST_CASE("gap bound: equality at equal gaps, strict otherwise") {
  auto eq = am_hm_bound({1.0, 1.0, 1.0});
  CHECK(eq.lhs == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(eq.rhs == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(eq.holds());

  auto uneq = am_hm_bound({1.0, 2.0});
  CHECK(uneq.lhs == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(uneq.rhs == doctest::Approx(0.15625).epsilon(1e-15));
  CHECK(uneq.lhs < uneq.rhs);
}

TEST_CASE("gap bound holds on random gap vectors") {
  std::mt19937 rng(20240817u);
  std::uniform_real_distribution<double> gap(0.01, 10.0);
  std::uniform_int_distribution<int> len(1, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> gaps(len(rng));
    for (auto& g : gaps) g = gap(rng);
    auto b = am_hm_bound(gaps);
    CHECK(b.holds());
  }
}

TEST_CASE("gap bound input validation") {
  CHECK_THROWS_AS(am_hm_bound({}), EmptyRange);
  CHECK_THROWS_AS(am_hm_bound({1.0, -2.0}), InvalidParams);
  CHECK_THROWS_AS(am_hm_bound({0.0}), InvalidParams);
}

TEST_CASE("double exponential quadrature handles endpoint singularities") {
  auto a = integrate_de([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
  CHECK(a.value == doctest::Approx(2.0).epsilon(1e-11));
  auto b = integrate_de([](double x) { return std::log(1.0 / x); }, 0.0, 1.0);
  CHECK(b.value == doctest::Approx(1.0).epsilon(1e-11));
  auto c = integrate_de([](double x) { return std::sin(x); }, 0.0, kPi / 2.0);
  CHECK(c.value == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("power sums via the zeta tail match classical values") {
  const double zeta2 = hurwitz_zeta(2.0, 1.0);
  CHECK(zeta2 == doctest::Approx(kPi * kPi / 6.0).epsilon(1e-13));
  // classical reference values
  CHECK(hurwitz_zeta(1.5, 1.0) ==
        doctest::Approx(2.6123753486854883).epsilon(1e-12));
  CHECK(hurwitz_zeta(0.5, 1.0) ==
        doctest::Approx(-1.4603545088095868).epsilon(1e-12));
}

TEST_CASE("zeta tail satisfies the shift recurrence") {
  for (double s : {0.3, 0.7, 1.8, 2.5}) {
    for (double a : {0.25, 0.9, 3.7}) {
      const double lhs = hurwitz_zeta(s, a);
      const double rhs = std::pow(a, -s) + hurwitz_zeta(s, a + 1.0);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}
