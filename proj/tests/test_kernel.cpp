#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fracmin/kernel.hpp"
#include "fracmin/quadrature.hpp"

using namespace fracmin;

namespace {

const double kPi = std::numbers::pi;
const double kSGrid[4] = {0.5, 0.8, 0.95, 0.99};

// Independent Beta evaluation straight from its integral representation.
double beta_by_quadrature(double a, double b) {
  return integrate_de(
             [a, b](double t) {
               return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0);
             },
             0.0, 1.0)
      .value;
}

}  // namespace

TEST_CASE("flat sheet constant: closed form in three dimensions") {
  for (double s : kSGrid) {
    CHECK(c_ns({3, s}) == doctest::Approx(2.0 * kPi / (1.0 + s)).epsilon(1e-10));
  }
  CHECK(c_ns({3, 0.5}) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-10));
}

TEST_CASE("flat sheet constant matches direct Beta quadrature for n = 2,3,4") {
  for (int n : {2, 3, 4}) {
    const double prefactor = 0.5 * sphere_measure(n - 2);
    for (double s : kSGrid) {
      const double expected =
          prefactor * beta_by_quadrature(0.5 * (n - 1), 0.5 * (1.0 + s));
      CHECK(c_ns({n, s}) == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("flat sheet constant approaches the classical limits as s -> 1") {
  CHECK(std::abs(c_ns({3, 0.999}) - kPi) / kPi < 0.01);
  CHECK(std::abs(c_ns({2, 0.999}) - 2.0) / 2.0 < 0.01);
}

TEST_CASE("graph limit constants") {
  CHECK(c_circ(2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c_circ(3) == doctest::Approx(kPi / 2.0).epsilon(1e-14));
  CHECK(c_circ(4) == doctest::Approx(2.0 * kPi / 3.0).epsilon(1e-14));
}

TEST_CASE("sphere surface measures") {
  CHECK(sphere_measure(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(sphere_measure(1) == doctest::Approx(2.0 * kPi).epsilon(1e-14));
  CHECK(sphere_measure(2) == doctest::Approx(4.0 * kPi).epsilon(1e-14));
  CHECK(sphere_measure(3) == doctest::Approx(2.0 * kPi * kPi).epsilon(1e-14));
}

TEST_CASE("beta function basics") {
  CHECK(beta_fn(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(beta_fn(2.5, 1.0) == doctest::Approx(1.0 / 2.5).epsilon(1e-13));
  CHECK(beta_fn(1.5, 2.75) == doctest::Approx(beta_fn(2.75, 1.5)).epsilon(1e-14));
}

TEST_CASE("profile function: odd, monotone, saturating") {
  FractionalParams p{2, 0.8};
  CHECK(profile_F(0.0, p) == 0.0);
  CHECK(profile_F(-1.3, p) == doctest::Approx(-profile_F(1.3, p)).epsilon(1e-13));
  CHECK(profile_F(0.5, p) < profile_F(1.0, p));
  const double ceiling = profile_F_infinity(p);
  CHECK(profile_F(1e9, p) == doctest::Approx(ceiling).epsilon(1e-10));
  for (double t : {0.1, 1.0, 5.0, 50.0}) {
    CHECK(profile_F(t, p) < ceiling);
  }
  // ceiling value against the Beta closed form
  CHECK(ceiling ==
        doctest::Approx(0.5 * beta_fn(0.5, 0.5 * (2.0 + 0.8 - 1.0)))
            .epsilon(1e-12));
}

TEST_CASE("profile derivative inverts the kernel decay") {
  // 7-point first derivative of F(t), compared against (1+t^2)^{-(n+s)/2}.
  const double d = 0.01;
  for (int n : {2, 3, 4}) {
    for (double s : {0.5, 0.95}) {
      FractionalParams p{n, s};
      for (double t : {0.0, 0.5, 1.0, 3.0}) {
        const auto F = [&](double x) { return profile_F(x, p); };
        const double deriv =
            (-F(t + 3 * d) + 9 * F(t + 2 * d) - 45 * F(t + d) +
             45 * F(t - d) - 9 * F(t - 2 * d) + F(t - 3 * d)) /
            (-60.0 * d);
        const double expected = std::pow(1.0 + t * t, -0.5 * (n + s));
        CHECK(deriv == doctest::Approx(expected).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("normalization scales the profile linearly") {
  FractionalParams p{3, 0.5};
  CHECK(profile_F(0.7, p, 2.5) ==
        doctest::Approx(2.5 * profile_F(0.7, p, 1.0)).epsilon(1e-13));
  CHECK_THROWS_AS(profile_F(0.7, p, 0.0), InvalidParams);
  CHECK_THROWS_AS(profile_F(0.7, p, -1.0), InvalidParams);
}

TEST_CASE("angular reduction identity verified by quadrature") {
  for (int n : {2, 3, 4}) {
    for (double s : kSGrid) {
      auto check = omega_check({n, s});
      CHECK(check.rel_error <= 1e-8);
    }
  }
}

TEST_CASE("kernel constants bundle is consistent") {
  FractionalParams p{3, 0.8};
  auto k = kernel_constants(p);
  CHECK(k.sigma == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(k.c_ns == doctest::Approx(c_ns(p)).epsilon(1e-15));
  CHECK(k.c_circ == doctest::Approx(c_circ(3)).epsilon(1e-15));
  CHECK(k.f_infinity == doctest::Approx(profile_F_infinity(p)).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(c_ns({1, 0.5}), InvalidParams);
  CHECK_THROWS_AS(c_ns({3, 0.0}), InvalidParams);
  CHECK_THROWS_AS(c_ns({3, 1.0}), InvalidParams);
  CHECK_THROWS_AS(c_ns({3, 1.2}), InvalidParams);
  CHECK_THROWS_AS(c_circ(1), InvalidParams);
  CHECK_THROWS_AS(sphere_measure(-1), InvalidParams);
}

TEST_CASE("profile table tracks the direct evaluation") {
  for (int n : {2, 3}) {
    for (double s : {0.5, 0.95}) {
      FractionalParams p{n, s};
      ProfileTable table(n + s);
      for (double t : {0.0, 0.03, 0.7, 1.0, 2.5, 10.0, 1e4}) {
        CHECK(table(t) == doctest::Approx(profile_F(t, p)).epsilon(1e-10));
        CHECK(table(-t) == doctest::Approx(-table(t)).epsilon(1e-15));
      }
      CHECK(table.infinity() ==
            doctest::Approx(profile_F_infinity(p)).epsilon(1e-11));
    }
  }
  // Steeper decay used by gradient-kernel columns.
  ProfileTable steep(3.0 + 0.5 + 2.0);
  const double direct =
      integrate_de(
          [](double tau) { return std::pow(1.0 + tau * tau, -0.5 * 5.5); },
          0.0, 2.0)
          .value;
  CHECK(steep(2.0) == doctest::Approx(direct).epsilon(1e-11));
  CHECK_THROWS_AS(ProfileTable(0.9), InvalidParams);
}
