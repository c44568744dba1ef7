#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "doctest.h"
#include "fracmin/errors.hpp"
#include "fracmin/kernel.hpp"
#include "fracmin/quadrature.hpp"
#include "fracmin/slab.hpp"

using namespace fracmin;

namespace {

const QuadratureSpec kSpec;

const double gx[12] = {
    0.009219682876640375, 0.047941371814762574, 0.11504866290284765,
    0.20634102285669128,  0.31608425050090994,  0.43738329574426554,
    0.5626167042557344,   0.6839157494990901,   0.7936589771433087,
    0.8849513370971523,   0.9520586281852374,   0.9907803171233596};
const double gw[12] = {
    0.023587668193255914, 0.05346966299765922, 0.08003916427167311,
    0.10158371336153296,  0.11674626826917742, 0.1245735229067014,
    0.1245735229067014,   0.11674626826917742, 0.10158371336153296,
    0.08003916427167311,  0.05346966299765922, 0.023587668193255914};

// Planar principal value of sigma (chi_{E^c} - chi_E) |x-y|^{-2-s} for a
// finite slab set, evaluated at breakpoint k by polar pairing of opposite
// rays: the radial integral telescopes exactly over the crossing radii
// d_i / sin(theta) and the divergence at the boundary cancels within each
// ray pair. The angular integral is graded toward the tangent directions.
double planar_pv(const SlabPattern& pat, std::size_t k) {
  const double s = pat.params.s;
  const auto& bp = pat.breakpoints;
  const double x = bp[k];
  std::vector<double> up, down;
  for (double b : bp) {
    if (b > x) up.push_back(b - x);
    if (b < x) down.push_back(x - b);
  }
  std::sort(up.begin(), up.end());
  std::sort(down.begin(), down.end());
  const double v0 = (k % 2 == 0) ? -1.0 : 1.0;
  auto alt = [&](const std::vector<double>& d, double sth) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double t = std::pow(d[i] / sth, -s);
      acc += (i % 2 == 0) ? -t : t;
    }
    return acc;
  };
  double total = 0.0;
  for (int half = 0; half < 2; ++half) {
    for (int panel = 0; panel < 4; ++panel) {
      for (int q = 0; q < 12; ++q) {
        const double u = 0.25 * (panel + gx[q]);
        const double th0 = 0.5 * M_PI * u * u;
        const double th = half == 0 ? th0 : M_PI - th0;
        const double jac = 0.25 * M_PI * u;
        total += gw[q] * jac * v0 * (2.0 / s) *
                 (alt(up, std::sin(th)) - alt(down, std::sin(th)));
      }
    }
  }
  return pat.params.sigma() * total;
}

// One side of the periodic principal value by explicit image summation,
// images grouped in +/- pairs so the tail converges absolutely. Independent
// of the zeta continuation used by the library.
double paired_image_sum(std::vector<double> offsets, double L, double s,
                        long pairs) {
  std::sort(offsets.begin(), offsets.end());
  double acc = 0.0;
  for (long m = 0; m < pairs; ++m)
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const double t = std::pow(offsets[i] + m * L, -s);
      acc += (i % 2 == 0) ? -t : t;
    }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// reduction

TEST_CASE("reduction profile: sign structure and the column constant") {
  // half space: u is the reflected sign function
  {
    SlabPattern p{{0.0}, std::nullopt, {2, 0.5}, std::nullopt};
    SlabProfile u = slab_reduce(p);
    CHECK(u.value(-3.0) == 1);
    CHECK(u.value(0.5) == -1);
    CHECK(u.value(0.0) == -1);  // right-continuous at the breakpoint
  }

  // two slabs: four sign changes, +1 far out on both sides
  {
    SlabPattern p{{0.0, 1.0, 2.0, 4.0}, std::nullopt, {2, 0.5}, std::nullopt};
    SlabProfile u = slab_reduce(p);
    const std::vector<double> probes{-0.5, 0.5, 1.5, 3.0, 5.0};
    const std::vector<int> want{1, -1, 1, -1, 1};
    for (std::size_t i = 0; i < probes.size(); ++i)
      CHECK(u.value(probes[i]) == want[i]);
  }

  // periodic wrap reproduces the cell values everywhere
  {
    SlabPattern p = ladder_pattern({2, 0.9}, 2.0, 4);
    SlabProfile u = slab_reduce(p);
    const double L = *p.periodic_cell;
    for (double t : {0.1, 0.9, 1.7, 2.4})
      for (int m : {-2, -1, 1, 3}) CHECK(u.value(t) == u.value(t + m * L));
  }

  // the reduction constant is the column integral of the kernel over a
  // parallel hyperplane at unit distance
  for (int n : {2, 3}) {
    const FractionalParams p{n, 0.7};
    const double c = slab_reduce({{0.0}, std::nullopt, p, std::nullopt})
                         .reduction_constant;
    double column = 0.0;
    if (n == 2) {
      column = 2.0 * integrate_de(
                         [&](double w) {
                           return std::pow(1.0 + w * w, -0.5 * (2.0 + p.s));
                         },
                         0.0, 1e8, 1e-13)
                         .value;
    } else {
      column = 2.0 * M_PI *
               integrate_de(
                   [&](double r) {
                     return r * std::pow(1.0 + r * r, -0.5 * (3.0 + p.s));
                   },
                   0.0, 1e8, 1e-13)
                   .value;
    }
    CHECK(c == doctest::Approx(column).epsilon(1e-9));
  }
}

// ---------------------------------------------------------------------------
// boundary curvature

TEST_CASE("boundary curvature: half space and single slab closed forms") {
  SlabPattern half{{0.0}, std::nullopt, {2, 0.5}, std::nullopt};
  CHECK(slab_hs_1d(half, 0, kSpec) == 0.0);

  const double s = 0.6, d = 0.8;
  SlabPattern slab{{0.0, d}, std::nullopt, {2, s}, std::nullopt};
  const double expect = (2.0 / s) * (1.0 - s) * c_ns({2, s}) * std::pow(d, -s);
  CHECK(slab_hs_1d(slab, 0, kSpec) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(slab_hs_1d(slab, 1, kSpec) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("equal ladder: every boundary balances exactly") {
  SlabPattern p = ladder_pattern({2, 0.96}, 10.0, 4);
  CHECK(p.breakpoints[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(*p.periodic_cell == doctest::Approx(8.0).epsilon(1e-14));
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(std::abs(slab_hs_1d(p, k, kSpec)) < 1e-12);
}

TEST_CASE("patterns symmetric about a boundary balance exactly") {
  // finite: reflection through the middle breakpoint swaps E and E^c
  SlabPattern odd{{-2.0, 0.0, 2.0}, std::nullopt, {2, 0.45}, std::nullopt};
  CHECK(std::abs(slab_hs_1d(odd, 1, kSpec)) < 1e-14);

  SlabPattern wider{{-4.0, -1.0, 0.0, 1.0, 4.0},
                    std::nullopt,
                    {2, 0.7},
                    std::nullopt};
  CHECK(std::abs(slab_hs_1d(wider, 2, kSpec)) < 1e-14);
}

TEST_CASE("unequal slabs match the planar set quadrature") {
  SlabPattern p{{0.0, 1.0, 2.0, 4.0}, std::nullopt, {2, 0.5}, std::nullopt};
  // widths 1 and 2 separated by a unit gap; values pinned against the
  // planar principal value
  const std::vector<double> pinned{3.799989069, 2.766986348, 1.985143739,
                                   3.018146460};
  for (std::size_t k = 0; k < 4; ++k) {
    const double hs = slab_hs_1d(p, k, kSpec);
    CHECK(hs == doctest::Approx(planar_pv(p, k)).epsilon(1e-6));
    CHECK(hs == doctest::Approx(pinned[k]).epsilon(1e-8));
  }
}

TEST_CASE("randomized finite patterns match the planar set quadrature") {
  std::mt19937 rng(20260816u);
  std::uniform_real_distribution<double> gap(0.3, 2.0);
  std::uniform_int_distribution<int> nslabs(1, 3);
  std::uniform_real_distribution<double> svals(0.3, 0.9);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 2 * nslabs(rng);
    std::vector<double> bp(static_cast<std::size_t>(m));
    double t = 0.0;
    for (int j = 0; j < m; ++j) {
      t += gap(rng);
      bp[static_cast<std::size_t>(j)] = t;
    }
    const double s = svals(rng);
    SlabPattern p{bp, std::nullopt, {2, s}, std::nullopt};
    std::uniform_int_distribution<int> pick(0, m - 1);
    const auto k = static_cast<std::size_t>(pick(rng));
    const double hs = slab_hs_1d(p, k, kSpec);
    CHECK(hs == doctest::Approx(planar_pv(p, k)).epsilon(1e-6));
  }
}

TEST_CASE("periodic tails agree with explicit image sums") {
  const double L = 12.0;
  SlabPattern p{{0.0, 3.0, 7.0, 8.0}, L, {2, 0.8}, std::nullopt};
  const double hs = slab_hs_1d(p, 0, kSpec);

  const double s = p.params.s;
  const std::vector<double> up{3.0, 7.0, 8.0, 12.0};
  const std::vector<double> down{4.0, 5.0, 9.0, 12.0};
  const double pv = -1.0 * (2.0 / s) *
                    (paired_image_sum(up, L, s, 4000000) -
                     paired_image_sum(down, L, s, 4000000));
  const double brute = p.params.sigma() * c_ns(p.params) * pv;
  CHECK(hs == doctest::Approx(brute).epsilon(1e-5));
}

// ---------------------------------------------------------------------------
// stability scan

TEST_CASE("stability scan: margins, threshold, and the gap observable") {
  const double sigma = 0.1, rt = std::sqrt(sigma);
  CylinderDomain omega{4.0, -30.0, 30.0};
  const auto modes = default_mode_family(omega);
  CHECK(modes.size() == 6);
  for (const auto& m : modes) {
    CHECK(m.core_radius < m.support_radius);
    CHECK(m.support_radius < omega.horizontal_radius);
  }

  std::vector<double> grid{0.2 * rt, 0.8 * rt, 3.2 * rt, 12.8 * rt};
  const StabilityScan scan =
      slab_stability_scan(sigma, grid, modes, omega, kSpec);

  REQUIRE(scan.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(scan.rows[i].sigma == sigma);
    CHECK(scan.rows[i].spacing == grid[i]);
  }
  // tight spacings are violently unstable, wide ones stable
  CHECK(scan.rows[0].min_margin < -1e4);
  CHECK(scan.rows[3].min_margin > 0.0);
  // the minimal margin never decreases with spacing
  for (std::size_t i = 1; i < 4; ++i)
    CHECK(scan.rows[i].min_margin >= scan.rows[i - 1].min_margin);
  // the uniform translation-like modes dominate the family
  CHECK(scan.rows[0].worst_mode_id == 4);
  CHECK(scan.rows[3].worst_mode_id == 0);

  CHECK(scan.d_star == doctest::Approx(1.42401).epsilon(2e-3));
  CHECK(scan.l2_observable == doctest::Approx(1.9803).epsilon(1e-2));
  CHECK(scan.gap_bound.holds());
}

TEST_CASE("thresholds across sigma follow the square root law") {
  CylinderDomain omega{4.0, -30.0, 30.0};
  const auto modes = default_mode_family(omega);
  std::vector<ThresholdPoint> pts;
  for (double sigma : {0.2, 0.05}) {
    const double rt = std::sqrt(sigma);
    std::vector<double> grid{0.2 * rt, 0.8 * rt, 3.2 * rt, 12.8 * rt};
    const auto scan = slab_stability_scan(sigma, grid, modes, omega, kSpec);
    CHECK(scan.l2_observable > 1.0);
    CHECK(scan.l2_observable < 3.0);
    pts.push_back({sigma, scan.d_star});
  }
  // sigma = 0.1 threshold pinned by the scan case above
  pts.push_back({0.1, 1.42401});

  const ExponentFit fit = separation_exponent_fit(pts);
  CHECK(fit.exponent > 0.4);
  CHECK(fit.exponent < 0.6);
  CHECK(fit.r2 > 0.99);
}

TEST_CASE("exponent fit: exact law, outlier removal, degenerate inputs") {
  std::vector<ThresholdPoint> clean;
  for (double sg : {0.3, 0.2, 0.1, 0.05, 0.02})
    clean.push_back({sg, 3.0 * std::sqrt(sg)});
  const ExponentFit exact = separation_exponent_fit(clean);
  CHECK(exact.exponent == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exact.prefactor == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(exact.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.dropped.empty());

  auto spiked = clean;
  spiked.push_back({0.15, 9.0});
  const ExponentFit robust = separation_exponent_fit(spiked, true);
  CHECK(robust.exponent == doctest::Approx(exact.exponent).epsilon(1e-12));
  REQUIRE(robust.dropped.size() == 1);
  CHECK(robust.dropped[0] == 5);
  // without the robust pass the outlier drags the slope
  const ExponentFit polluted = separation_exponent_fit(spiked);
  CHECK(std::abs(polluted.exponent - 0.5) > 0.02);

  CHECK_THROWS_AS(separation_exponent_fit({{0.1, 1.0}, {0.2, 2.0}}),
                  DegenerateFit);
  CHECK_THROWS_AS(
      separation_exponent_fit({{0.1, 1.0}, {0.2, -2.0}, {0.3, 1.0}}),
      DegenerateFit);
  CHECK_THROWS_AS(
      separation_exponent_fit({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}}),
      DegenerateFit);
}

// ---------------------------------------------------------------------------
// contract violations

TEST_CASE("rejects malformed patterns and unbracketed scans") {
  CHECK_THROWS_AS(
      (SlabPattern{{}, std::nullopt, {2, 0.5}, std::nullopt}.validate()),
      InvalidParams);
  CHECK_THROWS_AS(
      (SlabPattern{{1.0, 1.0}, std::nullopt, {2, 0.5}, std::nullopt}
           .validate()),
      OrderingViolated);
  // breakpoints spill out of the declared period
  CHECK_THROWS_AS(
      (SlabPattern{{0.0, 5.0}, 4.0, {2, 0.5}, std::nullopt}.validate()),
      ConfigInvalid);
  // periodic tiling needs an even count
  CHECK_THROWS_AS(
      (SlabPattern{{0.0, 1.0, 2.0}, 10.0, {2, 0.5}, std::nullopt}.validate()),
      ConfigInvalid);
  CHECK_THROWS_AS(ladder_pattern({2, 0.9}, 2.0, 3), ConfigInvalid);
  CHECK_THROWS_AS(ladder_pattern({2, 0.9}, -1.0, 4), ConfigInvalid);

  SlabPattern ok{{0.0, 1.0}, std::nullopt, {2, 0.5}, std::nullopt};
  CHECK_THROWS_AS(slab_hs_1d(ok, 2, kSpec), ConfigInvalid);

  CylinderDomain omega{4.0, -30.0, 30.0};
  const auto modes = default_mode_family(omega);
  // wholly stable and wholly unstable grids cannot bracket
  CHECK_THROWS_AS(
      slab_stability_scan(0.1, {4.0, 8.0}, modes, omega, kSpec),
      NoSignChange);
  CHECK_THROWS_AS(
      slab_stability_scan(0.1, {0.005, 0.01}, modes, omega, kSpec),
      NoSignChange);
  CHECK_THROWS_AS(
      slab_stability_scan(0.1, {2.0, 1.0}, modes, omega, kSpec),
      ConfigInvalid);
  CHECK_THROWS_AS(slab_stability_scan(0.1, {1.0, 2.0}, {}, omega, kSpec),
                  ConfigInvalid);
  // sheets would poke through the window caps
  CylinderDomain short_omega{4.0, -1.0, 1.0};
  CHECK_THROWS_AS(slab_stability_scan(0.1, {0.2, 4.0},
                                      default_mode_family(short_omega),
                                      short_omega, kSpec),
                  BadDomain);
}
