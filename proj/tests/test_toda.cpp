#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "fracmin/errors.hpp"
#include "fracmin/toda.hpp"

using namespace fracmin;

namespace {

// Samples a_i * g(|x|) onto an interval grid, profiles in ascending order.
std::vector<std::vector<double>> radial_ansatz(const GridSpec& grid,
                                               const RadialProfile& le,
                                               const std::vector<double>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> out(n,
                                       std::vector<double>(grid.node_count()));
  for (int i = 0; i < grid.resolution; ++i) {
    const double v = le.at(std::abs(grid.coord(i)));
    for (std::size_t k = 0; k < n; ++k)
      out[k][static_cast<std::size_t>(i)] = a[n - 1 - k] * v;
  }
  return out;
}

}  // namespace

TEST_CASE("balancing vectors: closed forms, antisymmetry, zero sum") {
  const auto b1 = solve_balancing(1);
  REQUIRE(b1.a.size() == 1);
  CHECK(b1.a[0] == 0.0);

  const auto b2 = solve_balancing(2);
  CHECK(b2.a[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b2.a[1] == doctest::Approx(-1.0).epsilon(1e-12));

  const auto b3 = solve_balancing(3);
  CHECK(b3.a[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(b3.a[1]) < 1e-12);
  CHECK(b3.a[2] == doctest::Approx(-1.0).epsilon(1e-12));

  for (int n = 1; n <= 8; ++n) {
    const auto b = solve_balancing(n);
    REQUIRE(b.a.size() == static_cast<std::size_t>(n));
    CHECK(b.residual <= 1e-12);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += b.a[i];
      CHECK(b.a[static_cast<std::size_t>(i)] ==
            doctest::Approx(-b.a[static_cast<std::size_t>(n - 1 - i)])
                .epsilon(1e-12));
      if (i + 1 < n)
        CHECK(b.a[static_cast<std::size_t>(i)] >
              b.a[static_cast<std::size_t>(i + 1)]);
    }
    CHECK(std::abs(sum) < 1e-12);
  }

  const auto b4 = solve_balancing(4);
  CHECK(b4.a[0] == doctest::Approx(1.382092515400).epsilon(1e-9));
  CHECK(b4.a[1] == doctest::Approx(0.299700315108).epsilon(1e-9));

  CHECK_THROWS_AS(solve_balancing(0), InvalidParams);
}

TEST_CASE("radial profile: center expansion and monotone growth") {
  for (int m : {1, 2, 3}) {
    const auto le = lane_emden_radial(m, 0.01, 1.0);
    // second difference across r = 1e-4 against the regular center value
    const double g2 = (le.at(2e-4) - 2.0 * le.at(1e-4) + le.at(0.0)) / 1e-8;
    CHECK(g2 == doctest::Approx(1.0 / m).epsilon(1e-6));
    CHECK(le.slope_at(1e-4) == doctest::Approx(1e-4 / m).epsilon(1e-5));
    CHECK(le.value.front() == 1.0);
    for (std::size_t k = 1; k < le.value.size(); ++k) {
      CHECK(le.value[k] > le.value[k - 1]);
      CHECK(le.value[k] > 0.0);
    }
  }

  const auto le = lane_emden_radial(2, 1.0, 0.5);
  CHECK_THROWS_AS(le.at(1.5), BadDomain);
  CHECK_THROWS_AS(le.slope_at(-0.5), BadDomain);
  CHECK_THROWS_AS(lane_emden_radial(0, 1.0, 1.0), InvalidParams);
  CHECK_THROWS_AS(lane_emden_radial(2, -1.0, 1.0), InvalidParams);
  CHECK_THROWS_AS(lane_emden_radial(2, 1.0, 0.0), InvalidParams);
  CHECK_THROWS_AS(lane_emden_radial(2, 1.0, 1.0, 0), ConfigInvalid);
}

TEST_CASE("radial profile: scaling invariance and step refinement") {
  // g(r) -> g(lam r)/lam maps solutions to solutions, so the rescaled
  // profile must agree with a fresh integration from the rescaled data.
  for (int m : {1, 2, 3}) {
    const auto big = lane_emden_radial(m, 20.0, 2.0);
    const auto ref = lane_emden_radial(m, 10.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double r = 10.0 * k / 1000.0;
      worst = std::max(worst, std::abs(big.at(2.0 * r) / 2.0 - ref.at(r)));
    }
    CHECK(worst <= 1e-8);
  }

  // halving the internal step must leave the profile unchanged to 1e-8
  const double g10[3] = {19.250119921867, 9.490206553644, 6.939992460882};
  for (int m : {1, 2, 3}) {
    const auto coarse = lane_emden_radial(m, 10.0, 1.0, 1);
    const auto fine = lane_emden_radial(m, 10.0, 1.0, 2);
    double dmax = 0.0;
    for (std::size_t k = 0; k < coarse.value.size(); ++k)
      dmax = std::max(dmax, std::abs(coarse.value[k] - fine.value[k]));
    CHECK(dmax <= 1e-8);
    CHECK(coarse.value.back() ==
          doctest::Approx(g10[m - 1]).epsilon(1e-10));
  }
}

TEST_CASE("single profile: discrete harmonic interpolation") {
  TodaDomain dom{{1, 1.0, 101, false}, false};
  std::vector<double> bd(101, 0.0);
  bd[0] = -1.0;
  bd[100] = 3.0;
  const auto st = toda_solve(1, dom, {bd});
  CHECK(st.iterations == 0);
  CHECK(st.residual_norm <= 1e-10);
  for (int i = 0; i <= 100; ++i)
    CHECK(st.profiles[0][static_cast<std::size_t>(i)] ==
          doctest::Approx(1.0 + 2.0 * dom.grid.coord(i)).epsilon(1e-12));

  // x1^2 - x2^2 is harmonic for the five point stencil exactly
  TodaDomain sq{{2, 1.0, 41, false}, false};
  std::vector<double> bq(sq.grid.node_count());
  for (int i = 0; i < 41; ++i)
    for (int j = 0; j < 41; ++j)
      bq[static_cast<std::size_t>(i * 41 + j)] =
          sq.grid.coord(i) * sq.grid.coord(i) -
          sq.grid.coord(j) * sq.grid.coord(j);
  const auto sh = toda_solve(1, sq, {bq});
  for (std::size_t p = 0; p < bq.size(); ++p)
    CHECK(sh.profiles[0][p] == doctest::Approx(bq[p]).epsilon(1e-10));
}

TEST_CASE("two profiles on the disc match the radial ansatz to second order") {
  const auto le = lane_emden_radial(2, 1.6, 1.0);
  const auto solve_at = [&](int res) {
    TodaDomain dom{{2, 1.0, res, false}, true};
    const std::size_t nodes = dom.grid.node_count();
    std::vector<std::vector<double>> bd(2, std::vector<double>(nodes));
    for (int i = 0; i < res; ++i)
      for (int j = 0; j < res; ++j) {
        const double v =
            le.at(std::hypot(dom.grid.coord(i), dom.grid.coord(j)));
        bd[0][static_cast<std::size_t>(i * res + j)] = -v;
        bd[1][static_cast<std::size_t>(i * res + j)] = v;
      }
    const auto st = toda_solve(2, dom, bd);
    CHECK(st.residual_norm <= 1e-10);
    CHECK(st.iterations <= 10);
    double worst = 0.0;
    for (std::size_t p = 0; p < nodes; ++p)
      if (dom.interior(static_cast<int>(p)))
        worst = std::max(worst, std::abs(st.profiles[1][p] - bd[1][p]));
    return worst;
  };
  const double e_coarse = solve_at(41);
  const double e_fine = solve_at(81);
  CHECK(e_coarse == doctest::Approx(3.664725e-05).epsilon(1e-3));
  const double ratio = e_coarse / e_fine;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("interpolated ansatz residual shrinks by fourth per halving") {
  const auto le = lane_emden_radial(1, 1.2, 1.0);
  const auto interp_residual = [&](int res) {
    TodaDomain dom{{1, 1.0, res, false}, false};
    TodaState st;
    st.n_profiles = 2;
    st.domain = dom;
    st.profiles = radial_ansatz(dom.grid, le, {1.0, -1.0});
    const auto rf = toda_residual(st);
    CHECK(rf.l2_norm[1] > 0.0);
    CHECK(rf.l2_norm[1] < rf.max_norm[1]);
    return rf.max_norm[1];
  };
  const double r_coarse = interp_residual(201);
  const double r_fine = interp_residual(401);
  CHECK(r_coarse == doctest::Approx(8.333132e-06).epsilon(1e-4));
  CHECK(r_coarse / r_fine == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("newton iterations contract quadratically") {
  TodaDomain dom{{1, 1.0, 201, false}, false};
  std::vector<std::vector<double>> bd(3, std::vector<double>(201, 0.0));
  for (int k = 0; k < 3; ++k) {
    bd[static_cast<std::size_t>(k)][0] = 2.0 * (k - 1) - 0.3;
    bd[static_cast<std::size_t>(k)][200] = 2.0 * (k - 1) + 0.5 + 0.2 * k;
  }
  const auto st = toda_solve(3, dom, bd);
  CHECK(st.residual_norm <= 1e-10);
  REQUIRE(st.history.size() >= 3);
  const std::size_t last = st.history.size();
  for (std::size_t k = last - 3; k + 1 < last; ++k) {
    const double r0 = st.history[k].residual;
    const double r1 = st.history[k + 1].residual;
    CHECK(r1 <= std::max(10.0 * r0 * r0, 1e-13));
  }
  for (const auto& h : st.history) CHECK(h.step_length == 1.0);
  CHECK(st.history[0].residual == doctest::Approx(8.572536e-03).epsilon(1e-5));
  CHECK(st.history[1].residual == doctest::Approx(1.973707e-06).epsilon(1e-5));
}

TEST_CASE("solved states keep their symmetries") {
  TodaDomain dom{{1, 1.0, 201, false}, false};
  std::vector<std::vector<double>> bd(3, std::vector<double>(201, 0.0));
  for (int k = 0; k < 3; ++k) {
    bd[static_cast<std::size_t>(k)][0] = 2.0 * (k - 1) - 0.3;
    bd[static_cast<std::size_t>(k)][200] = 2.0 * (k - 1) + 0.5 + 0.2 * k;
  }
  const auto st = toda_solve(3, dom, bd);

  // ordering holds at every node of the solved state
  for (int k = 0; k + 1 < 3; ++k)
    for (std::size_t p = 0; p < st.profiles[0].size(); ++p)
      CHECK(st.profiles[static_cast<std::size_t>(k + 1)][p] >
            st.profiles[static_cast<std::size_t>(k)][p]);

  // negating and reversing the family solves the same system
  TodaState flipped = st;
  for (int k = 0; k < 3; ++k)
    for (std::size_t p = 0; p < st.profiles[0].size(); ++p)
      flipped.profiles[static_cast<std::size_t>(k)][p] =
          -st.profiles[static_cast<std::size_t>(2 - k)][p];
  const auto rf = toda_residual(flipped);
  for (double v : rf.max_norm) CHECK(v <= 1e-10);

  // a local bump in one profile must show up in the residual
  TodaState bumped = st;
  bumped.profiles[1][100] += 0.1;
  const auto rb = toda_residual(bumped);
  CHECK(rb.max_norm[1] > 100.0);
}

TEST_CASE("balancing ansatz seeds the interval solver") {
  const auto bal = solve_balancing(4);
  const auto le = lane_emden_radial(1, 1.2, 1.0);
  TodaDomain dom{{1, 1.0, 201, false}, false};
  const auto ansatz = radial_ansatz(dom.grid, le, bal.a);
  const auto seeded = toda_solve(4, dom, ansatz, ansatz);
  CHECK(seeded.residual_norm <= 1e-10);
  CHECK(seeded.iterations <= 2);
  const auto harmonic = toda_solve(4, dom, ansatz);
  double dmax = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t p = 0; p < ansatz[0].size(); ++p)
      dmax = std::max(dmax,
                      std::abs(seeded.profiles[k][p] - harmonic.profiles[k][p]));
  CHECK(dmax <= 1e-9);
}

TEST_CASE("rejects malformed domains, data, and collapsing iterates") {
  TodaDomain dom{{1, 1.0, 51, false}, false};
  std::vector<std::vector<double>> bd(2, std::vector<double>(51, 0.0));
  for (int i : {0, 50}) {
    bd[0][static_cast<std::size_t>(i)] = -1.0;
    bd[1][static_cast<std::size_t>(i)] = 1.0;
  }

  CHECK_THROWS_AS(toda_solve(0, dom, {}), InvalidParams);
  CHECK_THROWS_AS(toda_solve(2, dom, bd, {}, -1.0), ConfigInvalid);
  CHECK_THROWS_AS(toda_solve(2, dom, {bd[0]}), GridMismatch);
  {
    auto short_bd = bd;
    short_bd[1].resize(50);
    CHECK_THROWS_AS(toda_solve(2, dom, short_bd), GridMismatch);
  }
  {
    auto swapped = bd;
    std::swap(swapped[0], swapped[1]);
    CHECK_THROWS_AS(toda_solve(2, dom, swapped), OrderingViolated);
  }
  {
    auto crossing = bd;
    std::vector<std::vector<double>> guess(2, std::vector<double>(51, 0.0));
    guess[0].assign(51, 0.5);
    guess[1].assign(51, -0.5);
    for (int i : {0, 50}) {
      guess[0][static_cast<std::size_t>(i)] = -1.0;
      guess[1][static_cast<std::size_t>(i)] = 1.0;
    }
    CHECK_THROWS_AS(toda_solve(2, dom, crossing, guess), OrderingViolated);
  }

  CHECK_THROWS_AS((TodaDomain{{1, 1.0, 51, true}, false}.validate()),
                  ConfigInvalid);
  CHECK_THROWS_AS((TodaDomain{{1, 1.0, 51, false}, true}.validate()),
                  ConfigInvalid);
  CHECK_THROWS_AS((TodaDomain{{1, 1.0, 2, false}, false}.validate()),
                  InvalidParams);

  // boundary gap below the collapse threshold: the first accepted step
  // still carries the degenerate gap, so the solver must refuse
  {
    std::vector<std::vector<double>> tight(2, std::vector<double>(51, 0.0));
    for (int i : {0, 50}) tight[1][static_cast<std::size_t>(i)] = 1e-9;
    CHECK_THROWS_AS(toda_solve(2, dom, tight), OrderingCollapse);
  }

  {
    TodaState st;
    st.n_profiles = 2;
    st.domain = dom;
    st.profiles = {std::vector<double>(51, -1.0)};
    CHECK_THROWS_AS(toda_residual(st), GridMismatch);
  }
}
