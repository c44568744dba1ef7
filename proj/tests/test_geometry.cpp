#include <doctest.h>

#include <cmath>

#include "fracmin/geometry.hpp"

using namespace fracmin;

namespace {

SheetStack flat_slab_family(double sigma, double cstar, int k_sheets,
                            const GridSpec& grid) {
  const double spacing = cstar * std::sqrt(sigma);
  std::vector<GraphSheet> sheets;
  for (int k = 0; k < k_sheets; ++k) {
    sheets.push_back(
        sample_sheet(grid, [&](double) { return k * spacing; }));
  }
  return build_stack(grid, {grid.dim + 1, 1.0 - sigma}, std::move(sheets));
}

}  // namespace

TEST_CASE("flat slab family: spacing, normals, zero curvature") {
  GridSpec grid{1, 2.0, 129, false};
  auto stack = flat_slab_family(0.04, 10.0, 4, grid);
  REQUIRE(stack.n_sheets() == 4);

  for (int k = 0; k + 1 < 4; ++k) {
    CHECK(sheet_distance(stack, k, k + 1) == doctest::Approx(2.0).epsilon(1e-14));
  }
  for (int k = 0; k < 4; ++k) {
    const int expected_up = (k % 2 == 0) ? 1 : -1;
    for (std::size_t node : {std::size_t{0}, std::size_t{64}, std::size_t{128}}) {
      auto frame = normal_and_curvature(stack, k, node);
      CHECK(frame.normal[0] == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(frame.normal[2] == doctest::Approx(expected_up).epsilon(1e-15));
      CHECK(frame.mean_curvature == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("parity base flips every orientation") {
  GridSpec grid{1, 1.0, 17, false};
  std::vector<GraphSheet> sheets{sample_sheet(grid, [](double) { return 0.0; }),
                                 sample_sheet(grid, [](double) { return 1.0; })};
  auto stack = build_stack(grid, {2, 0.5}, std::move(sheets), -1);
  CHECK(stack.parity(0) == -1);
  CHECK(stack.parity(1) == +1);
  auto frame = normal_and_curvature(stack, 0, 8);
  CHECK(frame.normal[2] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("circle arc in the plane: curvature 1/R with the outward normal up") {
  const double R = 3.0;
  GridSpec grid{1, 1.0, 257, false};
  auto stack = build_stack(
      grid, {2, 0.8},
      {sample_sheet(grid, [R](double x) { return std::sqrt(R * R - x * x); })});
  std::size_t mid = 128;
  auto frame = normal_and_curvature(stack, 0, mid);
  CHECK(frame.mean_curvature == doctest::Approx(1.0 / R).epsilon(1e-5));
  // normal at the apex straight up
  CHECK(frame.normal[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(frame.normal[2] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hemisphere cap: curvature 2/R, error shrinks >= 3x per refinement") {
  const double R = 3.0;
  auto cap_error = [R](int res) {
    GridSpec grid{2, 1.0, res, false};
    auto stack = build_stack(
        grid, {3, 0.8},
        {sample_sheet(grid, [R](double x, double y) {
          return std::sqrt(R * R - x * x - y * y);
        })});
    double worst = 0.0;
    for (int i = 0; i < res; ++i) {
      for (int j = 0; j < res; ++j) {
        if (std::abs(grid.coord(i)) > 0.5 || std::abs(grid.coord(j)) > 0.5)
          continue;  // compare away from the one-sided boundary stencils
        auto frame = normal_and_curvature(
            stack, 0, static_cast<std::size_t>(i) * res + j);
        worst = std::max(worst, std::abs(frame.mean_curvature - 2.0 / R));
      }
    }
    return worst;
  };
  const double coarse = cap_error(33);
  const double fine = cap_error(65);
  CHECK(coarse < 1e-3);
  CHECK(coarse / fine >= 3.0);
}

TEST_CASE("crossing or touching sheets are rejected with a location") {
  GridSpec grid{1, 1.0, 33, false};
  auto up = sample_sheet(grid, [](double x) { return x; });
  auto down = sample_sheet(grid, [](double x) { return -x; });
  CHECK_THROWS_AS(build_stack(grid, {2, 0.5}, {up, down}), OrderingViolated);
  auto vee = sample_sheet(grid, [](double x) { return std::abs(x); });
  auto zero = sample_sheet(grid, [](double) { return 0.0; });
  CHECK_THROWS_AS(build_stack(grid, {2, 0.5}, {zero, vee}), OrderingViolated);

  try {
    build_stack(grid, {2, 0.5}, {zero, vee});
  } catch (const OrderingViolated& e) {
    CHECK(std::string(e.what()).find("node") != std::string::npos);
  }
}

TEST_CASE("sheet with the wrong node count is a grid mismatch") {
  GridSpec grid{1, 1.0, 33, false};
  GraphSheet bad;
  bad.height.assign(17, 0.0);
  CHECK_THROWS_AS(build_stack(grid, {2, 0.5}, {bad}), GridMismatch);
}

TEST_CASE("stack parameter validation") {
  GridSpec grid{1, 1.0, 33, false};
  auto zero = sample_sheet(grid, [](double) { return 0.0; });
  CHECK_THROWS_AS(build_stack(grid, {3, 0.5}, {zero}), InvalidParams);
  CHECK_THROWS_AS(build_stack(grid, {2, 0.5}, {zero}, 2), InvalidParams);
  CHECK_THROWS_AS(build_stack(grid, {2, 0.5}, {}), InvalidParams);
}

TEST_CASE("distance between tilted parallel sheets beats the vertical gap") {
  GridSpec grid{1, 2.0, 129, false};
  auto stack = build_stack(
      grid, {2, 0.5},
      {sample_sheet(grid, [](double x) { return x; }),
       sample_sheet(grid, [](double x) { return x + 1.0; })});
  const double d = sheet_distance(stack, 0, 1);
  // true separation 1/sqrt(2); discrete nodes realize it exactly here
  CHECK(d == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // bracketed between vertical/sqrt(1+delta^2) and the vertical gap
  CHECK(d >= 1.0 / std::sqrt(2.0) - 1e-12);
  CHECK(d <= 1.0 + 1e-12);
}

TEST_CASE("stack JSON round trip is lossless and stable") {
  GridSpec grid{1, 2.0, 65, true};
  auto stack = build_stack(
      grid, {2, 0.95},
      {sample_sheet(grid,
                    [](double x) { return 0.1 * std::cos(0.5 * M_PI * x); }),
       sample_sheet(grid, [](double x) {
         return 1.0 + 0.05 * std::sin(M_PI * x);
       })},
      -1);
  const std::string text = to_json_string(stack);
  auto parsed = stack_from_json_string(text);
  CHECK(parsed.grid == stack.grid);
  CHECK(parsed.params.n == 2);
  CHECK(parsed.params.s == 0.95);
  CHECK(parsed.parity_base == -1);
  REQUIRE(parsed.n_sheets() == 2);
  for (int k = 0; k < 2; ++k) {
    for (std::size_t m = 0; m < grid.node_count(); ++m) {
      CHECK(parsed.height(k, m) == stack.height(k, m));
    }
  }
  CHECK(to_json_string(parsed) == text);
}

TEST_CASE("malformed stack JSON raises ConfigInvalid") {
  CHECK_THROWS_AS(stack_from_json_string("{"), ConfigInvalid);
  CHECK_THROWS_AS(stack_from_json_string("{\"grid\": {}}"), ConfigInvalid);
  CHECK_THROWS_AS(
      stack_from_json_string(
          R"({"grid":{"dim":1,"extent":1.0,"resolution":9,"periodic":false},"s":0.5})"),
      ConfigInvalid);
}

TEST_CASE("periodic grids wrap the curvature stencils consistently") {
  GridSpec grid{1, 2.0, 129, true};
  // period 4 in x; endpoint node duplicates node 0
  auto stack = build_stack(grid, {2, 0.8},
                           {sample_sheet(grid, [](double x) {
                             return 0.2 * std::sin(0.5 * M_PI * x);
                           })});
  auto at_start = normal_and_curvature(stack, 0, 0);
  auto at_end = normal_and_curvature(stack, 0, 128);
  CHECK(at_start.mean_curvature ==
        doctest::Approx(at_end.mean_curvature).epsilon(1e-12));
  // curvature of a small sine is ~ -g'' with the sign convention here
  const double expected = 0.2 * 0.25 * M_PI * M_PI * std::sin(0.0);
  CHECK(at_start.mean_curvature == doctest::Approx(expected).epsilon(1e-6));
}
