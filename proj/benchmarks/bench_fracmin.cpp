#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "fracmin/cone.hpp"
#include "fracmin/geometry.hpp"
#include "fracmin/kernel.hpp"
#include "fracmin/nonlocal.hpp"
#include "fracmin/slab.hpp"
#include "fracmin/toda.hpp"

namespace {

using namespace fracmin;

const QuadratureSpec kSpec;

void BM_KernelConstants(benchmark::State& state) {
  const FractionalParams p{3, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(kernel_constants(p));
}
BENCHMARK(BM_KernelConstants)->Unit(benchmark::kMicrosecond);

void BM_HsGraphPoint(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const GridSpec grid{1, 4.0, res, false};
  const SheetStack st = build_stack(
      grid, {2, 0.5},
      {sample_sheet(grid, [](double x) { return 0.5 * std::exp(-x * x); })});
  const std::size_t node = grid.node_count() / 2;
  for (auto _ : state)
    benchmark::DoNotOptimize(hs_graph(st, 0, node, kSpec));
}
BENCHMARK(BM_HsGraphPoint)->Arg(201)->Arg(401)->Arg(801)
    ->Unit(benchmark::kMicrosecond);

void BM_StabilityForm(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const GridSpec grid{1, 4.0, res, false};
  const double d = 0.8;
  const SheetStack st = build_stack(
      grid, {2, 0.9},
      {sample_sheet(grid, [](double) { return 0.0; }),
       sample_sheet(grid, [=](double) { return d; })});
  const CylinderDomain om{2.0, -2.0, d + 2.0};
  const PerturbationField f = plateau_field(st, 0.5, 1.2, {1.0, 1.0});
  for (auto _ : state)
    benchmark::DoNotOptimize(stability_form(st, f, om, kSpec).margin);
}
BENCHMARK(BM_StabilityForm)->Arg(257)->Arg(401)
    ->Unit(benchmark::kMillisecond);

void BM_SlabHs1D(benchmark::State& state) {
  const SlabPattern pattern = ladder_pattern({2, 0.9}, 5.0, 6);
  for (auto _ : state)
    benchmark::DoNotOptimize(slab_hs_1d(pattern, 2, kSpec));
}
BENCHMARK(BM_SlabHs1D)->Unit(benchmark::kMicrosecond);

void BM_LaneEmdenRadial(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(lane_emden_radial(2, 2.0, 1.0));
}
BENCHMARK(BM_LaneEmdenRadial)->Unit(benchmark::kMillisecond);

void BM_TodaSolveDisc(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const TodaDomain domain{GridSpec{2, 1.0, res, false}, true};
  const BalancingVector bal = solve_balancing(2);
  const RadialProfile le = lane_emden_radial(2, 2.0, 1.0);
  std::vector<std::vector<double>> data(
      2, std::vector<double>(domain.grid.node_count()));
  for (std::size_t node = 0; node < domain.grid.node_count(); ++node) {
    const int ix = static_cast<int>(node % static_cast<std::size_t>(res));
    const int iy = static_cast<int>(node / static_cast<std::size_t>(res));
    const double g =
        le.at(std::hypot(domain.grid.coord(ix), domain.grid.coord(iy)));
    data[0][node] = bal.a[1] * g;
    data[1][node] = bal.a[0] * g;
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(toda_solve(2, domain, data).iterations);
}
BENCHMARK(BM_TodaSolveDisc)->Arg(41)->Arg(81)->Unit(benchmark::kMillisecond);

void BM_SphereResidual(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const SphereGrid grid = make_sphere_grid(2, res);
  const double level = 1.0 / std::sqrt(2.0);
  const SphereState st{
      2, grid,
      {std::vector<double>(grid.node_count(), -level),
       std::vector<double>(grid.node_count(), level)}};
  for (auto _ : state)
    benchmark::DoNotOptimize(sphere_toda_residual(st, 4).l2_norm);
}
BENCHMARK(BM_SphereResidual)->Arg(64)->Arg(128)
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
