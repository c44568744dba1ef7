#pragma once

#include <vector>

#include "fracmin/geometry.hpp"

namespace fracmin {

// Coupling coefficients a_1 > ... > a_N of the flat interaction system:
// each a_i equals twice the alternating sum of inverse gaps to the others.
struct BalancingVector {
  std::vector<double> a;
  double residual = 0.0;  // max norm of the defining equations
};

// Newton solve of a_i = 2 sum_{j != i} (-1)^{i-j} / (a_j - a_i) from an
// equispaced antisymmetric start; converges to residual <= 1e-12. The
// solution is odd under reversal, a_i = -a_{N+1-i}, and sums to zero.
// Throws NewtonDiverged (with the last residual) if damping stalls.
BalancingVector solve_balancing(int n);

// Right side of the interaction system at one node: 2 * alternating sum of
// inverse gaps to the other profiles. values must be pairwise distinct.
double toda_coupling(const std::vector<double>& values, int i);

// Radial profile g(r) with derivative samples, cell-wise Hermite evaluable.
struct RadialProfile {
  std::vector<double> r;
  std::vector<double> value;
  std::vector<double> slope;

  double at(double rq) const;
  double slope_at(double rq) const;
};

// Integrates g'' + (m-1) g'/r = 1/g with g(0) = g0 > 0, g'(0) = 0 out to
// r_max: a fourth-order series start at the regular center followed by
// fixed-step RK4 (substeps per output cell; doubling substeps is the
// step-halving oracle). The profile is positive and strictly increasing;
// BlowdownToZero signals an integrator fault, not an admissible outcome.
RadialProfile lane_emden_radial(int m, double r_max, double g0,
                                int substeps = 4);

// Interval (dim 1), rectangle (dim 2), or the disc inscribed in the square
// (dim 2 with disc set): nodes outside the disc become Dirichlet nodes.
struct TodaDomain {
  GridSpec grid;
  bool disc = false;

  void validate() const;
  bool interior(int node) const;
};

struct IterationLog {
  int iteration = 0;
  double residual = 0.0;
  double step_length = 0.0;
};

// Solved configuration of N strictly ordered profiles on the domain grid.
struct TodaState {
  int n_profiles = 0;
  TodaDomain domain;
  std::vector<std::vector<double>> profiles;  // [profile][node], ascending
  double residual_norm = 0.0;
  int iterations = 0;
  std::vector<IterationLog> history;
};

// Damped Newton for the discrete system
//   Lap g_i = 2 sum_{j != i} (-1)^{i-j} / (g_j - g_i)
// with Dirichlet data read from boundary_data at non-interior nodes. Steps
// are cut to at most 90% of the distance to profile collision and halved
// until the residual drops. An empty initial_guess means the discrete
// harmonic interpolant of the boundary data (ordered by the maximum
// principle). Throws OrderingCollapse when two profiles close within 1e-8
// with no admissible step, NewtonDiverged when damping stalls.
TodaState toda_solve(int n_profiles, const TodaDomain& domain,
                     const std::vector<std::vector<double>>& boundary_data,
                     const std::vector<std::vector<double>>& initial_guess = {},
                     double tol = 1e-10);

// Pointwise residual of the discrete system on a state, with per-profile
// max and (h-weighted) L2 norms. Dirichlet nodes carry zero residual.
struct ResidualField {
  std::vector<std::vector<double>> pointwise;
  std::vector<double> max_norm;
  std::vector<double> l2_norm;
};
ResidualField toda_residual(const TodaState& state);

}  // namespace fracmin
