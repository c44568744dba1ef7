#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fracmin/toda.hpp"

namespace fracmin {

// Quadrature nodes and a discrete Laplace-Beltrami operator on S^1 or S^2.
// S^1 uses uniform angles; S^2 a latitude-longitude grid whose node weights
// are the exact cell areas, so constants integrate to the sphere measure to
// rounding and the finite-volume operator below is self-adjoint in these
// weights. Node layout: theta[k] is the angle (dim 1) or colatitude (dim 2),
// phi[k] the longitude (0 for dim 1), index k = band * n_phi + longitude.
struct SphereGrid {
  int dim = 1;  // sphere dimension, 1 or 2
  int n_theta = 0;
  int n_phi = 1;
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> weight;

  std::size_t node_count() const { return theta.size(); }
  double measure() const;  // 2*pi for S^1, 4*pi for S^2
  void validate() const;

  // Discrete Laplace-Beltrami applied to node values. Annihilates constants
  // exactly; smooth fields see a second order consistent operator.
  std::vector<double> laplacian(const std::vector<double>& u) const;

  // sum over faces of kappa * (jump of u)^2, the quadratic form matching
  // laplacian: sum_k weight[k] u[k] laplacian(u)[k] = -dirichlet_energy(u).
  double dirichlet_energy(const std::vector<double>& u) const;
};

// resolution = node count on S^1, latitude band count on S^2 (longitude
// count is twice that).
SphereGrid make_sphere_grid(int dim, int resolution);

// Ordered profile family living on a sphere grid.
struct SphereState {
  int n_profiles = 0;
  SphereGrid grid;
  std::vector<std::vector<double>> profiles;  // [profile][node], ascending
};

// Pointwise residual of the spherical interaction system
//   Lap_S g_i + (n-2) g_i = 2 sum_{j != i} (-1)^{i-j} / (g_j - g_i)
// per profile, with weight-summed L2 norms. n sets the linear coefficient;
// constant profiles -+1/sqrt(n-2) for N = 2 balance it exactly.
ResidualField sphere_toda_residual(const SphereState& state, int n);

// Radial cutoff r^{-(n-3)/2} * m(r) on (0, 1): m ramps up logarithmically
// on [inner_start, inner_end], holds 1 until outer_start, ramps down to 0
// at outer_end. Equal endpoints collapse the corresponding piece.
struct HardyCutoff {
  double inner_start = 0.0;
  double inner_end = 0.0;
  double outer_start = 0.0;
  double outer_end = 0.0;
};

// Log-spaced ramp and plateau widths wide enough to approach the sharp
// radial Hardy constant within a few percent.
std::vector<HardyCutoff> default_hardy_family();

// Infimum over the family of the Rayleigh quotient
//   int psi'^2 r^{n-2} dr / int (psi/r)^2 r^{n-2} dr  on (0, 1),
// evaluated in closed form piece by piece (the ramps are linear in log r).
// Never falls below (n-3)^2/4; a member whose cutoff has no mass throws
// DegenerateDenominator.
double hardy_ratio(int n, const std::vector<HardyCutoff>& family);

// Per consecutive gap v_i = g_{i+1} - g_i of a spherical state:
//   a = int |grad log v_i|^2 + (n-2) * measure,   b = 4 int v_i^{-2}.
// For an exact solution a <= b holds up to discretization error, with
// equality at N = 2.
struct GapPair {
  double a = 0.0;
  double b = 0.0;
};

struct FarinaReport {
  std::vector<GapPair> per_gap;
  double stability_bound = 0.0;  // ((n-3)^2 + eps)/4 * measure
  bool contradiction = false;
};

// Evaluates the gap integrals and sets contradiction when the dimensional
// inequality (n-2) * measure > stability_bound holds and no gap satisfies
// both a <= b and b <= stability_bound, i.e. the data are incompatible
// with a stable cone. Throws NonPositiveGap when profiles touch or cross.
FarinaReport farina_certificate(const SphereState& state, int n,
                                double eps = 0.01);

std::string to_json_string(const FarinaReport& report);

// (n-2) - (n-3)^2/4, positive exactly for 3 <= n <= 7.
double dimension_gap(int n);

}  // namespace fracmin
