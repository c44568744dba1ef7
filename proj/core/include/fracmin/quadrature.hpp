#pragma once

#include <functional>
#include <vector>

#include "fracmin/errors.hpp"

namespace fracmin {

// Grid parameters for the principal-value integrators. All grids are fixed
// and non-adaptive so results are bit-reproducible for a given spec.
//
//   h       target node spacing (the effective spacing is rounded so the
//           core and tail radii fall on cell boundaries)
//   r_core  radius of the symmetrized core around the singular point
//   r_tail  outer radius of the quadrature domain
//   tol     accuracy target used by callers to size h; reported est_error
//           should come out below it on smooth inputs
struct QuadratureSpec {
  double h = 1e-3;
  double r_core = 0.1;
  double r_tail = 1.0;
  double tol = 1e-8;

  void validate() const {
    if (!(h > 0.0) || !(r_core > 0.0) || !(r_tail > 0.0) || !(tol > 0.0))
      throw ConfigInvalid("quadrature spec fields must be positive");
    if (r_core > r_tail)
      throw ConfigInvalid("quadrature core radius exceeds the tail radius");
  }
};

struct IntegralResult {
  double value = 0.0;
  double est_error = 0.0;
};

// Principal value of ∫ f over the punctured interval (x0-r_tail, x0+r_tail).
// Inside the core the rule is midpoint cells paired antipodally around x0,
// so odd singular parts cancel exactly (never evaluates f at x0); outside it
// is composite Simpson per side. est_error is a step-halving estimate and the
// returned value is the finer grid's.
//
// Throws NonIntegrableSingularity when the symmetrized integrand
// f(x0+z)+f(x0-z) grows like |z|^-a, a >~ 1, toward the puncture.
IntegralResult pv_integrate_symmetric(const std::function<double(double)>& f,
                                      double x0, const QuadratureSpec& q);

// Planar version over the punctured disc |z| <= r_tail around x0. Midpoint
// cells paired under point reflection through x0; rim cells partially covered
// by the disc are weighted by a subsampled coverage fraction (the fraction is
// reflection-invariant, so the pairing stays exact).
IntegralResult pv_integrate_symmetric(
    const std::function<double(double, double)>& f, const double x0[2],
    const QuadratureSpec& q);

// Exact outer tail ∫_{|z|>rho} |z|^-power dz in R^dim.
// Throws BadDomain unless rho > 0 and power > dim.
double tail_integral(double rho, double power, int dim);

// For positive gaps h_1..h_L: lhs = (sum h)^-2, rhs = L^-3 * sum h^-2.
// lhs <= rhs always, with equality exactly at equal gaps; the slab module
// uses this to compare a collapsed-stack interaction against per-gap ones.
struct AmHmBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double slack = 1e-12) const { return lhs <= rhs * (1.0 + slack); }
};
AmHmBound am_hm_bound(const std::vector<double>& gaps);

// Tanh-sinh quadrature on a finite interval (a, b). Handles integrable
// endpoint singularities; fixed node ladder with early termination once the
// level-to-level difference drops below tol (deterministic for fixed inputs).
IntegralResult integrate_de(const std::function<double(double)>& f, double a,
                            double b, double tol = 1e-12);

// Composite Simpson with n subintervals (rounded up to even).
double integrate_simpson(const std::function<double(double)>& f, double a,
                         double b, int n);

// Hurwitz zeta sum_{k>=0} (a+k)^-s for a > 0, via Euler-Maclaurin; valid for
// s > 0, s != 1 (the s < 1 branch is the analytic continuation, which is what
// alternating lattice tails reduce to). Accurate to ~1e-13.
double hurwitz_zeta(double s, double a);

}  // namespace fracmin
