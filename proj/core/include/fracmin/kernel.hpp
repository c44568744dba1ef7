#pragma once

#include <vector>

#include "fracmin/errors.hpp"

namespace fracmin {

// Ambient dimension n >= 2 and fractional order s in (0,1). The small
// parameter throughout is sigma = 1 - s; the interesting regime is s near 1.
struct FractionalParams {
  int n = 2;
  double s = 0.5;

  double sigma() const { return 1.0 - s; }
  void validate() const;
};

// Euler Beta via lgamma. Good to ~1e-14 relative for moderate arguments.
double beta_fn(double a, double b);

// Surface measure of the unit d-sphere, H^d(S^d) = 2 pi^{(d+1)/2} / Gamma((d+1)/2).
double sphere_measure(int d);

// Interaction constant of a flat sheet seen from distance d: the column
// integral of |z|^{-n-s} over a hyperplane at distance d equals
// c_ns(n,s) / d^{1+s} per unit height, with
//   c_ns = (H^{n-2}(S^{n-2}) / 2) * B((n-1)/2, (1+s)/2).
// For n = 3 this collapses to 2 pi / (1+s).
double c_ns(const FractionalParams& p);

// Constant relating the fractional mean curvature of a nearly flat graph to
// the classical one: value of the limit normalization H^{n-2}(S^{n-2}) / (2(n-1)).
double c_circ(int n);

// Odd profile F(t) = normalization * ∫_0^t (1+tau^2)^{-(n+s)/2} dtau.
// Saturates at normalization * B(1/2, (n+s-1)/2) / 2. Direct high accuracy
// evaluation; engines needing many evaluations should use ProfileTable.
double profile_F(double t, const FractionalParams& p,
                 double normalization = 1.0);
double profile_F_infinity(const FractionalParams& p,
                          double normalization = 1.0);

struct KernelConstants {
  double sigma = 0.0;
  double c_ns = 0.0;
  double c_circ = 0.0;
  double f_infinity = 0.0;  // profile ceiling at normalization 1
};
KernelConstants kernel_constants(const FractionalParams& p);

// Consistency check of the angular reduction behind c_ns: the Beta value
// against direct quadrature of 2 ∫_0^{pi/2} sin^{n-2}(th) cos^s(th) dth.
struct OmegaCheck {
  double analytic = 0.0;
  double quadrature = 0.0;
  double rel_error = 0.0;
};
OmegaCheck omega_check(const FractionalParams& p);

// Tabulated antiderivative W(t) = ∫_0^t (1+tau^2)^{-power/2} dtau.
// Column reductions evaluate this thousands of times per surface point, so
// the direct quadrature is replaced by a uniform atan-grid table (per-cell
// Simpson accumulation, Hermite interpolation) for |t| <= 5, and by the
// asymptotic tail series beyond; both branches hold ~1e-12 absolute error.
class ProfileTable {
 public:
  explicit ProfileTable(double power, int n_cells = 4096);

  double operator()(double t) const;
  double infinity() const { return f_infinity_; }
  double power() const { return power_; }
  // ∫_t^inf of the kernel profile, t > 0 (series branch, exposed because
  // flat-tail columns want it directly).
  double tail_beyond(double t) const;

 private:
  double integrand(double phi) const;
  double power_;
  double dphi_;
  double t_split_;
  double f_infinity_;
  std::vector<double> cum_;   // cumulative integral at phi_i = i*dphi
  std::vector<double> slope_; // integrand at phi_i (exact derivative)
};

}  // namespace fracmin
