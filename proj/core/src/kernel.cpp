#include "fracmin/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracmin/quadrature.hpp"

namespace fracmin {

void FractionalParams::validate() const {
  if (n < 2) throw InvalidParams("FractionalParams: need n >= 2");
  if (!(s > 0.0) || !(s < 1.0)) {
    throw InvalidParams("FractionalParams: need s in (0,1)");
  }
}

double beta_fn(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParams("beta_fn: need a, b > 0");
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double sphere_measure(int d) {
  if (d < 0) throw InvalidParams("sphere_measure: need d >= 0");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (d + 1)) /
         std::tgamma(0.5 * (d + 1));
}

double c_ns(const FractionalParams& p) {
  p.validate();
  return 0.5 * sphere_measure(p.n - 2) *
         beta_fn(0.5 * (p.n - 1), 0.5 * (1.0 + p.s));
}

double c_circ(int n) {
  if (n < 2) throw InvalidParams("c_circ: need n >= 2");
  return sphere_measure(n - 2) / (2.0 * (n - 1));
}

double profile_F(double t, const FractionalParams& p, double normalization) {
  p.validate();
  if (!(normalization > 0.0)) {
    throw InvalidParams("profile_F: normalization must be positive");
  }
  if (t == 0.0) return 0.0;
  const double at = std::abs(t);
  const double power = 0.5 * (p.n + p.s);
  // Integrate in phi = atan(tau); the integrand becomes cos^{n+s-2}(phi),
  // analytic on the closed interval.
  const double val =
      integrate_de(
          [power](double phi) {
            return std::pow(std::cos(phi), 2.0 * power - 2.0);
          },
          0.0, std::atan(at))
          .value;
  return std::copysign(normalization * val, t);
}

double profile_F_infinity(const FractionalParams& p, double normalization) {
  p.validate();
  if (!(normalization > 0.0)) {
    throw InvalidParams("profile_F_infinity: normalization must be positive");
  }
  return 0.5 * normalization * beta_fn(0.5, 0.5 * (p.n + p.s - 1.0));
}

KernelConstants kernel_constants(const FractionalParams& p) {
  p.validate();
  return {p.sigma(), c_ns(p), c_circ(p.n), profile_F_infinity(p)};
}

OmegaCheck omega_check(const FractionalParams& p) {
  p.validate();
  const double analytic = beta_fn(0.5 * (p.n - 1), 0.5 * (1.0 + p.s));
  const double quad =
      2.0 * integrate_de(
                [&](double th) {
                  return std::pow(std::sin(th), p.n - 2) *
                         std::pow(std::cos(th), p.s);
                },
                0.0, 0.5 * std::numbers::pi)
                .value;
  return {analytic, quad, std::abs(quad - analytic) / std::abs(analytic)};
}

ProfileTable::ProfileTable(double power, int n_cells) : power_(power) {
  if (!(power > 1.0)) {
    throw InvalidParams("ProfileTable: decay power must exceed 1");
  }
  n_cells = std::max(n_cells, 64);
  t_split_ = 5.0;
  f_infinity_ = 0.5 * beta_fn(0.5, 0.5 * (power - 1.0));
  // The integrand cos^{power-2} has a cusp at phi = pi/2 for power < 4, so
  // the table stops at atan(t_split) and the far branch switches to the
  // asymptotic series, which is where it converges fast.
  dphi_ = std::atan(t_split_) / n_cells;
  cum_.resize(n_cells + 1);
  slope_.resize(n_cells + 1);
  for (int i = 0; i <= n_cells; ++i) slope_[i] = integrand(i * dphi_);
  cum_[0] = 0.0;
  for (int i = 0; i < n_cells; ++i) {
    const double mid = integrand((i + 0.5) * dphi_);
    cum_[i + 1] = cum_[i] + dphi_ / 6.0 * (slope_[i] + 4.0 * mid + slope_[i + 1]);
  }
}

double ProfileTable::tail_beyond(double t) const {
  if (!(t > 0.0)) throw InvalidParams("ProfileTable::tail_beyond: need t > 0");
  if (t < 0.5 * t_split_) {
    // series would converge slowly; answer via the table instead
    return f_infinity_ - (*this)(t);
  }
  const double cap = 0.5 * power_;
  const double invt2 = 1.0 / (t * t);
  double coef = 1.0;  // (-1)^k (cap)_k / k!
  double tp = std::pow(t, 1.0 - power_);
  double acc = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double term = coef * tp / (power_ + 2.0 * k - 1.0);
    acc += term;
    if (std::abs(term) < 1e-17 * std::abs(acc)) break;
    coef *= -(cap + k) / (k + 1.0);
    tp *= invt2;
  }
  return acc;
}

double ProfileTable::integrand(double phi) const {
  // In phi = atan(tau) coordinates: (1+tau^2)^{-p} dtau = cos^{2p-2} dphi.
  return std::pow(std::cos(phi), power_ - 2.0);
}

double ProfileTable::operator()(double t) const {
  if (t == 0.0) return 0.0;
  const double at = std::abs(t);
  if (at > t_split_) {
    return std::copysign(f_infinity_ - tail_beyond(at), t);
  }
  const double u = std::atan(at) / dphi_;
  const auto i = std::min<size_t>(static_cast<size_t>(u), cum_.size() - 2);
  const double x = u - static_cast<double>(i);
  // Cubic Hermite with exact endpoint derivatives.
  const double h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
  const double h10 = x * (1.0 - x) * (1.0 - x);
  const double h01 = x * x * (3.0 - 2.0 * x);
  const double h11 = x * x * (x - 1.0);
  const double v = h00 * cum_[i] + h01 * cum_[i + 1] +
                   dphi_ * (h10 * slope_[i] + h11 * slope_[i + 1]);
  return std::copysign(v, t);
}

}  // namespace fracmin
