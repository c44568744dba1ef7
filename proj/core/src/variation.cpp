// Localized fractional perimeter, its first and second variation along
// vertical graph flows, and the stability quadratic form. Everything is a
// composition of the column calculus in nonlocal_detail.hpp; what matters
// throughout is that node counts and rule layouts are fixed functions of the
// inputs' shapes, never of sampled values, so finite differences of these
// quantities in a flow parameter stay smooth.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "fracmin/errors.hpp"
#include "fracmin/geometry.hpp"
#include "fracmin/kernel.hpp"
#include "fracmin/nonlocal.hpp"
#include "fracmin/quadrature.hpp"
#include "nonlocal_detail.hpp"

namespace fracmin {

using detail::band_integral;
using detail::cap_segments_dim1;
using detail::column_at;
using detail::column_intervals;
using detail::ColumnCuts;
using detail::far_moments;
using detail::far_remainder;
using detail::FarMoments;
using detail::Gauss12;
using detail::Interval;
using detail::intervals_kernel_mass;
using detail::intervals_vertical_moment;
using detail::parallel_for;
using detail::profile_for;
using detail::simpson_weights;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double grading_exponent(double sigma) {
  return std::clamp(2.0 / sigma, 2.0, 40.0);
}

// Outer horizontal reach of the lateral quadratures: far enough that the
// extension rule has frozen every column, and that the closed-form remainder
// series (valid for |endpoint| / c < 1/8) applies.
double lateral_reach(const SheetStack& stack, const CylinderDomain& omega) {
  double vbound = std::max(std::abs(omega.z_min), std::abs(omega.z_max));
  for (const auto& sh : stack.sheets)
    for (double z : sh.height) vbound = std::max(vbound, std::abs(z));
  const double span = stack.grid.dim == 1 ? stack.grid.extent
                                          : stack.grid.extent * std::sqrt(2.0);
  return std::max(span, omega.horizontal_radius) + 4.0 + 16.0 * vbound;
}

void check_window_covered(const SheetStack& stack,
                          const CylinderDomain& omega) {
  if (omega.horizontal_radius > stack.grid.extent * (1.0 + 1e-12) &&
      !stack.grid.periodic)
    throw ExtensionRuleMissing(
        "window radius exceeds the sampled extent of the sheets");
}

// ---------------------------------------------------------------------------
// localized perimeter, dim-1 sheets

// A coordinate carried as an exact signed offset from an anchor position.
// Near s = 1 the graded rules place nodes at distances far below one ulp of
// the anchor, and that ulp-sized neighborhood still holds a percent-level
// share of the kernel mass. Forming anchor + offset would collapse the node
// onto the interface, so every kernel argument is computed relative to the
// anchor instead.
struct Anchored {
  double base = 0.0;
  double off = 0.0;
  double value() const { return base + off; }  // smooth lookups only
};

void shift_by(std::vector<Interval>& bands, double base) {
  for (auto& iv : bands) {
    iv.lo -= base;
    iv.hi -= base;
  }
}

// integral over all of E^c of the kernel centered at (x1, zp)
double inner_complement_mass(const SheetStack& stack, const ProfileTable& F,
                             double x1, const Anchored& zp, double c1) {
  std::vector<Interval> bands;
  double total = 0.0;
  for (int side : {+1, -1}) {
    total += integrate_de(
                 [&](double c) {
                   std::vector<Interval> local;
                   column_intervals(column_at(stack, x1 + side * c), false,
                                    -kInf, kInf, local);
                   shift_by(local, zp.base);
                   return intervals_kernel_mass(F, c, local, zp.off);
                 },
                 0.0, c1, 1e-11)
                 .value;
    column_intervals(column_at(stack, x1 + side * c1), false, -kInf, kInf,
                     bands);
    shift_by(bands, zp.base);
    total += far_remainder(F, 1, c1, far_moments(F, F.power(), bands, zp.off));
  }
  return total;
}

// integral over E \ Omega of the kernel centered at (y1p, zp); y1p is
// anchored at the window wall the outer rule grades toward
double inner_outside_mass(const SheetStack& stack, const ProfileTable& F,
                          const Anchored& y1p, const Anchored& zp,
                          const CylinderDomain& omega, double c1) {
  const double rho = omega.horizontal_radius;
  const double y1 = y1p.value();
  std::vector<Interval> bands;
  double total = 0.0;
  for (int side : {+1, -1}) {
    // exact distance to this side's wall
    const double c0 = side > 0 ? (rho - y1p.base) - y1p.off
                               : (y1p.base + rho) + y1p.off;
    // full columns beyond the wall
    total += integrate_de(
                 [&](double c) {
                   std::vector<Interval> local;
                   column_intervals(column_at(stack, y1 + side * c), true,
                                    -kInf, kInf, local);
                   shift_by(local, zp.base);
                   return intervals_kernel_mass(F, c, local, zp.off);
                 },
                 c0, c1, 1e-11)
                 .value;
    column_intervals(column_at(stack, y1 + side * c1), true, -kInf, kInf,
                     bands);
    shift_by(bands, zp.base);
    total += far_remainder(F, 1, c1, far_moments(F, F.power(), bands, zp.off));
    // columns inside the window, beyond the caps
    total += integrate_de(
                 [&](double c) {
                   std::vector<Interval> local, clipped;
                   const ColumnCuts cuts = column_at(stack, y1 + side * c);
                   column_intervals(cuts, true, omega.z_max, kInf, local);
                   shift_by(local, zp.base);
                   double m = intervals_kernel_mass(F, c, local, zp.off);
                   column_intervals(cuts, true, -kInf, omega.z_min, clipped);
                   shift_by(clipped, zp.base);
                   m += intervals_kernel_mass(F, c, clipped, zp.off);
                   return m;
                 },
                 0.0, c0, 1e-11)
                 .value;
  }
  return total;
}

// Vertical rule over one interval of a column: Gauss-Legendre per half,
// graded toward the half's outer endpoint when the integrand is singular
// there (a sheet cut for the E side, a cap for the E^c side).
template <class Fn>
double interval_rule(double a, double b, bool grade_lo, bool grade_hi,
                     double gamma, Fn&& integrand) {
  const auto& xs = Gauss12::nodes();
  const auto& ws = Gauss12::weights();
  const double mid = 0.5 * (a + b);
  double total = 0.0;
  for (int half = 0; half < 2; ++half) {
    const double end = half == 0 ? a : b;
    const double len = half == 0 ? mid - a : b - mid;
    const bool graded = half == 0 ? grade_lo : grade_hi;
    const double sign = half == 0 ? 1.0 : -1.0;
    for (std::size_t q = 0; q < xs.size(); ++q) {
      const double u = xs[q];
      double offset, jac;
      if (graded) {
        offset = len * std::pow(u, gamma);
        jac = len * gamma * std::pow(u, gamma - 1.0);
      } else {
        offset = len * u;
        jac = len;
      }
      total += ws[q] * jac * integrand(Anchored{end, sign * offset});
    }
  }
  return total;
}

double per_s_dim1(const SheetStack& stack, const CylinderDomain& omega,
                  const QuadratureSpec& spec) {
  const GridSpec& grid = stack.grid;
  const double sigma = stack.params.sigma();
  const double rho = omega.horizontal_radius;
  const auto profile = profile_for(stack.params.n + stack.params.s);
  const ProfileTable& F = *profile;
  const double c1 = lateral_reach(stack, omega);
  const double gamma = grading_exponent(sigma);
  const double eps_cap = 1e-12 * (1.0 + std::abs(omega.z_min) +
                                  std::abs(omega.z_max));
  (void)spec;

  // ---- pairs with the E point inside the window
  int m1 = static_cast<int>(std::lround(2.0 * rho / grid.spacing()));
  m1 = std::clamp(m1, 32, 256);
  m1 += m1 % 2;
  const auto w1 = simpson_weights(static_cast<std::size_t>(m1) + 1,
                                  2.0 * rho / m1);
  std::vector<double> part_a(static_cast<std::size_t>(m1) + 1, 0.0);
  parallel_for(part_a.size(), [&](std::size_t k) {
    const double x1 = -rho + 2.0 * rho * static_cast<double>(k) / m1;
    std::vector<Interval> bands;
    column_intervals(column_at(stack, x1), true, omega.z_min, omega.z_max,
                     bands);
    double acc = 0.0;
    for (const auto& iv : bands) {
      const bool lo_sheet = iv.lo > omega.z_min + eps_cap;
      const bool hi_sheet = iv.hi < omega.z_max - eps_cap;
      acc += interval_rule(iv.lo, iv.hi, lo_sheet, hi_sheet, gamma,
                           [&](const Anchored& zp) {
                             return inner_complement_mass(stack, F, x1, zp,
                                                          c1);
                           });
    }
    part_a[k] = w1[k] * acc;
  });
  double part_one = 0.0;
  for (double v : part_a) part_one += v;

  // ---- pairs with the E point outside and the E^c point inside
  const auto& gl_x = Gauss12::nodes();
  const auto& gl_w = Gauss12::weights();
  std::vector<double> part_b(2 * gl_x.size(), 0.0);
  parallel_for(part_b.size(), [&](std::size_t slot) {
    const int side = slot < gl_x.size() ? -1 : +1;  // which wall is graded
    const std::size_t q = slot % gl_x.size();
    const double u = gl_x[q];
    const double dwall = rho * std::pow(u, gamma);
    const Anchored y1p{side * rho, -side * dwall};
    const double jac = rho * gamma * std::pow(u, gamma - 1.0);
    std::vector<Interval> bands;
    column_intervals(column_at(stack, y1p.value()), false, omega.z_min,
                     omega.z_max, bands);
    double acc = 0.0;
    for (const auto& iv : bands) {
      const bool lo_cap = iv.lo <= omega.z_min + eps_cap;
      const bool hi_cap = iv.hi >= omega.z_max - eps_cap;
      acc += interval_rule(iv.lo, iv.hi, lo_cap, hi_cap, gamma,
                           [&](const Anchored& zp) {
                             return inner_outside_mass(stack, F, y1p, zp,
                                                       omega, c1);
                           });
    }
    part_b[slot] = gl_w[q] * jac * acc;
  });
  double part_two = 0.0;
  for (double v : part_b) part_two += v;

  return 2.0 * sigma * (part_one + part_two);
}

// ---------------------------------------------------------------------------
// localized perimeter, dim-2 sheets (coarse polar rules)

double inner_complement_mass_2d(const SheetStack& stack,
                                const ProfileTable& F, double x1, double x2,
                                const Anchored& zp, double c1) {
  const int n_ang = 12;
  double total = 0.0;
  for (int k = 0; k < n_ang; ++k) {
    const double phi = 2.0 * M_PI * (k + 0.5) / n_ang;
    const double w1 = std::cos(phi), w2 = std::sin(phi);
    total += integrate_de(
                 [&](double c) {
                   std::vector<Interval> local;
                   column_intervals(
                       column_at(stack, x1 + c * w1, x2 + c * w2), false,
                       -kInf, kInf, local);
                   shift_by(local, zp.base);
                   return c * intervals_kernel_mass(F, c, local, zp.off);
                 },
                 0.0, c1, 1e-9)
                 .value;
    std::vector<Interval> bands;
    column_intervals(column_at(stack, x1 + c1 * w1, x2 + c1 * w2), false,
                     -kInf, kInf, bands);
    shift_by(bands, zp.base);
    total += far_remainder(F, 2, c1, far_moments(F, F.power(), bands, zp.off));
  }
  return total * (2.0 * M_PI / n_ang);
}

double inner_outside_mass_2d(const SheetStack& stack, const ProfileTable& F,
                             double y1, double y2, double dwall,
                             const Anchored& zp, const CylinderDomain& omega,
                             double c1) {
  const double rho = omega.horizontal_radius;
  const int n_ang = 12;
  // rho^2 - r^2 for r = rho - dwall, kept exact for tiny wall distances
  const double q_disc = dwall * (2.0 * rho - dwall);
  double total = 0.0;
  for (int k = 0; k < n_ang; ++k) {
    const double phi = 2.0 * M_PI * (k + 0.5) / n_ang;
    const double w1 = std::cos(phi), w2 = std::sin(phi);
    const double proj = y1 * w1 + y2 * w2;
    const double root = std::sqrt(proj * proj + q_disc);
    const double t_exit = proj >= 0.0 ? q_disc / (proj + root) : root - proj;
    // full columns beyond the wall, along the ray
    total += integrate_de(
                 [&](double c) {
                   std::vector<Interval> local;
                   column_intervals(
                       column_at(stack, y1 + c * w1, y2 + c * w2), true,
                       -kInf, kInf, local);
                   shift_by(local, zp.base);
                   return c * intervals_kernel_mass(F, c, local, zp.off);
                 },
                 t_exit, c1, 1e-9)
                 .value;
    std::vector<Interval> bands;
    column_intervals(column_at(stack, y1 + c1 * w1, y2 + c1 * w2), true,
                     -kInf, kInf, bands);
    shift_by(bands, zp.base);
    total += far_remainder(F, 2, c1, far_moments(F, F.power(), bands, zp.off));
    // inside the disc, beyond the caps
    total += integrate_de(
                 [&](double c) {
                   std::vector<Interval> local, clipped;
                   const ColumnCuts cuts =
                       column_at(stack, y1 + c * w1, y2 + c * w2);
                   column_intervals(cuts, true, omega.z_max, kInf, local);
                   shift_by(local, zp.base);
                   double m = intervals_kernel_mass(F, c, local, zp.off);
                   column_intervals(cuts, true, -kInf, omega.z_min, clipped);
                   shift_by(clipped, zp.base);
                   m += intervals_kernel_mass(F, c, clipped, zp.off);
                   return c * m;
                 },
                 0.0, t_exit, 1e-9)
                 .value;
  }
  return total * (2.0 * M_PI / n_ang);
}

double per_s_dim2(const SheetStack& stack, const CylinderDomain& omega,
                  const QuadratureSpec& spec) {
  const double sigma = stack.params.sigma();
  const double rho = omega.horizontal_radius;
  const auto profile = profile_for(stack.params.n + stack.params.s);
  const ProfileTable& F = *profile;
  const double c1 = lateral_reach(stack, omega);
  const double gamma = grading_exponent(sigma);
  const double eps_cap = 1e-12 * (1.0 + std::abs(omega.z_min) +
                                  std::abs(omega.z_max));
  (void)spec;

  const int n_ang = 16;
  const auto& gl_x = Gauss12::nodes();
  const auto& gl_w = Gauss12::weights();

  std::vector<double> part_a(static_cast<std::size_t>(n_ang) * gl_x.size(),
                             0.0);
  parallel_for(part_a.size(), [&](std::size_t slot) {
    const int k = static_cast<int>(slot) / static_cast<int>(gl_x.size());
    const std::size_t q = slot % gl_x.size();
    const double theta = 2.0 * M_PI * (k + 0.5) / n_ang;
    const double r = rho * gl_x[q];
    const double x1 = r * std::cos(theta), x2 = r * std::sin(theta);
    std::vector<Interval> bands;
    column_intervals(column_at(stack, x1, x2), true, omega.z_min, omega.z_max,
                     bands);
    double acc = 0.0;
    for (const auto& iv : bands) {
      const bool lo_sheet = iv.lo > omega.z_min + eps_cap;
      const bool hi_sheet = iv.hi < omega.z_max - eps_cap;
      acc += interval_rule(iv.lo, iv.hi, lo_sheet, hi_sheet, gamma,
                           [&](const Anchored& zp) {
                             return inner_complement_mass_2d(stack, F, x1, x2,
                                                             zp, c1);
                           });
    }
    part_a[slot] = (2.0 * M_PI / n_ang) * gl_w[q] * rho * r * acc;
  });
  double part_one = 0.0;
  for (double v : part_a) part_one += v;

  std::vector<double> part_b(static_cast<std::size_t>(n_ang) * gl_x.size(),
                             0.0);
  parallel_for(part_b.size(), [&](std::size_t slot) {
    const int k = static_cast<int>(slot) / static_cast<int>(gl_x.size());
    const std::size_t q = slot % gl_x.size();
    const double theta = 2.0 * M_PI * (k + 0.5) / n_ang;
    const double u = gl_x[q];
    const double dwall = rho * std::pow(u, gamma);  // graded to the wall
    const double r = rho - dwall;
    const double jac = rho * gamma * std::pow(u, gamma - 1.0);
    const double y1 = r * std::cos(theta), y2 = r * std::sin(theta);
    std::vector<Interval> bands;
    column_intervals(column_at(stack, y1, y2), false, omega.z_min,
                     omega.z_max, bands);
    double acc = 0.0;
    for (const auto& iv : bands) {
      const bool lo_cap = iv.lo <= omega.z_min + eps_cap;
      const bool hi_cap = iv.hi >= omega.z_max - eps_cap;
      acc += interval_rule(iv.lo, iv.hi, lo_cap, hi_cap, gamma,
                           [&](const Anchored& zp) {
                             return inner_outside_mass_2d(stack, F, y1, y2,
                                                          dwall, zp, omega,
                                                          c1);
                           });
    }
    part_b[slot] = (2.0 * M_PI / n_ang) * gl_w[q] * jac * r * acc;
  });
  double part_two = 0.0;
  for (double v : part_b) part_two += v;

  return 2.0 * sigma * (part_one + part_two);
}

// ---------------------------------------------------------------------------
// surface traces and the shared pair engine (dim-1 sheets)

struct Trace {
  std::vector<double> x, z, slope, wfac;  // position, height, g', sqrt(1+g'^2)
  std::vector<double> nx, nz, dnu2;       // unit normal and |d nu / dx|^2
  std::vector<double> v, dv;              // field value and its x-derivative
  std::vector<double> wq;                 // quadrature weight in dx
};

std::vector<Trace> build_traces(const SheetStack& stack,
                                const PerturbationField& field,
                                const CylinderDomain& omega) {
  const GridSpec& grid = stack.grid;
  const double h = grid.spacing();
  const double rho = omega.horizontal_radius;
  const int res = grid.resolution;

  int lo = static_cast<int>(std::ceil((-rho + grid.extent) / h - 1e-9));
  int hi = static_cast<int>(std::floor((rho + grid.extent) / h + 1e-9));
  lo = std::clamp(lo, 0, res - 1);
  hi = std::clamp(hi, 0, res - 1);
  if (hi - lo < 8) throw BadDomain("window spans too few grid cells");

  std::vector<Trace> traces(stack.sheets.size());
  for (std::size_t si = 0; si < stack.sheets.size(); ++si) {
    const auto& g = stack.sheets[si].height;
    const auto& eta = field.eta[si];
    const double parity = stack.parity(static_cast<int>(si));
    Trace& tr = traces[si];

    auto slope_at = [&](int k) {
      if (k > 0 && k < res - 1)
        return (g[static_cast<std::size_t>(k + 1)] -
                g[static_cast<std::size_t>(k - 1)]) /
               (2.0 * h);
      if (k == 0) return (g[1] - g[0]) / h;
      return (g[static_cast<std::size_t>(res - 1)] -
              g[static_cast<std::size_t>(res - 2)]) /
             h;
    };
    auto field_slope_at = [&](int k) {
      if (k > 0 && k < res - 1)
        return (eta[static_cast<std::size_t>(k + 1)] -
                eta[static_cast<std::size_t>(k - 1)]) /
               (2.0 * h);
      if (k == 0) return (eta[1] - eta[0]) / h;
      return (eta[static_cast<std::size_t>(res - 1)] -
              eta[static_cast<std::size_t>(res - 2)]) /
             h;
    };
    auto normal_at = [&](int k, double* out_nx, double* out_nz) {
      const double sl = slope_at(k);
      const double w = std::sqrt(1.0 + sl * sl);
      *out_nx = -parity * sl / w;
      *out_nz = parity / w;
    };

    const int count = hi - lo + 1;
    tr.x.reserve(static_cast<std::size_t>(count) + 2);
    auto push = [&](double xx, double zz, double sl, double vv, double dvv,
                    double d2) {
      const double w = std::sqrt(1.0 + sl * sl);
      tr.x.push_back(xx);
      tr.z.push_back(zz);
      tr.slope.push_back(sl);
      tr.wfac.push_back(w);
      tr.nx.push_back(-parity * sl / w);
      tr.nz.push_back(parity / w);
      tr.v.push_back(vv);
      tr.dv.push_back(dvv);
      tr.dnu2.push_back(d2);
    };

    const double left_gap = grid.coord(lo) - (-rho);
    const double right_gap = rho - grid.coord(hi);
    if (left_gap > 1e-12)
      push(-rho, detail::sheet_at(grid, g, -rho), slope_at(lo), 0.0, 0.0, 0.0);
    for (int k = lo; k <= hi; ++k) {
      double d2 = 0.0;
      if (k > 0 && k < res - 1) {
        double nxm, nzm, nxp, nzp;
        normal_at(k - 1, &nxm, &nzm);
        normal_at(k + 1, &nxp, &nzp);
        const double dnx = (nxp - nxm) / (2.0 * h);
        const double dnz = (nzp - nzm) / (2.0 * h);
        d2 = dnx * dnx + dnz * dnz;
      }
      push(grid.coord(k), g[static_cast<std::size_t>(k)], slope_at(k),
           eta[static_cast<std::size_t>(k)], field_slope_at(k), d2);
    }
    if (right_gap > 1e-12)
      push(rho, detail::sheet_at(grid, g, rho), slope_at(hi), 0.0, 0.0, 0.0);

    // composite weights for the uniform core, trapezoid strips to the exact
    // window edge
    const auto base = simpson_weights(static_cast<std::size_t>(count), h);
    tr.wq.assign(tr.x.size(), 0.0);
    std::size_t off = left_gap > 1e-12 ? 1 : 0;
    for (int k = 0; k < count; ++k)
      tr.wq[off + static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)];
    if (left_gap > 1e-12) {
      tr.wq[0] += 0.5 * left_gap;
      tr.wq[1] += 0.5 * left_gap;
    }
    if (right_gap > 1e-12) {
      tr.wq[tr.wq.size() - 1] += 0.5 * right_gap;
      tr.wq[tr.wq.size() - 2] += 0.5 * right_gap;
    }
  }
  return traces;
}

struct PairSums {
  double dirichlet = 0.0;    // double integral of (v(x)-v(y))^2 K0 dH dH
  double interaction = 0.0;  // double integral of |nu(x)-nu(y)|^2 v(x)^2 K0
};

// Ordered-pair sums over (Gamma cap Omega)^2. Same-sheet rows subtract the
// local quadratic model of the integrand and add its integral in closed
// form; the remainder vanishes at the diagonal, so skipping the y = x node
// is exact. sigma_power = 1 - s appears as the exponent of the edge
// distances in the closed form.
PairSums pair_quadratic(const std::vector<Trace>& traces, double P,
                        double rho, double s) {
  const double sg = 1.0 - s;
  std::size_t total_nodes = 0;
  for (const auto& tr : traces) total_nodes += tr.x.size();

  std::vector<std::pair<std::size_t, std::size_t>> index(total_nodes);
  std::size_t pos = 0;
  for (std::size_t ti = 0; ti < traces.size(); ++ti)
    for (std::size_t a = 0; a < traces[ti].x.size(); ++a) index[pos++] = {ti, a};

  std::vector<double> dir_rows(total_nodes, 0.0), int_rows(total_nodes, 0.0);
  parallel_for(total_nodes, [&](std::size_t row) {
    const auto [ti, a] = index[row];
    const Trace& tx = traces[ti];
    const double xa = tx.x[a], za = tx.z[a];
    const double va = tx.v[a], dva = tx.dv[a];
    const double wa = tx.wfac[a];
    const double cq = std::pow(1.0 + tx.slope[a] * tx.slope[a], -0.5 * P);
    const double m_dir = dva * dva * cq * wa;
    const double m_int = tx.dnu2[a] * va * va * cq * wa;

    double dir = 0.0, inter = 0.0;
    for (std::size_t tj = 0; tj < traces.size(); ++tj) {
      const Trace& ty = traces[tj];
      const bool same = tj == ti;
      for (std::size_t b = 0; b < ty.x.size(); ++b) {
        if (same && b == a) continue;
        const double dx = ty.x[b] - xa;
        const double dz = ty.z[b] - za;
        const double k0 = std::pow(dx * dx + dz * dz, -0.5 * P);
        const double dvv = ty.v[b] - va;
        const double dn1 = ty.nx[b] - tx.nx[a];
        const double dn2 = ty.nz[b] - tx.nz[a];
        double fd = dvv * dvv * k0 * ty.wfac[b];
        double fi = (dn1 * dn1 + dn2 * dn2) * va * va * k0 * ty.wfac[b];
        if (same) {
          const double zc = std::abs(dx);
          const double sing = std::pow(zc, -P) * dx * dx;
          fd -= m_dir * sing;
          fi -= m_int * sing;
        }
        dir += ty.wq[b] * fd;
        inter += ty.wq[b] * fi;
      }
    }
    // closed-form integral of the subtracted model over the window span
    const double a_plus = rho - xa, a_minus = xa + rho;
    const double span =
        (std::pow(std::max(a_plus, 0.0), sg) +
         std::pow(std::max(a_minus, 0.0), sg)) /
        sg;
    dir += m_dir * span;
    inter += m_int * span;
    dir_rows[row] = tx.wq[a] * tx.wfac[a] * dir;
    int_rows[row] = tx.wq[a] * tx.wfac[a] * inter;
  });

  PairSums out;
  for (double v : dir_rows) out.dirichlet += v;
  for (double v : int_rows) out.interaction += v;
  return out;
}

// ---------------------------------------------------------------------------
// boundary-data term of the quadratic forms

// 2 sigma * integral over Gamma cap Omega of wsq(x) nu(x) . V(x) dH, where
// V(x) = (n+s) integral_{E cap Omega^c} (x-y) |x-y|^{-(n+s+2)} dy
//      + integral_{E cap dOmega} n_Omega |x-y|^{-(n+s)} dH_y.
double ext2_form(const SheetStack& stack, const std::vector<Trace>& traces,
                 const CylinderDomain& omega) {
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double rho = omega.horizontal_radius;
  const double P1 = stack.params.n + s;
  const double P2 = P1 + 2.0;
  const auto prof1 = profile_for(P1);
  const auto prof2 = profile_for(P2);
  const ProfileTable& F1 = *prof1;
  const ProfileTable& F2 = *prof2;
  const double c1 = lateral_reach(stack, omega);

  // cap membership segments are shared by every surface point
  const auto segs_top = cap_segments_dim1(stack, omega.z_max, rho);
  const auto segs_bot = cap_segments_dim1(stack, omega.z_min, rho);

  std::size_t total_nodes = 0;
  for (const auto& tr : traces) total_nodes += tr.x.size();
  std::vector<std::pair<std::size_t, std::size_t>> index(total_nodes);
  std::size_t pos = 0;
  for (std::size_t ti = 0; ti < traces.size(); ++ti)
    for (std::size_t a = 0; a < traces[ti].x.size(); ++a) index[pos++] = {ti, a};

  std::vector<double> rows(total_nodes, 0.0);
  parallel_for(total_nodes, [&](std::size_t row) {
    const auto [ti, a] = index[row];
    const Trace& tx = traces[ti];
    const double wsq = tx.v[a] * tx.v[a];
    if (wsq == 0.0 || tx.wq[a] == 0.0) {
      rows[row] = 0.0;
      return;
    }
    const double x1 = tx.x[a], x2 = tx.z[a];
    std::vector<Interval> bands;

    double bulk_h = 0.0, bulk_v = 0.0;
    // lateral strips, parameterized by horizontal distance from x
    for (int side : {+1, -1}) {
      const double c0 = side > 0 ? rho - x1 : rho + x1;
      const int m = 96;
      const double dc = (c1 - c0) / m;
      const auto w = simpson_weights(static_cast<std::size_t>(m) + 1, dc);
      double acc_h = 0.0, acc_v = 0.0;
      for (int k = 0; k <= m; ++k) {
        const double c = c0 + k * dc;
        column_intervals(column_at(stack, x1 + side * c), true, -kInf, kInf,
                         bands);
        acc_h += w[static_cast<std::size_t>(k)] * c *
                 intervals_kernel_mass(F2, c, bands, x2);
        acc_v += w[static_cast<std::size_t>(k)] *
                 intervals_vertical_moment(c, bands, x2, P2);
      }
      column_intervals(column_at(stack, x1 + side * c1), true, -kInf, kInf,
                       bands);
      const FarMoments fm = far_moments(F2, P2, bands, x2);
      acc_h += far_remainder(F2, 2, c1, fm);
      // far expansion of the vertical first moment
      double t2 = 0.0, t4 = 0.0;
      for (const auto& iv : bands) {
        const bool lo_inf = std::isinf(iv.lo);
        const bool hi_inf = std::isinf(iv.hi);
        const double aa = lo_inf ? 0.0 : iv.lo - x2;
        const double bb = hi_inf ? 0.0 : iv.hi - x2;
        if (lo_inf && hi_inf) continue;
        if (lo_inf) {
          t2 += 1.0 / (P2 - 2.0);
          t4 -= bb * bb / 2.0;
        } else if (hi_inf) {
          t2 -= 1.0 / (P2 - 2.0);
          t4 += aa * aa / 2.0;
        } else {
          t4 -= (bb * bb - aa * aa) / 2.0;
        }
      }
      acc_v += t2 * std::pow(c1, 3.0 - P2) / (P2 - 3.0) +
               t4 * std::pow(c1, 1.0 - P2) / (P2 - 1.0);
      bulk_h += -side * acc_h;  // x1 - y1 = -side * c
      bulk_v += acc_v;
    }
    // inside the window, beyond the caps
    {
      const int m = 128;
      const double dy = 2.0 * rho / m;
      const auto w = simpson_weights(static_cast<std::size_t>(m) + 1, dy);
      for (int k = 0; k <= m; ++k) {
        const double y1 = -rho + k * dy;
        const double c = std::abs(y1 - x1);
        const ColumnCuts cuts = column_at(stack, y1);
        double mass = 0.0, vmom = 0.0;
        column_intervals(cuts, true, omega.z_max, kInf, bands);
        mass += intervals_kernel_mass(F2, c, bands, x2);
        vmom += intervals_vertical_moment(c, bands, x2, P2);
        column_intervals(cuts, true, -kInf, omega.z_min, bands);
        mass += intervals_kernel_mass(F2, c, bands, x2);
        vmom += intervals_vertical_moment(c, bands, x2, P2);
        bulk_h += w[static_cast<std::size_t>(k)] * (x1 - y1) * mass;
        bulk_v += w[static_cast<std::size_t>(k)] * vmom;
      }
    }
    bulk_h *= (P1);  // the (n+s) factor of the gradient kernel
    bulk_v *= (P1);

    // boundary of the window
    double wall_h = 0.0, wall_v = 0.0;
    for (int side : {+1, -1}) {
      const double y1 = side * rho;
      const double c = std::abs(y1 - x1);
      column_intervals(column_at(stack, y1), true, omega.z_min, omega.z_max,
                       bands);
      wall_h += side * intervals_kernel_mass(F1, c, bands, x2);
    }
    for (int side : {+1, -1}) {
      const double level = side > 0 ? omega.z_max : omega.z_min;
      const double dz = std::abs(level - x2);
      const auto& segs = side > 0 ? segs_top : segs_bot;
      double mass = 0.0;
      for (const auto& seg : segs)
        mass += band_integral(F1, dz, seg.lo - x1, seg.hi - x1);
      wall_v += side * mass;
    }

    const double dot = tx.nx[a] * (bulk_h + wall_h) +
                       tx.nz[a] * (bulk_v + wall_v);
    rows[row] = tx.wq[a] * tx.wfac[a] * wsq * dot;
  });

  double total = 0.0;
  for (double v : rows) total += v;
  return 2.0 * sigma * total;
}

// ---------------------------------------------------------------------------
// validation shared by the variation forms

void check_variation_inputs(const SheetStack& stack,
                            const PerturbationField& field,
                            const CylinderDomain& omega) {
  omega.validate();
  check_window_covered(stack, omega);
  if (stack.grid.dim != 1)
    throw DimensionTooLarge(
        "variation and stability forms are implemented for dim-1 sheets");
  if (field.eta.size() != stack.sheets.size())
    throw ConfigInvalid("field must carry one value array per sheet");
  for (const auto& values : field.eta)
    if (values.size() != stack.grid.node_count())
      throw GridMismatch("field arrays must match the grid node count");
  const double h = stack.grid.spacing();
  if (!(field.support_radius > 0.0))
    throw ConfigInvalid("field support radius must be positive");
  if (field.support_radius > omega.horizontal_radius - 2.0 * h)
    throw SupportViolation(
        "field support must stay two cells inside the window");
  for (std::size_t si = 0; si < stack.sheets.size(); ++si) {
    const auto& eta = field.eta[si];
    for (std::size_t k = 0; k < eta.size(); ++k) {
      if (eta[k] != 0.0 &&
          std::abs(stack.grid.coord(static_cast<int>(k))) >
              field.support_radius + 1e-12)
        throw SupportViolation("field is nonzero outside its support radius");
    }
  }
}

void check_sheets_inside(const SheetStack& stack,
                         const CylinderDomain& omega) {
  for (const auto& sh : stack.sheets) {
    const auto [lo, hi] = std::minmax_element(sh.height.begin(),
                                              sh.height.end());
    if (*lo <= omega.z_min || *hi >= omega.z_max)
      throw BadDomain("sheets must stay strictly between the window caps");
  }
}

void check_regularity_proxy(const SheetStack& stack) {
  const double h = stack.grid.spacing();
  for (const auto& sh : stack.sheets) {
    const auto& g = sh.height;
    for (std::size_t k = 1; k + 1 < g.size(); ++k) {
      const double d2 = (g[k + 1] - 2.0 * g[k] + g[k - 1]) / (h * h);
      const double d1 = (g[k + 1] - g[k - 1]) / (2.0 * h);
      if (std::abs(d2) > 1e4)
        throw RoughBoundary("sheet curvature proxy exceeds the C^{1,1} bound");
      if (std::abs(d1) >= 1.0)
        throw RoughBoundary("sheet slope reaches 1");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// public entry points

double per_s(const SheetStack& stack, const CylinderDomain& omega,
             const QuadratureSpec& spec) {
  if (stack.params.n > 3)
    throw DimensionTooLarge("perimeter quadratures stop at ambient dimension 3");
  omega.validate();
  spec.validate();
  check_window_covered(stack, omega);
  return stack.grid.dim == 1 ? per_s_dim1(stack, omega, spec)
                             : per_s_dim2(stack, omega, spec);
}

StabilityReport stability_form(const SheetStack& stack,
                               const PerturbationField& field,
                               const CylinderDomain& omega,
                               const QuadratureSpec& spec) {
  spec.validate();
  check_variation_inputs(stack, field, omega);
  check_sheets_inside(stack, omega);

  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double P1 = stack.params.n + s;

  const auto traces = build_traces(stack, field, omega);
  const PairSums sums = pair_quadratic(traces, P1, omega.horizontal_radius, s);

  // Full Gamma x Gamma convention: every unordered pair of surface points
  // counts twice, matching the second variation line by line. With that
  // convention the margin at H_K = 0 is the second variation itself.
  StabilityReport report;
  report.rhs_dirichlet = 2.0 * sigma * sums.dirichlet;
  report.lhs_interaction = 2.0 * sigma * sums.interaction;
  report.ext2 = 2.0 * ext2_form(stack, traces, omega);
  report.margin = report.rhs_dirichlet + report.ext2 - report.lhs_interaction;
  return report;
}

double first_variation(const SheetStack& stack, const PerturbationField& field,
                       const CylinderDomain& omega,
                       const QuadratureSpec& spec) {
  spec.validate();
  check_variation_inputs(stack, field, omega);
  const GridSpec& grid = stack.grid;
  const double h = grid.spacing();
  const auto wq = simpson_weights(grid.node_count(), h);

  double total = 0.0;
  for (std::size_t si = 0; si < stack.sheets.size(); ++si) {
    const double parity = stack.parity(static_cast<int>(si));
    const auto& phi = field.eta[si];
    for (std::size_t k = 0; k < phi.size(); ++k) {
      if (phi[k] == 0.0) continue;
      total += parity * wq[k] * phi[k] *
               hk_curvature(stack, static_cast<int>(si), k, spec);
    }
  }
  return total;
}

double second_variation(const SheetStack& stack,
                        const PerturbationField& field,
                        const CylinderDomain& omega,
                        const QuadratureSpec& spec) {
  spec.validate();
  check_variation_inputs(stack, field, omega);
  check_sheets_inside(stack, omega);
  check_regularity_proxy(stack);

  const GridSpec& grid = stack.grid;
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double P1 = stack.params.n + s;
  const double h = grid.spacing();

  // normal speed induced by the vertical flow: zeta = parity * phi / W
  PerturbationField zeta;
  zeta.support_radius = field.support_radius;
  zeta.eta.resize(stack.sheets.size());
  for (std::size_t si = 0; si < stack.sheets.size(); ++si) {
    const auto& g = stack.sheets[si].height;
    const auto& phi = field.eta[si];
    const double parity = stack.parity(static_cast<int>(si));
    auto& out = zeta.eta[si];
    out.resize(phi.size());
    for (std::size_t k = 0; k < phi.size(); ++k) {
      double sl;
      if (k > 0 && k + 1 < g.size())
        sl = (g[k + 1] - g[k - 1]) / (2.0 * h);
      else if (k == 0)
        sl = (g[1] - g[0]) / h;
      else
        sl = (g[k] - g[k - 1]) / h;
      out[k] = parity * phi[k] / std::sqrt(1.0 + sl * sl);
    }
  }

  const auto traces = build_traces(stack, zeta, omega);
  const PairSums sums = pair_quadratic(traces, P1, omega.horizontal_radius, s);
  const double line1 = 2.0 * sigma * sums.dirichlet;
  const double line2 = -2.0 * sigma * sums.interaction;
  const double line3 = 2.0 * ext2_form(stack, traces, omega);

  // transport term: the flow is divergence free, so what is left is the
  // surface divergence of the tangential part, integrated against the
  // curvature. Per sheet that is an exact derivative in x of
  // phi^2 g' / (1 + g'^2).
  const auto wq = simpson_weights(grid.node_count(), h);
  double line4 = 0.0;
  for (std::size_t si = 0; si < stack.sheets.size(); ++si) {
    const auto& g = stack.sheets[si].height;
    const auto& phi = field.eta[si];
    const double parity = stack.parity(static_cast<int>(si));
    std::vector<double> flux(phi.size(), 0.0);
    for (std::size_t k = 0; k < phi.size(); ++k) {
      if (phi[k] == 0.0) continue;
      double sl;
      if (k > 0 && k + 1 < g.size())
        sl = (g[k + 1] - g[k - 1]) / (2.0 * h);
      else if (k == 0)
        sl = (g[1] - g[0]) / h;
      else
        sl = (g[k] - g[k - 1]) / h;
      flux[k] = phi[k] * phi[k] * sl / (1.0 + sl * sl);
    }
    for (std::size_t k = 1; k + 1 < phi.size(); ++k) {
      const double dflux = (flux[k + 1] - flux[k - 1]) / (2.0 * h);
      if (dflux == 0.0) continue;
      line4 -= parity * wq[k] * dflux *
               hk_curvature(stack, static_cast<int>(si), k, spec);
    }
  }

  return line1 + line2 + line3 + line4;
}

}  // namespace fracmin
