#include "fracmin/nonlocal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "fracmin/errors.hpp"
#include "fracmin/kernel.hpp"
#include "fracmin/quadrature.hpp"
#include "nonlocal_detail.hpp"

namespace fracmin {

using detail::band_integral;
using detail::column_at;
using detail::column_intervals;
using detail::ColumnCuts;
using detail::far_moments;
using detail::far_remainder;
using detail::FarMoments;
using detail::Interval;
using detail::intervals_kernel_mass;
using detail::profile_for;
using detail::ray_down_integral;
using detail::ray_up_integral;
using detail::sheet_at;
using detail::simpson_weights;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dim_supported(const SheetStack& stack) {
  if (stack.params.n > 3)
    throw DimensionTooLarge(
        "surface quadratures are implemented for ambient dimension 2 and 3");
}

void require_sheet_node(const SheetStack& stack, int sheet, std::size_t node) {
  if (sheet < 0 || sheet >= static_cast<int>(stack.n_sheets()))
    throw BadDomain("sheet index out of range");
  if (node >= stack.grid.node_count()) throw BadDomain("node index out of range");
}

bool sheet_is_flat(const std::vector<double>& h, double* level = nullptr) {
  const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
  double scale = std::max({1.0, std::abs(*lo), std::abs(*hi)});
  if (*hi - *lo <= 1e-13 * scale) {
    if (level) *level = 0.5 * (*lo + *hi);
    return true;
  }
  return false;
}

// Frozen-height lateral tail of the graph integral: the constant extension
// keeps g(y) - g(x) pinned at delta beyond radius R, so the remaining mass
// is sign(delta) |delta|^{-s} * integral_0^{|delta|/R} F(t) t^{s-1} dt.
double frozen_graph_tail(const ProfileTable& profile, double delta, double R,
                         double s) {
  if (delta == 0.0 || R <= 0.0) return 0.0;
  const double u = std::abs(delta) / R;
  const double head =
      integrate_de([&](double t) { return profile(t) * std::pow(t, s - 1.0); },
                   0.0, u, 1e-12)
          .value;
  return std::copysign(std::pow(std::abs(delta), -s) * head, delta);
}

// ---------------------------------------------------------------------------
// hs_graph, dim-1 sheets

double hs_graph_dim1(const SheetStack& stack, int sheet, std::size_t node,
                     const QuadratureSpec& spec) {
  const GridSpec& grid = stack.grid;
  const std::vector<double>& g = stack.sheets[static_cast<std::size_t>(sheet)].height;
  const int res = grid.resolution;
  const double h = grid.spacing();
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const int i0 = static_cast<int>(node);

  if (sheet_is_flat(g)) return 0.0;
  if (i0 < 3 || i0 > res - 4)
    throw BadDomain("evaluation node too close to the grid edge");

  const auto profile = profile_for(stack.params.n + s);
  const ProfileTable& F = *profile;
  const double gx = g[node];

  const double gp = (g[node + 1] - g[node - 1]) / (2.0 * h);
  if (std::abs(gp) >= 1.0)
    throw BadDomain("sheet slope reaches 1; outside the graph regime");
  const double gpp = (g[node + 1] - 2.0 * gx + g[node - 1]) / (h * h);
  const double beta = 0.5 * gpp;

  // Near field on [0, r]: local quadratic model, with the linear part of the
  // two-sided profile sum integrated in closed form. This is what keeps the
  // value sane as s -> 1, where most of the kernel mass sits below one cell.
  int k_core = static_cast<int>(std::lround(spec.r_core / h));
  k_core = std::clamp(k_core, 2, std::min(i0 - 1, res - 2 - i0));
  const double r = k_core * h;
  const double slope0 = 2.0 * beta * std::pow(1.0 + gp * gp,
                                              -0.5 * (stack.params.n + s));
  double acc = slope0 * std::pow(r, 1.0 - s) / (1.0 - s);
  acc += integrate_de(
             [&](double z) {
               // The odd remainder is O(z^3); below this floor it is pure
               // rounding noise and pow(z, -1-s) can overflow.
               if (z < 1e-12) return 0.0;
               const double a = F(gp + beta * z) + F(-gp + beta * z);
               return (a - slope0 * z) * std::pow(z, -1.0 - s);
             },
             0.0, r, 1e-12)
             .value;

  // Mid field: composite rule on the grid lattice out to the edge (continued
  // across periods for wrapped sheets), then the frozen-height tail.
  const int cells = res - 1;
  for (int side : {+1, -1}) {
    int m = (side > 0 ? res - 1 - i0 : i0) - k_core;
    double delta_tail;
    double r_tail;
    if (grid.periodic) {
      m += 8 * cells;
      const double mean =
          std::accumulate(g.begin(), g.end() - 1, 0.0) / cells;
      delta_tail = mean - gx;
      r_tail = (k_core + m) * h;
    } else {
      delta_tail = (side > 0 ? g.back() : g.front()) - gx;
      r_tail = (side > 0 ? res - 1 - i0 : i0) * h;
    }
    if (m >= 1) {
      const auto w = simpson_weights(static_cast<std::size_t>(m) + 1, h);
      for (int k = 0; k <= m; ++k) {
        int idx = i0 + side * (k_core + k);
        if (grid.periodic) {
          idx %= cells;
          if (idx < 0) idx += cells;
        }
        const double z = (k_core + k) * h;
        acc += w[static_cast<std::size_t>(k)] *
               F((g[static_cast<std::size_t>(idx)] - gx) / z) *
               std::pow(z, -1.0 - s);
      }
    }
    acc += frozen_graph_tail(F, delta_tail, r_tail, s);
  }

  return stack.parity(sheet) * (-s) * sigma * acc;
}

// ---------------------------------------------------------------------------
// hs_graph, dim-2 sheets (polar rays, bilinear samples)

struct RayFrame {
  double wx, wy;  // unit direction
};

double exit_radius(const GridSpec& grid, double x1, double x2,
                   const RayFrame& ray) {
  double t = kInf;
  if (ray.wx > 1e-15) t = std::min(t, (grid.extent - x1) / ray.wx);
  if (ray.wx < -1e-15) t = std::min(t, (-grid.extent - x1) / ray.wx);
  if (ray.wy > 1e-15) t = std::min(t, (grid.extent - x2) / ray.wy);
  if (ray.wy < -1e-15) t = std::min(t, (-grid.extent - x2) / ray.wy);
  return t;
}

double hs_graph_dim2(const SheetStack& stack, int sheet, std::size_t node,
                     const QuadratureSpec& spec) {
  const GridSpec& grid = stack.grid;
  const std::vector<double>& g = stack.sheets[static_cast<std::size_t>(sheet)].height;
  const int res = grid.resolution;
  const double h = grid.spacing();
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const int ix = static_cast<int>(node) / res;
  const int iy = static_cast<int>(node) % res;

  if (sheet_is_flat(g)) return 0.0;
  if (ix < 3 || ix > res - 4 || iy < 3 || iy > res - 4)
    throw BadDomain("evaluation node too close to the grid edge");

  const auto profile = profile_for(stack.params.n + s);
  const ProfileTable& F = *profile;
  const double x1 = grid.coord(ix), x2 = grid.coord(iy);
  const double gx = g[node];
  auto at = [&](int i, int j) {
    return g[static_cast<std::size_t>(i) * res + j];
  };
  const double d1 = (at(ix + 1, iy) - at(ix - 1, iy)) / (2.0 * h);
  const double d2 = (at(ix, iy + 1) - at(ix, iy - 1)) / (2.0 * h);
  if (d1 * d1 + d2 * d2 >= 1.0)
    throw BadDomain("sheet slope reaches 1; outside the graph regime");
  const double h11 = (at(ix + 1, iy) - 2.0 * gx + at(ix - 1, iy)) / (h * h);
  const double h22 = (at(ix, iy + 1) - 2.0 * gx + at(ix, iy - 1)) / (h * h);
  const double h12 = (at(ix + 1, iy + 1) - at(ix + 1, iy - 1) -
                      at(ix - 1, iy + 1) + at(ix - 1, iy - 1)) /
                     (4.0 * h * h);

  const int half_dirs = 32;
  const double dtheta = M_PI / half_dirs;
  double acc = 0.0;
  for (int k = 0; k < half_dirs; ++k) {
    const double theta = dtheta * (k + 0.5);
    const RayFrame ray{std::cos(theta), std::sin(theta)};
    const RayFrame anti{-ray.wx, -ray.wy};
    const double a = d1 * ray.wx + d2 * ray.wy;
    const double b = 0.5 * (h11 * ray.wx * ray.wx +
                            2.0 * h12 * ray.wx * ray.wy +
                            h22 * ray.wy * ray.wy);

    double r_plus, r_minus;
    if (grid.periodic) {
      r_plus = r_minus = 8.0 * grid.extent;
    } else {
      r_plus = exit_radius(grid, x1, x2, ray);
      r_minus = exit_radius(grid, x1, x2, anti);
    }
    const double r_min = std::min(r_plus, r_minus);
    double r0 = std::min(spec.r_core, 0.5 * r_min);
    r0 = std::max(r0, 1.2 * h);

    const double slope0 =
        2.0 * b * std::pow(1.0 + a * a, -0.5 * (stack.params.n + s));
    double dir_acc = slope0 * std::pow(r0, 1.0 - s) / (1.0 - s);
    dir_acc += integrate_de(
                   [&](double rho) {
                     if (rho < 1e-12) return 0.0;
                     const double sum = F(a + b * rho) + F(-a + b * rho);
                     return (sum - slope0 * rho) * std::pow(rho, -1.0 - s);
                   },
                   0.0, r0, 1e-11)
                   .value;

    for (int side : {+1, -1}) {
      const RayFrame& w = side > 0 ? ray : anti;
      const double r_edge = side > 0 ? r_plus : r_minus;
      const int m = std::max(2, static_cast<int>(std::ceil((r_edge - r0) /
                                                           (0.5 * h))));
      const double dr = (r_edge - r0) / m;
      const auto wts = simpson_weights(static_cast<std::size_t>(m) + 1, dr);
      for (int j = 0; j <= m; ++j) {
        const double rho = r0 + j * dr;
        const double gy = sheet_at(grid, g, x1 + rho * w.wx, x2 + rho * w.wy);
        dir_acc += wts[static_cast<std::size_t>(j)] * F((gy - gx) / rho) *
                   std::pow(rho, -1.0 - s);
      }
      const double g_exit =
          sheet_at(grid, g, x1 + r_edge * w.wx, x2 + r_edge * w.wy);
      dir_acc += frozen_graph_tail(F, g_exit - gx, r_edge, s);
    }
    acc += dtheta * dir_acc;
  }

  return stack.parity(sheet) * (-s) * sigma * acc;
}

// ---------------------------------------------------------------------------
// hs_cross

HsCross hs_cross_dim1(const SheetStack& stack, int i, std::size_t node, int j,
                      const QuadratureSpec& spec) {
  (void)spec;
  const GridSpec& grid = stack.grid;
  const std::vector<double>& gj = stack.sheets[static_cast<std::size_t>(j)].height;
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double c_ns = kernel_constants(stack.params).c_ns;
  const double gx = stack.sheets[static_cast<std::size_t>(i)].height[node];
  const double pj = stack.parity(j);

  double flat_level = 0.0;
  if (sheet_is_flat(gj, &flat_level)) {
    const double delta = flat_level - gx;
    HsCross out;
    out.signed_value = pj * sigma * c_ns *
                       std::copysign(std::pow(std::abs(delta), -s), delta);
    out.unsigned_column = sigma * c_ns * std::pow(std::abs(delta), -1.0 - s);
    return out;
  }

  const int res = grid.resolution;
  const double h = grid.spacing();
  const double x1 = grid.coord(static_cast<int>(node));
  const auto profile = profile_for(stack.params.n + s);
  const ProfileTable& F = *profile;
  const double P = stack.params.n + s;

  // slopes of the far sheet (centered; one-sided at the ends)
  std::vector<double> gp(static_cast<std::size_t>(res));
  for (int k = 0; k < res; ++k) {
    if (k == 0)
      gp[0] = (gj[1] - gj[0]) / h;
    else if (k == res - 1)
      gp[static_cast<std::size_t>(res - 1)] = (gj[res - 1] - gj[res - 2]) / h;
    else
      gp[static_cast<std::size_t>(k)] =
          (gj[static_cast<std::size_t>(k + 1)] - gj[static_cast<std::size_t>(k - 1)]) /
          (2.0 * h);
  }

  double sgn = 0.0, uns = 0.0;
  const int cells = res - 1;
  const int m = grid.periodic ? cells + 8 * cells : cells;
  const auto w = simpson_weights(static_cast<std::size_t>(m) + 1, h);
  const int k_start = grid.periodic ? -4 * cells : 0;
  for (int k = 0; k <= m; ++k) {
    int idx = k_start + k;
    double y1 = grid.coord(0) + (k_start + k) * h;
    if (grid.periodic) {
      idx %= cells;
      if (idx < 0) idx += cells;
    }
    const double dy = y1 - x1;
    const double dz = gj[static_cast<std::size_t>(idx)] - gx;
    const double k0 = std::pow(dy * dy + dz * dz, -0.5 * P);
    const double wk = w[static_cast<std::size_t>(k)];
    sgn += wk * (-gp[static_cast<std::size_t>(idx)] * dy + dz) * k0;
    uns += wk * std::sqrt(1.0 + gp[static_cast<std::size_t>(idx)] *
                                    gp[static_cast<std::size_t>(idx)]) *
           k0;
  }

  // lateral tails: frozen height, zero slope
  double left_edge = grid.coord(0) + k_start * h;
  double right_edge = left_edge + m * h;
  double mean = std::accumulate(gj.begin(), gj.end() - 1, 0.0) / cells;
  for (int side : {+1, -1}) {
    const double R = side > 0 ? right_edge - x1 : x1 - left_edge;
    const double delta =
        grid.periodic ? mean - gx
                      : (side > 0 ? gj.back() : gj.front()) - gx;
    const double c = std::abs(delta);
    if (c < 1e-300) continue;  // tail of a coincident frozen level is zero
    const double ray = ray_up_integral(F, c, R);
    sgn += delta * ray;
    uns += ray;
  }

  HsCross out;
  out.signed_value = pj * sigma * sgn;
  out.unsigned_column = sigma * uns;
  return out;
}

HsCross hs_cross_dim2(const SheetStack& stack, int i, std::size_t node, int j,
                      const QuadratureSpec& spec) {
  (void)spec;
  const GridSpec& grid = stack.grid;
  const std::vector<double>& gj = stack.sheets[static_cast<std::size_t>(j)].height;
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double c_ns = kernel_constants(stack.params).c_ns;
  const double gx = stack.sheets[static_cast<std::size_t>(i)].height[node];
  const double pj = stack.parity(j);

  double flat_level = 0.0;
  if (sheet_is_flat(gj, &flat_level)) {
    const double delta = flat_level - gx;
    HsCross out;
    out.signed_value = pj * sigma * c_ns *
                       std::copysign(std::pow(std::abs(delta), -s), delta);
    out.unsigned_column = sigma * c_ns * std::pow(std::abs(delta), -1.0 - s);
    return out;
  }

  const int res = grid.resolution;
  const double h = grid.spacing();
  const double P = stack.params.n + s;
  const int ix = static_cast<int>(node) / res;
  const int iy = static_cast<int>(node) % res;
  const double x1 = grid.coord(ix), x2 = grid.coord(iy);
  auto at = [&](int a, int b) {
    return gj[static_cast<std::size_t>(a) * res + b];
  };
  auto slope = [&](int a, int b, int axis) {
    const int lo = axis == 0 ? std::max(a - 1, 0) : a;
    const int hi = axis == 0 ? std::min(a + 1, res - 1) : a;
    const int lo2 = axis == 1 ? std::max(b - 1, 0) : b;
    const int hi2 = axis == 1 ? std::min(b + 1, res - 1) : b;
    const double span = axis == 0 ? (hi - lo) * h : (hi2 - lo2) * h;
    return (at(hi, hi2) - at(lo, lo2)) / span;
  };

  const int img = grid.periodic ? 4 : 0;
  const double period = 2.0 * grid.extent;
  double sgn = 0.0, uns = 0.0;
  double mean = 0.0;
  for (double v : gj) mean += v;
  mean /= gj.size();

  for (int mx = -img; mx <= img; ++mx) {
    for (int my = -img; my <= img; ++my) {
      const int lim = grid.periodic ? res - 1 : res;  // skip the seam copies
      for (int a = 0; a < lim; ++a) {
        for (int b = 0; b < lim; ++b) {
          const double y1 = grid.coord(a) + mx * period;
          const double y2 = grid.coord(b) + my * period;
          const double dy1 = y1 - x1, dy2 = y2 - x2;
          const double dz = at(a, b) - gx;
          const double r2 = dy1 * dy1 + dy2 * dy2 + dz * dz;
          const double k0 = std::pow(r2, -0.5 * P);
          const double s1 = slope(a, b, 0), s2 = slope(a, b, 1);
          sgn += (-s1 * dy1 - s2 * dy2 + dz) * k0;
          uns += std::sqrt(1.0 + s1 * s1 + s2 * s2) * k0;
        }
      }
    }
  }
  const double cell = h * h;
  sgn *= cell;
  uns *= cell;

  // annulus remainder beyond the sampled tile(s), frozen mean height
  const double covered =
      grid.periodic ? (2.0 * img + 1.0) * grid.extent : 2.0 * grid.extent / std::sqrt(M_PI);
  const double delta = mean - gx;
  const double tail_base =
      2.0 * M_PI *
      std::pow(covered * covered + delta * delta, -0.5 * (1.0 + s)) /
      (1.0 + s);
  sgn += delta * tail_base;
  uns += tail_base;

  HsCross out;
  out.signed_value = pj * sigma * sgn;
  out.unsigned_column = sigma * uns;
  return out;
}

// ---------------------------------------------------------------------------
// ext1 helpers (dim-1 lateral structure)

double ext1_dim1(const SheetStack& stack, const CylinderDomain& omega,
                 int sheet, std::size_t node, const QuadratureSpec& spec) {
  (void)spec;
  const GridSpec& grid = stack.grid;
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double rho = omega.horizontal_radius;
  const double x1 = grid.coord(static_cast<int>(node));
  const double gx = stack.sheets[static_cast<std::size_t>(sheet)].height[node];
  const auto profile = profile_for(stack.params.n + s);
  const ProfileTable& F = *profile;

  if (std::abs(x1) >= rho || gx <= omega.z_min || gx >= omega.z_max)
    throw BadDomain("evaluation point must lie inside the window");

  std::vector<Interval> bands;

  // window walls: n * (y - x) = rho -+ x1 * sign, constant along the wall
  double surface = 0.0;
  for (int side : {+1, -1}) {
    const double y1 = side * rho;
    const double c = std::abs(y1 - x1);
    column_intervals(column_at(stack, y1), true, omega.z_min, omega.z_max,
                     bands);
    surface += c * intervals_kernel_mass(F, c, bands, gx);
  }

  // window caps: the normal factor is the vertical offset, the kernel column
  // runs horizontally along the cap
  for (int side : {+1, -1}) {
    const double level = side > 0 ? omega.z_max : omega.z_min;
    const double dz = std::abs(level - gx);
    for (const auto& seg : detail::cap_segments_dim1(stack, level, rho))
      surface += dz * band_integral(F, dz, seg.lo - x1, seg.hi - x1);
  }

  // bulk: s * integral of the plain kernel over E outside the window
  double vspan = std::max(std::abs(omega.z_min - gx), std::abs(omega.z_max - gx));
  for (const auto& sh : stack.sheets)
    for (double z : sh.height) vspan = std::max(vspan, std::abs(z - gx));
  const double c1 = std::max(grid.extent, rho) + 4.0 + 8.0 * vspan;

  double bulk = 0.0;
  const int m_lat = 128;
  for (int side : {+1, -1}) {
    // integrate y1 from the wall outward to |y1 - x1| = c1
    const double y_start = side * rho;
    const double out_edge = x1 + side * c1;
    const double dr = std::abs(out_edge - y_start) / m_lat;
    const auto w = simpson_weights(m_lat + 1, dr);
    for (int k = 0; k <= m_lat; ++k) {
      const double y1 = y_start + side * k * dr;
      const double c = std::abs(y1 - x1);
      column_intervals(column_at(stack, y1), true, -kInf, kInf, bands);
      bulk += w[static_cast<std::size_t>(k)] *
              intervals_kernel_mass(F, c, bands, gx);
    }
    column_intervals(column_at(stack, out_edge), true, -kInf, kInf, bands);
    const FarMoments fm = far_moments(F, F.power(), bands, gx);
    bulk += far_remainder(F, 1, c1, fm);
  }

  const int m_cap = 256;
  const auto wcap = simpson_weights(m_cap + 1, 2.0 * rho / m_cap);
  for (int k = 0; k <= m_cap; ++k) {
    const double y1 = -rho + 2.0 * rho * k / m_cap;
    const ColumnCuts cuts = column_at(stack, y1);
    double mass = 0.0;
    column_intervals(cuts, true, omega.z_max, kInf, bands);
    mass += intervals_kernel_mass(F, std::abs(y1 - x1), bands, gx);
    column_intervals(cuts, true, -kInf, omega.z_min, bands);
    mass += intervals_kernel_mass(F, std::abs(y1 - x1), bands, gx);
    bulk += wcap[static_cast<std::size_t>(k)] * mass;
  }

  return sigma * (surface - s * bulk);
}

// ---------------------------------------------------------------------------
// ext1, dim-2 lateral structure

double ext1_dim2(const SheetStack& stack, const CylinderDomain& omega,
                 int sheet, std::size_t node, const QuadratureSpec& spec) {
  (void)spec;
  const GridSpec& grid = stack.grid;
  const double s = stack.params.s;
  const double sigma = stack.params.sigma();
  const double rho = omega.horizontal_radius;
  const int res = grid.resolution;
  const double x1 = grid.coord(static_cast<int>(node) / res);
  const double x2 = grid.coord(static_cast<int>(node) % res);
  const double gx = stack.sheets[static_cast<std::size_t>(sheet)].height[node];
  const auto profile = profile_for(stack.params.n + s);
  const ProfileTable& F = *profile;

  if (x1 * x1 + x2 * x2 >= rho * rho || gx <= omega.z_min || gx >= omega.z_max)
    throw BadDomain("evaluation point must lie inside the window");

  std::vector<Interval> bands;
  double vspan = std::max(std::abs(omega.z_min - gx), std::abs(omega.z_max - gx));
  for (const auto& sh : stack.sheets)
    for (double z : sh.height) vspan = std::max(vspan, std::abs(z - gx));
  const double c1 = std::max(grid.extent * std::sqrt(2.0), rho) + 4.0 + 8.0 * vspan;

  // lateral wall, angular rule
  double surface = 0.0;
  const int m_ang = 128;
  const double dphi = 2.0 * M_PI / m_ang;
  for (int k = 0; k < m_ang; ++k) {
    const double phi = dphi * k;
    const double w1 = std::cos(phi), w2 = std::sin(phi);
    const double y1 = rho * w1, y2 = rho * w2;
    const double c =
        std::sqrt((y1 - x1) * (y1 - x1) + (y2 - x2) * (y2 - x2));
    const double normal_dot = rho - (w1 * x1 + w2 * x2);
    column_intervals(column_at(stack, y1, y2), true, omega.z_min, omega.z_max,
                     bands);
    surface += dphi * rho * normal_dot * intervals_kernel_mass(F, c, bands, gx);
  }

  // caps: per ray from x', membership-change radii found by scan+bisection,
  // radial kernel pieces in closed form
  const double P = F.power();
  auto radial_piece = [&](double dz, double r_lo, double r_hi) {
    auto G = [&](double r) {
      return -std::pow(r * r + dz * dz, 1.0 - 0.5 * P) / (P - 2.0);
    };
    return G(r_hi) - G(r_lo);
  };
  const int m_ray = 64;
  for (int side : {+1, -1}) {
    const double level = side > 0 ? omega.z_max : omega.z_min;
    const double dz = std::abs(level - gx);
    for (int k = 0; k < m_ray; ++k) {
      const double phi = 2.0 * M_PI * (k + 0.5) / m_ray;
      const double w1 = std::cos(phi), w2 = std::sin(phi);
      const double proj = x1 * w1 + x2 * w2;
      const double t_exit =
          -proj + std::sqrt(std::max(rho * rho - (x1 * x1 + x2 * x2) +
                                         proj * proj,
                                     0.0));
      auto member = [&](double t) {
        return detail::column_in_e(
            column_at(stack, x1 + t * w1, x2 + t * w2), level);
      };
      const int scan = 48;
      double a = 0.0;
      bool open = member(1e-9 * t_exit);
      double seg_lo = 0.0;
      double acc = 0.0;
      for (int q = 1; q <= scan; ++q) {
        const double b = t_exit * q / scan;
        const bool mb = member(b);
        if (mb != open) {
          double lo = a, hi = b;
          for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            (member(mid) == open ? lo : hi) = mid;
          }
          const double cross = 0.5 * (lo + hi);
          if (open) acc += radial_piece(dz, seg_lo, cross);
          else
            seg_lo = cross;
          open = mb;
        }
        a = b;
      }
      if (open) acc += radial_piece(dz, seg_lo, t_exit);
      surface += (2.0 * M_PI / m_ray) * dz * acc;
    }
  }

  // bulk, lateral part: polar around the axis
  double bulk = 0.0;
  const int m_rad = 64;
  for (int k = 0; k < m_ang; ++k) {
    const double phi = dphi * k;
    const double w1 = std::cos(phi), w2 = std::sin(phi);
    const double dr = (c1 - rho) / m_rad;
    const auto w = simpson_weights(m_rad + 1, dr);
    double angular = 0.0;
    for (int q = 0; q <= m_rad; ++q) {
      const double r = rho + q * dr;
      const double y1 = r * w1, y2 = r * w2;
      const double c =
          std::sqrt((y1 - x1) * (y1 - x1) + (y2 - x2) * (y2 - x2));
      column_intervals(column_at(stack, y1, y2), true, -kInf, kInf, bands);
      angular += w[static_cast<std::size_t>(q)] * r *
                 intervals_kernel_mass(F, c, bands, gx);
    }
    bulk += dphi * angular;
    column_intervals(column_at(stack, c1 * w1, c1 * w2), true, -kInf, kInf,
                     bands);
    const FarMoments fm = far_moments(F, P, bands, gx);
    const double shift = x1 * w1 + x2 * w2;
    bulk += dphi * (far_remainder(F, 2, c1 - shift, fm) +
                    shift * far_remainder(F, 1, c1 - shift, fm));
  }

  // bulk, beyond the caps inside the disc
  const int m_cap_ang = 64, m_cap_rad = 48;
  for (int k = 0; k < m_cap_ang; ++k) {
    const double phi = 2.0 * M_PI * (k + 0.5) / m_cap_ang;
    const double w1 = std::cos(phi), w2 = std::sin(phi);
    const double proj = x1 * w1 + x2 * w2;
    const double t_exit =
        -proj + std::sqrt(std::max(
                    rho * rho - (x1 * x1 + x2 * x2) + proj * proj, 0.0));
    const double dr = t_exit / m_cap_rad;
    const auto w = simpson_weights(m_cap_rad + 1, dr);
    double angular = 0.0;
    for (int q = 0; q <= m_cap_rad; ++q) {
      const double r = q * dr;
      const ColumnCuts cuts = column_at(stack, x1 + r * w1, x2 + r * w2);
      double mass = 0.0;
      column_intervals(cuts, true, omega.z_max, kInf, bands);
      mass += intervals_kernel_mass(F, r, bands, gx);
      column_intervals(cuts, true, -kInf, omega.z_min, bands);
      mass += intervals_kernel_mass(F, r, bands, gx);
      angular += w[static_cast<std::size_t>(q)] * r * mass;
    }
    bulk += (2.0 * M_PI / m_cap_ang) * angular;
  }

  return sigma * (surface - s * bulk);
}

}  // namespace

// ---------------------------------------------------------------------------
// public operators

void CylinderDomain::validate() const {
  if (!(horizontal_radius > 0.0) || !std::isfinite(horizontal_radius))
    throw ConfigInvalid("window radius must be positive");
  if (!(z_min < z_max) || !std::isfinite(z_min) || !std::isfinite(z_max))
    throw ConfigInvalid("window must satisfy z_min < z_max");
}

double hs_graph(const SheetStack& stack, int sheet, std::size_t node,
                const QuadratureSpec& spec) {
  require_dim_supported(stack);
  require_sheet_node(stack, sheet, node);
  spec.validate();
  return stack.grid.dim == 1 ? hs_graph_dim1(stack, sheet, node, spec)
                             : hs_graph_dim2(stack, sheet, node, spec);
}

HsCross hs_cross(const SheetStack& stack, int i, std::size_t node, int j,
                 const QuadratureSpec& spec) {
  require_dim_supported(stack);
  require_sheet_node(stack, i, node);
  require_sheet_node(stack, j, 0);
  if (i == j) throw BadDomain("cross terms need two distinct sheets");
  spec.validate();
  return stack.grid.dim == 1 ? hs_cross_dim1(stack, i, node, j, spec)
                             : hs_cross_dim2(stack, i, node, j, spec);
}

double hk_curvature(const SheetStack& stack, int sheet, std::size_t node,
                    const QuadratureSpec& spec) {
  double total = hs_graph(stack, sheet, node, spec);
  for (int j = 0; j < static_cast<int>(stack.n_sheets()); ++j) {
    if (j == sheet) continue;
    total += hs_cross(stack, sheet, node, j, spec).signed_value;
  }
  return (4.0 / stack.params.s) * total;
}

double ext1(const SheetStack& stack, const CylinderDomain& omega, int sheet,
            std::size_t node, const QuadratureSpec& spec) {
  require_dim_supported(stack);
  require_sheet_node(stack, sheet, node);
  omega.validate();
  spec.validate();
  if (omega.horizontal_radius > stack.grid.extent && !stack.grid.periodic) {
    // the window reaches horizontal ground the grid does not cover; the
    // constant extension is not a statement about the surface inside omega
    if (omega.horizontal_radius > stack.grid.extent * (1.0 + 1e-12))
      throw ExtensionRuleMissing(
          "window radius exceeds the sampled extent of the sheets");
  }
  return stack.grid.dim == 1 ? ext1_dim1(stack, omega, sheet, node, spec)
                             : ext1_dim2(stack, omega, sheet, node, spec);
}

double interaction_prediction(const SheetStack& stack, int sheet,
                              std::size_t node) {
  require_sheet_node(stack, sheet, node);
  const double sigma = stack.params.sigma();
  const double gi = stack.sheets[static_cast<std::size_t>(sheet)].height[node];
  double acc = 0.0;
  for (int j = 0; j < static_cast<int>(stack.n_sheets()); ++j) {
    if (j == sheet) continue;
    const double gap =
        std::abs(stack.sheets[static_cast<std::size_t>(j)].height[node] - gi);
    if (!(gap > 0.0)) throw OrderingViolated("sheets touch at the node");
    const double sign_alt = ((j - sheet) % 2 == 0) ? 1.0 : -1.0;
    acc += (j > sheet ? sign_alt : -sign_alt) / gap;
  }
  return stack.parity(sheet) * 2.0 * sigma * acc;
}

PerturbationField plateau_field(const SheetStack& stack, double core_radius,
                                double support_radius,
                                const std::vector<double>& sheet_amplitude) {
  if (!(core_radius > 0.0) || !(support_radius > core_radius))
    throw ConfigInvalid("plateau needs 0 < core < support");
  if (sheet_amplitude.size() != stack.sheets.size())
    throw ConfigInvalid("one amplitude per sheet required");
  const GridSpec& grid = stack.grid;
  PerturbationField field;
  field.support_radius = support_radius;
  field.eta.resize(stack.sheets.size());
  auto profile = [&](double r) {
    if (r <= core_radius) return 1.0;
    if (r >= support_radius) return 0.0;
    const double t = (r - core_radius) / (support_radius - core_radius);
    const double c = std::cos(0.5 * M_PI * t);
    return c * c;
  };
  for (std::size_t k = 0; k < stack.sheets.size(); ++k) {
    auto& values = field.eta[k];
    values.resize(grid.node_count());
    for (std::size_t idx = 0; idx < grid.node_count(); ++idx) {
      double r;
      if (grid.dim == 1) {
        r = std::abs(grid.coord(static_cast<int>(idx)));
      } else {
        const double a = grid.coord(static_cast<int>(idx) / grid.resolution);
        const double b = grid.coord(static_cast<int>(idx) % grid.resolution);
        r = std::hypot(a, b);
      }
      values[idx] = sheet_amplitude[k] * profile(r);
    }
  }
  return field;
}

std::string to_json_string(const StabilityReport& report) {
  nlohmann::ordered_json j;
  j["lhs_interaction"] = report.lhs_interaction;
  j["rhs_dirichlet"] = report.rhs_dirichlet;
  j["ext2"] = report.ext2;
  j["margin"] = report.margin;
  return j.dump(2);
}

}  // namespace fracmin
