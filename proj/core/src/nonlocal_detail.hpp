#pragma once

// Shared internals of the nonlocal operators: extension-aware sheet
// sampling, vertical column structure of the layered set E, and closed-form
// column integrals against (c^2 + u^2)^{-P/2} kernels. Everything here works
// in "column coordinates": a vertical line at horizontal distance c from the
// evaluation point, cut by the (extended) sheets into E / E^c intervals.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "fracmin/errors.hpp"
#include "fracmin/geometry.hpp"
#include "fracmin/kernel.hpp"

namespace fracmin {
namespace detail {

// ---------------------------------------------------------------------------
// threading

inline int thread_count() {
  static const int cached = [] {
    if (const char* env = std::getenv("FRACMIN_THREADS")) {
      const int k = std::atoi(env);
      if (k >= 1) return std::min(k, 256);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw != 0 ? static_cast<int>(std::min(hw, 16u)) : 1;
  }();
  return cached;
}

// Deterministic parallel loop: body(i) must write its result into a slot
// owned by i (never accumulate shared state), so the caller's serial
// reduction gives bit-identical results for any thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const int threads = thread_count();
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads) - 1);
  for (int t = 0; t < threads - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// kernel profile cache

// ProfileTable construction costs ~ms; the operators share tables keyed by
// the kernel power (n+s and n+s+2 for each parameter set in play).
inline std::shared_ptr<const ProfileTable> profile_for(double power) {
  static std::mutex mu;
  static std::map<double, std::shared_ptr<const ProfileTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(power);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<const ProfileTable>(power);
  cache.emplace(power, table);
  return table;
}

// ---------------------------------------------------------------------------
// quadrature weight helpers

// Composite Simpson weights for samples y_0..y_m at spacing h (m intervals).
// Odd m gets a 3/8 block on the last three intervals; m == 1 degrades to
// the trapezoid rule.
inline std::vector<double> simpson_weights(std::size_t count, double h) {
  std::vector<double> w(count, 0.0);
  if (count < 2) return w;
  const std::size_t m = count - 1;
  if (m == 1) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  std::size_t simpson_end = (m % 2 == 0) ? m : m - 3;
  for (std::size_t k = 0; k + 2 <= simpson_end; k += 2) {
    w[k] += h / 3.0;
    w[k + 1] += 4.0 * h / 3.0;
    w[k + 2] += h / 3.0;
  }
  if (m % 2 != 0) {
    if (m == 3) simpson_end = 0;
    const std::size_t b = simpson_end;
    w[b] += 3.0 * h / 8.0;
    w[b + 1] += 9.0 * h / 8.0;
    w[b + 2] += 9.0 * h / 8.0;
    w[b + 3] += 3.0 * h / 8.0;
  }
  return w;
}

// Gauss-Legendre nodes/weights on (0,1), fixed order 12. Values frozen from
// the standard table (symmetric pairs stored explicitly).
struct Gauss12 {
  static const std::array<double, 12>& nodes() {
    static const std::array<double, 12> x = {
        0.009219682876640375, 0.047941371814762574, 0.11504866290284765,
        0.20634102285669128,  0.31608425050090994,  0.43738329574426554,
        0.5626167042557344,   0.6839157494990901,   0.7936589771433087,
        0.8849513370971523,   0.9520586281852374,   0.9907803171233596};
    return x;
  }
  static const std::array<double, 12>& weights() {
    static const std::array<double, 12> w = {
        0.023587668193255914, 0.05346966299765922, 0.08003916427167311,
        0.10158371336153296,  0.11674626826917742, 0.1245735229067014,
        0.1245735229067014,   0.11674626826917742, 0.10158371336153296,
        0.08003916427167311,  0.05346966299765922, 0.023587668193255914};
    return w;
  }
};

// ---------------------------------------------------------------------------
// extension-aware sheet sampling

inline double wrap_coord(const GridSpec& grid, double x) {
  const double period = 2.0 * grid.extent;
  double u = x + grid.extent;
  u -= period * std::floor(u / period);
  return u - grid.extent;
}

inline double lateral_coord(const GridSpec& grid, double x) {
  return grid.periodic ? wrap_coord(grid, x)
                       : std::clamp(x, -grid.extent, grid.extent);
}

// Linear interpolation of a dim-1 sheet at an arbitrary (extended) abscissa.
inline double sheet_at(const GridSpec& grid, const std::vector<double>& h,
                       double x) {
  const double u = lateral_coord(grid, x);
  const double t = (u + grid.extent) / grid.spacing();
  int i = static_cast<int>(std::floor(t));
  i = std::clamp(i, 0, grid.resolution - 2);
  const double w = t - i;
  return h[static_cast<std::size_t>(i)] * (1.0 - w) +
         h[static_cast<std::size_t>(i) + 1] * w;
}

// Bilinear interpolation of a dim-2 sheet.
inline double sheet_at(const GridSpec& grid, const std::vector<double>& h,
                       double x1, double x2) {
  const double u1 = lateral_coord(grid, x1);
  const double u2 = lateral_coord(grid, x2);
  const double sp = grid.spacing();
  const int res = grid.resolution;
  double t1 = (u1 + grid.extent) / sp;
  double t2 = (u2 + grid.extent) / sp;
  int i = std::clamp(static_cast<int>(std::floor(t1)), 0, res - 2);
  int j = std::clamp(static_cast<int>(std::floor(t2)), 0, res - 2);
  const double a = t1 - i, b = t2 - j;
  auto at = [&](int ii, int jj) {
    return h[static_cast<std::size_t>(ii) * res + jj];
  };
  return (1 - a) * ((1 - b) * at(i, j) + b * at(i, j + 1)) +
         a * ((1 - b) * at(i + 1, j) + b * at(i + 1, j + 1));
}

// ---------------------------------------------------------------------------
// column structure

// Heights of all sheets over one horizontal point, plus the membership of
// the bottom unbounded region. Region r (0 = below everything) alternates
// membership upward.
struct ColumnCuts {
  std::vector<double> z;
  bool bottom_in_e = false;
};

inline ColumnCuts column_at(const SheetStack& stack, double y1) {
  ColumnCuts c;
  c.z.reserve(stack.sheets.size());
  for (const auto& sh : stack.sheets)
    c.z.push_back(sheet_at(stack.grid, sh.height, y1));
  c.bottom_in_e = stack.parity(0) == +1;
  return c;
}

inline ColumnCuts column_at(const SheetStack& stack, double y1, double y2) {
  ColumnCuts c;
  c.z.reserve(stack.sheets.size());
  for (const auto& sh : stack.sheets)
    c.z.push_back(sheet_at(stack.grid, sh.height, y1, y2));
  c.bottom_in_e = stack.parity(0) == +1;
  return c;
}

inline bool column_in_e(const ColumnCuts& c, double z) {
  std::size_t below = 0;
  while (below < c.z.size() && c.z[below] < z) ++below;
  const bool odd = (below % 2) != 0;
  return c.bottom_in_e != odd;  // XOR: membership flips at every sheet
}

struct Interval {
  double lo = 0.0, hi = 0.0;  // may be +-infinity
};

// E (or E^c) intervals of the column clipped to (lo, hi).
inline void column_intervals(const ColumnCuts& c, bool want_e, double lo,
                             double hi, std::vector<Interval>& out) {
  out.clear();
  const std::size_t n = c.z.size();
  bool member = c.bottom_in_e == want_e;
  double a = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r <= n; ++r) {
    const double b =
        (r < n) ? c.z[r] : std::numeric_limits<double>::infinity();
    if (member) {
      const double ca = std::max(a, lo), cb = std::min(b, hi);
      if (ca < cb) out.push_back({ca, cb});
    }
    member = !member;
    a = b;
  }
}

// ---------------------------------------------------------------------------
// closed-form column integrals

// I(c; a, b) = integral_a^b (c^2 + u^2)^{-P/2} du, via the tabulated odd
// antiderivative. Stable in the three regimes: generic c, both endpoints in
// the far tail (series differences avoid cancellation), and the degenerate
// column c ~ 0 with 0 outside (a,b).
inline double band_integral(const ProfileTable& table, double c, double a,
                            double b) {
  if (!(a < b)) return 0.0;
  const double P = table.power();
  const double m = std::max(std::abs(a), std::abs(b));
  if (m <= 0.0) return 0.0;
  if (c < 1e-13 * m || c < 1e-290) {
    if (a < 0.0 && b > 0.0)
      throw QuadratureFailure("column integral across the singular axis");
    auto prim = [&](double u) {
      if (std::isinf(u)) return std::copysign(0.0, u) * 0.0;  // limit is 0
      return std::copysign(std::pow(std::abs(u), 1.0 - P), u) / (1.0 - P);
    };
    return prim(b) - prim(a);
  }
  const double ta = a / c, tb = b / c;
  double diff;
  if (ta >= 8.0)
    diff = table.tail_beyond(ta) - (std::isinf(tb) ? 0.0 : table.tail_beyond(tb));
  else if (tb <= -8.0)
    diff = table.tail_beyond(-tb) - (std::isinf(ta) ? 0.0 : table.tail_beyond(-ta));
  else if (std::isinf(tb))
    diff = table.tail_beyond(std::max(ta, 0.0)) +
           (ta < 0.0 ? table(0.0) - table(ta) : table(std::max(ta, 0.0)) - table(ta));
  else if (std::isinf(ta))
    diff = table.tail_beyond(std::max(-tb, 0.0)) +
           (tb > 0.0 ? table(tb) - table(0.0) : 0.0);
  else
    diff = table(tb) - table(ta);
  return std::pow(c, 1.0 - P) * diff;
}

// integral_a^inf (c^2+u^2)^{-P/2} du
inline double ray_up_integral(const ProfileTable& table, double c, double a) {
  const double P = table.power();
  if (c < 1e-13 * std::max(std::abs(a), 1e-280) || c < 1e-290) {
    if (a <= 0.0)
      throw QuadratureFailure("ray integral through the singular axis");
    return std::pow(a, 1.0 - P) / (P - 1.0);
  }
  const double t = a / c;
  const double base = std::pow(c, 1.0 - P);
  if (t >= 8.0) return base * table.tail_beyond(t);
  return base * (table.infinity() - table(t));
}

inline double ray_down_integral(const ProfileTable& table, double c,
                                double b) {
  return ray_up_integral(table, c, -b);
}

// Sum of column integrals of (c^2+u^2)^{-P/2} over a clipped interval list,
// endpoints relative to the evaluation height.
inline double intervals_kernel_mass(const ProfileTable& table, double c,
                                    const std::vector<Interval>& bands,
                                    double z_ref) {
  double total = 0.0;
  for (const auto& iv : bands) {
    const bool lo_inf = std::isinf(iv.lo);
    const bool hi_inf = std::isinf(iv.hi);
    if (lo_inf && hi_inf) {
      // full line: 2 * ray from 0
      total += 2.0 * ray_up_integral(table, c, 0.0);
    } else if (lo_inf) {
      total += ray_down_integral(table, c, iv.hi - z_ref);
    } else if (hi_inf) {
      total += ray_up_integral(table, c, iv.lo - z_ref);
    } else {
      total += band_integral(table, c, iv.lo - z_ref, iv.hi - z_ref);
    }
  }
  return total;
}

// Two-plus-one term far remainder: integral_{C1}^inf c^{d-1} * v(c) dc for a
// column-mass profile v(c) = c^{1-P} (R * Finf + S1/c + S3/c^3), where R
// counts rays, S1 collects linear moments, S3 the cubic correction of the
// profile series. d is the horizontal dimension (1 or 2).
struct FarMoments {
  double rays = 0.0;
  double s1 = 0.0;
  double s3 = 0.0;
};

// Moments of a fixed far-column structure, endpoints relative to z_ref.
inline FarMoments far_moments(const ProfileTable& table, double P,
                              const std::vector<Interval>& bands,
                              double z_ref) {
  (void)table;
  FarMoments fm;
  for (const auto& iv : bands) {
    const bool lo_inf = std::isinf(iv.lo);
    const bool hi_inf = std::isinf(iv.hi);
    const double a = lo_inf ? 0.0 : iv.lo - z_ref;
    const double b = hi_inf ? 0.0 : iv.hi - z_ref;
    if (lo_inf && hi_inf) {
      fm.rays += 2.0;
    } else if (lo_inf) {
      fm.rays += 1.0;
      fm.s1 += b;
      fm.s3 += P * (-b) * (-b) * (-b) / 6.0;
    } else if (hi_inf) {
      fm.rays += 1.0;
      fm.s1 -= a;
      fm.s3 += P * a * a * a / 6.0;
    } else {
      fm.s1 += (b - a);
      fm.s3 -= P * (b * b * b - a * a * a) / 6.0;
    }
  }
  return fm;
}

inline double far_remainder(const ProfileTable& table, int d, double c1,
                            const FarMoments& fm) {
  const double P = table.power();
  const double finf = table.infinity();
  // integral_{C1}^inf c^{d-1} c^{1-P} c^{-k} dc = C1^{d+1-P-k} / (P+k-1-d)
  auto piece = [&](double coef, int k) {
    const double expo = P + k - 1.0 - d;
    if (coef == 0.0) return 0.0;
    return coef * std::pow(c1, -expo) / expo;
  };
  return piece(fm.rays * finf, 0) + piece(fm.s1, 1) + piece(fm.s3, 3);
}

// Membership segments of the horizontal line z = level inside |y1| < rho,
// located by a scan over a fine lattice plus bisection on the membership
// predicate. Sheets are continuous, so flips are isolated points.
inline std::vector<Interval> cap_segments_dim1(const SheetStack& stack,
                                               double level, double rho) {
  auto member = [&](double y1) {
    return column_in_e(column_at(stack, y1), level);
  };
  const int scan = 1024;
  std::vector<Interval> segs;
  double a = -rho;
  bool open = member(a);
  double start = open ? a : 0.0;
  for (int k = 1; k <= scan; ++k) {
    const double b = -rho + 2.0 * rho * k / scan;
    const bool mb = member(b);
    if (mb != open) {
      double lo = a, hi = b;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (member(mid) == open ? lo : hi) = mid;
      }
      const double cross = 0.5 * (lo + hi);
      if (open)
        segs.push_back({start, cross});
      else
        start = cross;
      open = mb;
    }
    a = b;
  }
  if (open) segs.push_back({start, rho});
  return segs;
}

// ---------------------------------------------------------------------------
// vertical first-moment column integrals (for the gradient-kernel term)

// G(u) = (c^2+u^2)^{-(P-2)/2} / (P-2) is an antiderivative of
// -u (c^2+u^2)^{-P/2}; integral_a^b (z_ref - t) (c^2+(t-z_ref)^2)^{-P/2} dt
// = G(b') - G(a') with primed endpoints relative to z_ref.
inline double moment_g(double c, double u, double P) {
  if (std::isinf(u)) return 0.0;
  const double r2 = c * c + u * u;
  if (r2 < 1e-280) throw QuadratureFailure("first moment through the axis");
  return std::pow(r2, -0.5 * (P - 2.0)) / (P - 2.0);
}

inline double intervals_vertical_moment(double c,
                                        const std::vector<Interval>& bands,
                                        double z_ref, double P) {
  double total = 0.0;
  for (const auto& iv : bands) {
    const double a = std::isinf(iv.lo) ? iv.lo : iv.lo - z_ref;
    const double b = std::isinf(iv.hi) ? iv.hi : iv.hi - z_ref;
    total += moment_g(c, b, P) - moment_g(c, a, P);
  }
  return total;
}

}  // namespace detail
}  // namespace fracmin
