#include "fracmin/slab.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "fracmin/errors.hpp"
#include "fracmin/geometry.hpp"
#include "nonlocal_detail.hpp"

namespace fracmin {

// ---------------------------------------------------------------------------
// pattern plumbing

void SlabPattern::validate() const {
  params.validate();
  if (breakpoints.empty())
    throw InvalidParams("slab pattern needs at least one breakpoint");
  for (std::size_t j = 1; j < breakpoints.size(); ++j)
    if (!(breakpoints[j - 1] < breakpoints[j]))
      throw OrderingViolated("slab breakpoints must increase strictly");
  if (periodic_cell) {
    if (!(*periodic_cell > 0.0))
      throw ConfigInvalid("period length must be positive");
    if (!(breakpoints.back() - breakpoints.front() < *periodic_cell))
      throw ConfigInvalid("breakpoints must fit inside one period");
    if (breakpoints.size() % 2 != 0)
      throw ConfigInvalid("periodic tiling needs an even breakpoint count");
  }
  if (c_star && !(*c_star > 0.0))
    throw ConfigInvalid("c_star must be positive");
}

SlabPattern ladder_pattern(const FractionalParams& params, double c_star,
                           int count) {
  if (count < 2 || count % 2 != 0)
    throw ConfigInvalid("ladder needs an even breakpoint count >= 2");
  if (!(c_star > 0.0)) throw ConfigInvalid("c_star must be positive");
  SlabPattern pattern;
  pattern.params = params;
  const double w = c_star * std::sqrt(params.sigma());
  pattern.breakpoints.resize(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) pattern.breakpoints[k] = k * w;
  pattern.periodic_cell = count * w;
  pattern.c_star = c_star;
  pattern.validate();
  return pattern;
}

int SlabProfile::value(double t) const {
  const auto& bp = pattern.breakpoints;
  double u = t;
  if (pattern.periodic_cell) {
    const double L = *pattern.periodic_cell;
    u = bp.front() + std::fmod(t - bp.front(), L);
    if (u < bp.front()) u += L;
  }
  const auto flips = std::upper_bound(bp.begin(), bp.end(), u) - bp.begin();
  return (flips % 2 == 0) ? +1 : -1;
}

SlabProfile slab_reduce(const SlabPattern& pattern) {
  pattern.validate();
  return SlabProfile{pattern, c_ns(pattern.params)};
}

// ---------------------------------------------------------------------------
// curvature at a breakpoint

namespace {

// One side of the principal value: sum over the breakpoints at increasing
// distance r_1 < r_2 < ... from the evaluation point of (-1)^i r_i^{-s}.
// Telescoping the interval-exact antiderivative of u(t) |t-x|^{-1-s} leaves
// exactly this sum (times 2/s and the value of u adjacent to x); the
// divergent boundary terms at x cancel between the two sides.
double side_sum_finite(const std::vector<double>& distances, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double term = std::pow(distances[i], -s);
    acc += (i % 2 == 0) ? -term : term;  // i = 0 is the nearest, sign -1
  }
  return acc;
}

// Periodic side: every breakpoint class contributes offsets d + mL, m >= 0,
// and the per-class sum continues to L^-s zeta(s, d/L). The count per cell
// is even, so signs repeat across cells and the class signs alternate with
// the sorted base offsets. Each zeta value is the analytic continuation
// (s < 1); only the alternating combination is a convergent series.
double side_sum_periodic(std::vector<double> offsets, double L, double s) {
  std::sort(offsets.begin(), offsets.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const double term = std::pow(L, -s) * hurwitz_zeta(s, offsets[i] / L);
    acc += (i % 2 == 0) ? -term : term;
  }
  return acc;
}

// distance from x to the periodic images of a, folded into (0, L]
double fold_up(double a, double x, double L) {
  double d = std::fmod(a - x, L);
  if (d <= 0.0) d += L;
  return d;
}

}  // namespace

double slab_hs_1d(const SlabPattern& pattern, std::size_t boundary,
                  const QuadratureSpec& spec) {
  pattern.validate();
  spec.validate();
  const auto& bp = pattern.breakpoints;
  if (boundary >= bp.size())
    throw ConfigInvalid("boundary index outside the pattern");
  const double s = pattern.params.s;
  const double x = bp[boundary];

  double up = 0.0, down = 0.0;
  if (pattern.periodic_cell) {
    const double L = *pattern.periodic_cell;
    std::vector<double> up_off(bp.size()), down_off(bp.size());
    for (std::size_t j = 0; j < bp.size(); ++j) {
      up_off[j] = fold_up(bp[j], x, L);
      down_off[j] = fold_up(-bp[j], -x, L);
    }
    up = side_sum_periodic(std::move(up_off), L, s);
    down = side_sum_periodic(std::move(down_off), L, s);
  } else {
    std::vector<double> above, below;
    for (std::size_t j = boundary + 1; j < bp.size(); ++j)
      above.push_back(bp[j] - x);
    for (std::size_t j = boundary; j-- > 0;) below.push_back(x - bp[j]);
    up = side_sum_finite(above, s);
    down = side_sum_finite(below, s);
  }

  // u just above the k-th breakpoint is (-1)^(k+1): +1 below the pattern,
  // one flip per crossing
  const double v0 = (boundary % 2 == 0) ? -1.0 : 1.0;
  const double pv = v0 * (2.0 / s) * (up - down);
  return pattern.params.sigma() * c_ns(pattern.params) * pv;
}

// ---------------------------------------------------------------------------
// stability scan

namespace {

constexpr int kScanSheets = 6;

SheetStack scan_stack(double sigma, double spacing,
                      const CylinderDomain& omega) {
  const FractionalParams p{2, 1.0 - sigma};
  const GridSpec grid{1, omega.horizontal_radius, 257, false};
  std::vector<GraphSheet> sheets(kScanSheets);
  for (int k = 0; k < kScanSheets; ++k) {
    const double z = (k - (kScanSheets - 1) / 2.0) * spacing;
    sheets[k].height.assign(grid.node_count(), z);
  }
  return build_stack(grid, p, std::move(sheets), +1);
}

PerturbationField mode_field(const SheetStack& stack, const PlateauMode& m) {
  std::vector<double> amp(stack.sheets.size(), 1.0);
  if (m.alternating)
    for (std::size_t i = 1; i < amp.size(); i += 2) amp[i] = -1.0;
  return plateau_field(stack, m.core_radius, m.support_radius, amp);
}

// minimal margin over the mode family, with the attaining mode id
std::pair<double, int> min_margin_at(double sigma, double spacing,
                                     const std::vector<PlateauMode>& modes,
                                     const CylinderDomain& omega,
                                     const QuadratureSpec& spec) {
  const SheetStack stack = scan_stack(sigma, spacing, omega);
  std::vector<double> margin(modes.size(), 0.0);
  detail::parallel_for(modes.size(), [&](std::size_t i) {
    margin[i] = stability_form(stack, mode_field(stack, modes[i]), omega, spec)
                    .margin;
  });
  int worst = 0;
  for (std::size_t i = 1; i < margin.size(); ++i)
    if (margin[i] < margin[worst]) worst = static_cast<int>(i);
  return {margin[worst], worst};
}

}  // namespace

std::vector<PlateauMode> default_mode_family(const CylinderDomain& omega) {
  omega.validate();
  const double rho = omega.horizontal_radius;
  std::vector<PlateauMode> family;
  for (double core : {0.35, 0.55, 0.75})
    for (bool alternating : {false, true})
      family.push_back({core * rho, 0.85 * rho, alternating});
  return family;
}

StabilityScan slab_stability_scan(double sigma,
                                  const std::vector<double>& spacing_grid,
                                  const std::vector<PlateauMode>& modes,
                                  const CylinderDomain& omega,
                                  const QuadratureSpec& spec) {
  FractionalParams{2, 1.0 - sigma}.validate();
  omega.validate();
  spec.validate();
  if (spacing_grid.size() < 2)
    throw ConfigInvalid("spacing grid needs at least two entries");
  if (!(spacing_grid.front() > 0.0))
    throw ConfigInvalid("spacings must be positive");
  for (std::size_t i = 1; i < spacing_grid.size(); ++i)
    if (!(spacing_grid[i - 1] < spacing_grid[i]))
      throw ConfigInvalid("spacing grid must increase strictly");
  if (modes.empty()) throw ConfigInvalid("mode family must not be empty");
  for (const auto& m : modes)
    if (!(m.core_radius > 0.0) || !(m.core_radius < m.support_radius))
      throw ConfigInvalid("mode radii must satisfy 0 < core < support");

  StabilityScan scan;
  scan.rows.resize(spacing_grid.size());
  for (std::size_t i = 0; i < spacing_grid.size(); ++i) {
    const auto [mm, worst] =
        min_margin_at(sigma, spacing_grid[i], modes, omega, spec);
    scan.rows[i] = {sigma, spacing_grid[i], mm, worst};
  }

  std::size_t first_stable = spacing_grid.size();
  for (std::size_t i = 0; i < scan.rows.size(); ++i)
    if (scan.rows[i].min_margin >= 0.0) {
      first_stable = i;
      break;
    }
  if (first_stable == spacing_grid.size())
    throw NoSignChange("minimal margin stays negative over the spacing grid");
  if (first_stable == 0)
    throw NoSignChange(
        "minimal margin is already nonnegative at the smallest spacing");

  double lo = spacing_grid[first_stable - 1];
  double hi = spacing_grid[first_stable];
  while (hi - lo > 1e-3 * hi) {
    const double mid = 0.5 * (lo + hi);
    const auto [mm, worst] = min_margin_at(sigma, mid, modes, omega, spec);
    (mm >= 0.0 ? hi : lo) = mid;
  }
  scan.d_star = hi;

  const SheetStack at_threshold = scan_stack(sigma, scan.d_star, omega);
  const double h = at_threshold.grid.spacing();
  const double per_node = (kScanSheets - 1) * h / (scan.d_star * scan.d_star);
  scan.l2_observable = sigma * per_node * at_threshold.grid.node_count();
  scan.gap_bound =
      am_hm_bound(std::vector<double>(kScanSheets - 1, scan.d_star));
  return scan;
}

// ---------------------------------------------------------------------------
// threshold fit

ExponentFit separation_exponent_fit(const std::vector<ThresholdPoint>& points,
                                    bool robust) {
  if (points.size() < 3)
    throw DegenerateFit("need at least three threshold points");
  for (const auto& p : points)
    if (!(p.sigma > 0.0) || !(p.d_star > 0.0))
      throw DegenerateFit("threshold points must be positive");

  std::vector<std::size_t> keep(points.size());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  ExponentFit fit;
  for (;;) {
    const double n = static_cast<double>(keep.size());
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i : keep) {
      xbar += std::log(points[i].sigma);
      ybar += std::log(points[i].d_star);
    }
    xbar /= n;
    ybar /= n;
    double sxx = 0.0, sxy = 0.0, sst = 0.0;
    for (std::size_t i : keep) {
      const double dx = std::log(points[i].sigma) - xbar;
      const double dy = std::log(points[i].d_star) - ybar;
      sxx += dx * dx;
      sxy += dx * dy;
      sst += dy * dy;
    }
    if (!(sxx > 1e-20)) throw DegenerateFit("sigma values coincide");
    fit.exponent = sxy / sxx;
    fit.prefactor = std::exp(ybar - fit.exponent * xbar);
    std::vector<double> absres(keep.size());
    double ssr = 0.0;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      const std::size_t i = keep[j];
      const double r = std::log(points[i].d_star) - ybar -
                       fit.exponent * (std::log(points[i].sigma) - xbar);
      absres[j] = std::abs(r);
      ssr += r * r;
    }
    fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    if (!robust || keep.size() <= 3) break;

    std::vector<double> sorted = absres;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 != 0
                              ? sorted[mid]
                              : 0.5 * (sorted[mid - 1] + sorted[mid]);
    const std::size_t worst = static_cast<std::size_t>(
        std::max_element(absres.begin(), absres.end()) - absres.begin());
    if (absres[worst] <= 3.0 * median + 1e-12) break;
    fit.dropped.push_back(keep[worst]);
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  return fit;
}

}  // namespace fracmin
