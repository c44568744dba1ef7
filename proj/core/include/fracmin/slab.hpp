#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fracmin/kernel.hpp"
#include "fracmin/nonlocal.hpp"
#include "fracmin/quadrature.hpp"

namespace fracmin {

// A set depending only on the last coordinate: the slabs [a_1,a_2],
// [a_3,a_4], ... between consecutive breakpoints, with an odd count leaving
// the last slab unbounded above. A periodic pattern repeats with period
// periodic_cell; tiling needs an even breakpoint count per cell (so the
// layering continues consistently across copies) and the breakpoints must
// fit inside one period.
struct SlabPattern {
  std::vector<double> breakpoints;
  std::optional<double> periodic_cell;
  FractionalParams params;
  std::optional<double> c_star;  // recorded when built by ladder_pattern

  void validate() const;
};

// Equal-spacing ladder a_k = k * c_star * sqrt(sigma), k = 0..count-1, with
// period count * c_star * sqrt(sigma): slabs and gaps of equal width, every
// boundary a symmetry plane of the set. count must be even and >= 2.
SlabPattern ladder_pattern(const FractionalParams& params, double c_star,
                           int count);

// One-dimensional reduction of chi_{E^c} - chi_E for a slab set, together
// with the column constant: at a boundary height x,
//   H_s(x) = sigma * reduction_constant * p.v. int u(t) |t - x|^{-1-s} dt,
// and reduction_constant is c_ns of the ambient parameters. value(t) is +1
// outside the slabs and -1 inside (right-continuous at breakpoints).
struct SlabProfile {
  SlabPattern pattern;
  double reduction_constant = 0.0;

  int value(double t) const;
};
SlabProfile slab_reduce(const SlabPattern& pattern);

// Fractional mean curvature of the slab set at breakpoint `boundary`
// (0-based), as sigma * c_ns * (principal value above). The profile is
// piecewise constant, so each interval between breakpoints integrates to an
// exact power-law difference and the jump at the evaluation point cancels in
// symmetric pairs; periodic patterns add zeta-continued lattice tails
// (accurate to ~1e-13, below any admissible spec.tol).
double slab_hs_1d(const SlabPattern& pattern, std::size_t boundary,
                  const QuadratureSpec& spec);

// One plateau perturbation of a realized stack: cosine cutoff with the given
// radii, sheet amplitudes either all +1 or alternating +1/-1 bottom-up.
struct PlateauMode {
  double core_radius = 0.0;
  double support_radius = 0.0;
  bool alternating = false;
};

// The declared scan family: {uniform, alternating} signs crossed with three
// core widths, support at 0.85 of the window radius. Mode ids are positions
// in the returned vector.
std::vector<PlateauMode> default_mode_family(const CylinderDomain& omega);

struct ScanRow {
  double sigma = 0.0;
  double spacing = 0.0;
  double min_margin = 0.0;
  int worst_mode_id = -1;
};

struct StabilityScan {
  std::vector<ScanRow> rows;  // one per entry of the spacing grid
  double d_star = 0.0;        // smallest stable spacing, bisected to 1e-3 rel
  double l2_observable = 0.0; // sigma * sum over window nodes and gaps of gap^-2 * h, at d_star
  AmHmBound gap_bound;        // collapsed vs per-gap interaction check at d_star
};

// Realizes six flat sheets at the given spacings (centered in the window),
// evaluates stability_form for every mode, and records the minimal margin
// per spacing. The threshold d_star is located by bisection between the
// bracketing grid entries; throws NoSignChange when the grid does not
// bracket a sign change of the minimal margin. The sheets are flat, so their
// constant continuation beyond the grid coincides with the periodic one.
//
// The margin is minimized over a declared finite family only, which makes
// d_star a lower estimate of the true threshold; the separation fit relies
// on how d_star scales with sigma, not on its constant.
StabilityScan slab_stability_scan(double sigma,
                                  const std::vector<double>& spacing_grid,
                                  const std::vector<PlateauMode>& modes,
                                  const CylinderDomain& omega,
                                  const QuadratureSpec& spec);

struct ThresholdPoint {
  double sigma = 0.0;
  double d_star = 0.0;
};

struct ExponentFit {
  double exponent = 0.0;   // slope of log d_star against log sigma
  double prefactor = 0.0;  // exp(intercept)
  double r2 = 0.0;
  std::vector<std::size_t> dropped;  // indices removed by the robust pass
};

// Least-squares power-law fit through the threshold points. With robust set,
// points whose log-space residual exceeds three times the median are dropped
// one at a time (never below three points). Throws DegenerateFit on fewer
// than three points, nonpositive data, or coinciding sigma values.
ExponentFit separation_exponent_fit(const std::vector<ThresholdPoint>& points,
                                    bool robust = false);

}  // namespace fracmin
