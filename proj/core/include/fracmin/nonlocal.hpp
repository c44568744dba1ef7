#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fracmin/geometry.hpp"
#include "fracmin/quadrature.hpp"

namespace fracmin {

// Vertical cylinder Omega = B'(0, horizontal_radius) x (z_min, z_max), the
// window over which perimeter and stability are localized. Everything
// outside it is "exterior data" entering through ext1 / ext2.
struct CylinderDomain {
  double horizontal_radius = 1.0;
  double z_min = -1.0;
  double z_max = 1.0;

  void validate() const;
};

// One scalar field per sheet on the grid nodes, vanishing outside the
// cylinder of radius support_radius. Used in two roles, documented per
// operation: as the test function eta of the stability form, and as the
// vertical displacement phi of a graph flow X = phi * e_n (so that the
// normal speed is zeta = phi * nu_n).
struct PerturbationField {
  std::vector<std::vector<double>> eta;  // [sheet][node]
  double support_radius = 0.0;
};

// Smooth per-sheet plateau cutoff: 1 on |x'| <= core, cosine falloff to 0 at
// |x'| = support_radius, scaled per sheet by sheet_amplitude. The workhorse
// test family for stability scans.
PerturbationField plateau_field(const SheetStack& stack, double core_radius,
                                double support_radius,
                                const std::vector<double>& sheet_amplitude);

// The three pieces of the localized stability inequality evaluated on a
// test function: stability holds for that function iff margin >= 0.
struct StabilityReport {
  double lhs_interaction = 0.0;  // sigma * double integral |nu(x)-nu(y)|^2 eta(x)^2 K0
  double rhs_dirichlet = 0.0;    // sigma * double integral (eta(x)-eta(y))^2 K0
  double ext2 = 0.0;             // exterior term (bulk gradient kernel + wall)
  double margin = 0.0;           // rhs_dirichlet + ext2 - lhs_interaction
};

std::string to_json_string(const StabilityReport& report);

// Signed single-sheet contribution to the fractional mean curvature at a
// point of another sheet, plus the unsigned column mass used by the
// flat-sandwich comparisons.
struct HsCross {
  double signed_value = 0.0;
  double unsigned_column = 0.0;
};

// Fractional mean curvature of one sheet, seen from its own point x' (grid
// node `node` of sheet `sheet`), decoupled from the rest of the stack:
//   parity * (-s) * sigma * integral F1((g(y')-g(x'))/|y'-x'|) |y'-x'|^{-(n-1+s)} dy'
// with F1 the odd kernel profile at normalization 1. The -s normalization is
// fixed by the classical limit: for a single upward sheet this tends to
// c_circ(n) * H(x) as s -> 1, with H the classical mean curvature of the
// graph. Symmetric-core PV handling near y' = x', analytic model on the core
// window, analytic tails beyond the grid (frozen boundary value, or periodic
// images when the grid is periodic). Flat sheets give 0 exactly.
double hs_graph(const SheetStack& stack, int sheet, std::size_t node,
                const QuadratureSpec& spec);

// sigma * integral over sheet j of nu(y) . (y - x) |x-y|^{-(n+s)} dH_y, the
// cross-interaction term of the curvature of the full boundary at
// x = (x'(node), g_i(node)). The sign carries the parity of sheet j.
// unsigned_column is sigma * integral over sheet j of |x-y|^{-(n+s)} dH_y.
HsCross hs_cross(const SheetStack& stack, int i, std::size_t node, int j,
                 const QuadratureSpec& spec);

// Exterior term of the localized Euler-Lagrange equation at a boundary
// point x inside omega:
//   sigma * ( integral_{E n dOmega} n_Omega . (x-y) |x-y|^{-(n+s)} dH_y
//           + s * integral_{E n Omega^c} |x-y|^{-(n+s)} dy ).
// The set E outside the grid window follows the stack's extension rule
// (periodic tiling or frozen boundary values). For an s-minimal boundary
// the curvature integral clipped to omega equals this value; for
// configurations symmetric about the vertical line through x (with omega
// symmetric as well) it vanishes by cancellation.
double ext1(const SheetStack& stack, const CylinderDomain& omega, int sheet,
            std::size_t node, const QuadratureSpec& spec);

// Full fractional mean curvature of the stack boundary at a point: own-sheet
// graph term plus all cross terms, scaled to the kernel of the perimeter
// functional: H_K = (4/s) * (hs_graph + sum_j hs_cross). This is the
// quantity whose surface integral against the normal speed gives
// first_variation.
double hk_curvature(const SheetStack& stack, int sheet, std::size_t node,
                    const QuadratureSpec& spec);

// Fractional perimeter localized to omega:
//   (1-s) * double integral over (R^n x R^n) \ (Omega^c x Omega^c) of
//   (chi_E(x) - chi_E(y))^2 |x-y|^{-(n+s)} dx dy.
// n = 2 is the full-accuracy path; n = 3 runs on deliberately coarse polar
// grids (cost grows like the fourth power of the resolution; expect seconds,
// not milliseconds). n >= 4 is refused.
double per_s(const SheetStack& stack, const CylinderDomain& omega,
             const QuadratureSpec& spec);

// First variation of per_s along the vertical graph flow X = phi * e_n,
// phi given per sheet by `field` (compact support inside omega):
//   d/dt per_s(E_t, omega) = integral_{dE} H_K zeta dH,  zeta = X . nu.
double first_variation(const SheetStack& stack, const PerturbationField& field,
                       const CylinderDomain& omega, const QuadratureSpec& spec);

// Second variation of per_s along the same flow, as the four-line quadratic
// form: zeta-Dirichlet double integral, minus the nonlocal second
// fundamental form line, plus the exterior line (bulk gradient-kernel over
// E \ Omega plus the boundary integral over E n dOmega), plus the
// H_K (div X zeta - div_tau(zeta X_tau)) line (div X = 0 for vertical graph
// flows). All kernels carry the perimeter normalization 2*sigma*K0; with
// H_K = 0 the value equals stability_form's margin for eta = zeta (same
// three integrals, same pair-counting convention).
double second_variation(const SheetStack& stack, const PerturbationField& field,
                        const CylinderDomain& omega, const QuadratureSpec& spec);

// The localized stability quadratic form of a test function eta (given per
// sheet): margin >= 0 iff the discrete stability inequality holds for it.
StabilityReport stability_form(const SheetStack& stack,
                               const PerturbationField& field,
                               const CylinderDomain& omega,
                               const QuadratureSpec& spec);

// Predicted classical curvature of sheet i at a node from the first-order
// interaction law: parity_i * 2 sigma * ( sum_{j>i} (-1)^{i-j} / d_j
// - sum_{j<i} (-1)^{i-j} / d_j ) with d_j the vertical gap to sheet j.
// Normalized so that the measured (hs_graph + cross - ext1)/c_circ balance
// approaches it in the nearly flat, s -> 1 regime.
double interaction_prediction(const SheetStack& stack, int sheet,
                              std::size_t node);

}  // namespace fracmin
