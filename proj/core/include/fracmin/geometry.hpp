#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fracmin/errors.hpp"
#include "fracmin/kernel.hpp"

namespace fracmin {

// Uniform node grid on [-extent, extent]^dim, endpoints included, for the
// horizontal variables of graph sheets. dim is the horizontal dimension, so
// the ambient space is R^{dim+1}. periodic selects the lateral extension
// rule used by the integral operators: periodic tiling of period 2*extent
// versus freezing the boundary value.
struct GridSpec {
  int dim = 1;
  double extent = 1.0;
  int resolution = 129;
  bool periodic = false;

  void validate() const;
  double spacing() const { return 2.0 * extent / (resolution - 1); }
  double coord(int i) const { return -extent + i * spacing(); }
  std::size_t node_count() const {
    return dim == 1 ? static_cast<std::size_t>(resolution)
                    : static_cast<std::size_t>(resolution) * resolution;
  }
  bool operator==(const GridSpec&) const = default;
};

// Heights of one graph sheet on the grid nodes, row-major for dim = 2
// (node = i*resolution + j, x1 = coord(i), x2 = coord(j)).
struct GraphSheet {
  std::vector<double> height;
};

// An ordered finite stack of disjoint graph sheets, the boundary of an
// alternating layered set E: consecutive sheets bound alternating layers,
// and parity_base = +1 means the first (lowest) sheet has upward outward
// normal, i.e. E lies below it. Carries the fractional parameters so the
// integral operators are self-contained.
struct SheetStack {
  GridSpec grid;
  FractionalParams params;
  int parity_base = +1;
  std::vector<GraphSheet> sheets;

  int n_sheets() const { return static_cast<int>(sheets.size()); }
  // +1 when sheet k (0-based, bottom first) has upward outward normal.
  int parity(int k) const { return (k % 2 == 0) ? parity_base : -parity_base; }
  double height(int k, std::size_t node) const {
    return sheets[static_cast<std::size_t>(k)].height[node];
  }
};

// Validates grid consistency, parameter ranges, and strict node-wise ordering
// of the sheets (throws OrderingViolated on touching or crossing sheets,
// GridMismatch when a sheet has the wrong node count).
SheetStack build_stack(const GridSpec& grid, const FractionalParams& params,
                       std::vector<GraphSheet> sheets, int parity_base = +1);

// Sample a height function onto a grid. The dim = 1 overload takes g(x1),
// the dim = 2 overload g(x1, x2).
GraphSheet sample_sheet(const GridSpec& grid,
                        const std::function<double(double)>& g);
GraphSheet sample_sheet(const GridSpec& grid,
                        const std::function<double(double, double)>& g);

// Outward unit normal and scalar mean curvature (sum of principal
// curvatures) of one sheet at a node, by second order finite differences
// (centered inside, one-sided at edges, wrapped when the grid is periodic).
// Sign convention: an upward-normal sheet has H = -div(grad g / sqrt(1+|grad g|^2)),
// so a hemisphere cap of radius R gets H = (n-1)/R and small graphs have
// H ~ -laplacian(g). parity flips both the normal and H.
struct SurfaceFrame {
  std::array<double, 3> normal{0.0, 0.0, 0.0};  // components x1[,x2],xn
  double mean_curvature = 0.0;
};
SurfaceFrame normal_and_curvature(const SheetStack& stack, int sheet,
                                  std::size_t node);

// Horizontal gradient of a sheet at a node (same finite difference rules).
std::array<double, 2> sheet_gradient(const SheetStack& stack, int sheet,
                                     std::size_t node);

// Minimal Euclidean distance between two sheets, by discrete minimization
// over node pairs (falls back to the node-wise vertical gap when the pair
// count is impractical, which still brackets the true distance within a
// factor sqrt(1+delta^2) for slope bound delta).
double sheet_distance(const SheetStack& stack, int sheet_a, int sheet_b);

// JSON round trip of the full stack description.
std::string to_json_string(const SheetStack& stack);
SheetStack stack_from_json_string(const std::string& text);

}  // namespace fracmin
