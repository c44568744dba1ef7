#include "fracmin/geometry.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace fracmin {

void GridSpec::validate() const {
  if (dim != 1 && dim != 2) {
    throw InvalidParams("GridSpec: horizontal dim must be 1 or 2");
  }
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw InvalidParams("GridSpec: extent must be positive and finite");
  }
  if (resolution < 5) throw InvalidParams("GridSpec: resolution must be >= 5");
}

namespace {

// One dimensional second order stencils over a node row addressed by a value
// accessor. Periodic grids identify node N-1 with node 0 (period 2*extent).
struct Row {
  std::function<double(int)> at;
  int n;
  double h;
  bool periodic;

  double value(int i) const {
    if (periodic) {
      const int p = n - 1;
      i = ((i % p) + p) % p;
    }
    return at(i);
  }
  double d1(int i) const {
    if (!periodic) {
      if (i == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      if (i == n - 1)
        return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    }
    return (value(i + 1) - value(i - 1)) / (2.0 * h);
  }
  double d2(int i) const {
    if (!periodic) {
      if (i == 0)
        return (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
      if (i == n - 1)
        return (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) -
                at(n - 4)) /
               (h * h);
    }
    return (value(i + 1) - 2.0 * value(i) + value(i - 1)) / (h * h);
  }
};

void check_sheet_range(const SheetStack& stack, int sheet) {
  if (sheet < 0 || sheet >= stack.n_sheets()) {
    throw InvalidParams("sheet index out of range");
  }
}

}  // namespace

SheetStack build_stack(const GridSpec& grid, const FractionalParams& params,
                       std::vector<GraphSheet> sheets, int parity_base) {
  grid.validate();
  params.validate();
  if (params.n != grid.dim + 1) {
    throw InvalidParams("build_stack: params.n must equal grid.dim + 1");
  }
  if (parity_base != 1 && parity_base != -1) {
    throw InvalidParams("build_stack: parity_base must be +1 or -1");
  }
  if (sheets.empty()) throw InvalidParams("build_stack: no sheets given");
  const std::size_t nodes = grid.node_count();
  for (std::size_t k = 0; k < sheets.size(); ++k) {
    if (sheets[k].height.size() != nodes) {
      std::ostringstream msg;
      msg << "build_stack: sheet " << k << " has " << sheets[k].height.size()
          << " nodes, grid has " << nodes;
      throw GridMismatch(msg.str());
    }
    for (double v : sheets[k].height) {
      if (!std::isfinite(v)) {
        throw InvalidParams("build_stack: non-finite sheet height");
      }
    }
  }
  for (std::size_t k = 0; k + 1 < sheets.size(); ++k) {
    for (std::size_t m = 0; m < nodes; ++m) {
      if (!(sheets[k + 1].height[m] > sheets[k].height[m])) {
        std::ostringstream msg;
        msg << "build_stack: sheets " << k << " and " << k + 1
            << " touch or cross at node " << m << " (heights "
            << sheets[k].height[m] << " vs " << sheets[k + 1].height[m] << ")";
        throw OrderingViolated(msg.str());
      }
    }
  }
  SheetStack stack;
  stack.grid = grid;
  stack.params = params;
  stack.parity_base = parity_base;
  stack.sheets = std::move(sheets);
  return stack;
}

GraphSheet sample_sheet(const GridSpec& grid,
                        const std::function<double(double)>& g) {
  grid.validate();
  if (grid.dim != 1) throw InvalidParams("sample_sheet: grid.dim must be 1");
  GraphSheet sheet;
  sheet.height.resize(grid.node_count());
  for (int i = 0; i < grid.resolution; ++i) sheet.height[i] = g(grid.coord(i));
  return sheet;
}

GraphSheet sample_sheet(const GridSpec& grid,
                        const std::function<double(double, double)>& g) {
  grid.validate();
  if (grid.dim != 2) throw InvalidParams("sample_sheet: grid.dim must be 2");
  GraphSheet sheet;
  sheet.height.resize(grid.node_count());
  for (int i = 0; i < grid.resolution; ++i)
    for (int j = 0; j < grid.resolution; ++j)
      sheet.height[static_cast<std::size_t>(i) * grid.resolution + j] =
          g(grid.coord(i), grid.coord(j));
  return sheet;
}

std::array<double, 2> sheet_gradient(const SheetStack& stack, int sheet,
                                     std::size_t node) {
  check_sheet_range(stack, sheet);
  const auto& g = stack.sheets[sheet].height;
  const GridSpec& grid = stack.grid;
  const double h = grid.spacing();
  if (grid.dim == 1) {
    Row row{[&](int i) { return g[i]; }, grid.resolution, h, grid.periodic};
    return {row.d1(static_cast<int>(node)), 0.0};
  }
  const int res = grid.resolution;
  const int i = static_cast<int>(node) / res;
  const int j = static_cast<int>(node) % res;
  Row along_x{[&](int a) { return g[static_cast<std::size_t>(a) * res + j]; },
              res, h, grid.periodic};
  Row along_y{[&](int b) { return g[static_cast<std::size_t>(i) * res + b]; },
              res, h, grid.periodic};
  return {along_x.d1(i), along_y.d1(j)};
}

SurfaceFrame normal_and_curvature(const SheetStack& stack, int sheet,
                                  std::size_t node) {
  check_sheet_range(stack, sheet);
  const auto& g = stack.sheets[sheet].height;
  const GridSpec& grid = stack.grid;
  const double h = grid.spacing();
  const double par = stack.parity(sheet);
  SurfaceFrame out;

  if (grid.dim == 1) {
    Row row{[&](int i) { return g[i]; }, grid.resolution, h, grid.periodic};
    const int i = static_cast<int>(node);
    const double gx = row.d1(i), gxx = row.d2(i);
    const double w = std::sqrt(1.0 + gx * gx);
    out.normal = {par * (-gx / w), 0.0, par * (1.0 / w)};
    out.mean_curvature = par * (-gxx / (w * w * w));
    return out;
  }

  const int res = grid.resolution;
  const int i = static_cast<int>(node) / res;
  const int j = static_cast<int>(node) % res;
  const auto at = [&](int a, int b) {
    return g[static_cast<std::size_t>(a) * res + b];
  };
  Row along_x{[&](int a) { return at(a, j); }, res, h, grid.periodic};
  Row along_y{[&](int b) { return at(i, b); }, res, h, grid.periodic};
  const double gx = along_x.d1(i);
  const double gy = along_y.d1(j);
  const double gxx = along_x.d2(i);
  const double gyy = along_y.d2(j);
  // Mixed derivative: differentiate the y-derivative along x, keeping every
  // stage second order so edge nodes stay consistent.
  Row dy_along_x{[&](int a) {
                   Row col{[&](int b) { return at(a, b); }, res, h,
                           grid.periodic};
                   return col.d1(j);
                 },
                 res, h, grid.periodic};
  const double gxy = dy_along_x.d1(i);

  const double w2 = 1.0 + gx * gx + gy * gy;
  const double w = std::sqrt(w2);
  out.normal = {par * (-gx / w), par * (-gy / w), par * (1.0 / w)};
  out.mean_curvature = par * -((1.0 + gy * gy) * gxx - 2.0 * gx * gy * gxy +
                               (1.0 + gx * gx) * gyy) /
                       (w2 * w);
  return out;
}

double sheet_distance(const SheetStack& stack, int sheet_a, int sheet_b) {
  check_sheet_range(stack, sheet_a);
  check_sheet_range(stack, sheet_b);
  if (sheet_a == sheet_b) return 0.0;
  const auto& ga = stack.sheets[sheet_a].height;
  const auto& gb = stack.sheets[sheet_b].height;
  const GridSpec& grid = stack.grid;
  const std::size_t nodes = grid.node_count();

  double vertical = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < nodes; ++m) {
    vertical = std::min(vertical, std::abs(gb[m] - ga[m]));
  }
  if (nodes * nodes > 32'000'000ull) return vertical;

  const int res = grid.resolution;
  double best = vertical;
  const double best_upper = vertical;  // pairs beyond this can't win
  for (std::size_t p = 0; p < nodes; ++p) {
    const double xa = grid.coord(static_cast<int>(p) / (grid.dim == 1 ? 1 : res));
    const double ya = grid.dim == 1 ? 0.0 : grid.coord(static_cast<int>(p) % res);
    for (std::size_t q = 0; q < nodes; ++q) {
      const double xb =
          grid.coord(static_cast<int>(q) / (grid.dim == 1 ? 1 : res));
      const double yb =
          grid.dim == 1 ? 0.0 : grid.coord(static_cast<int>(q) % res);
      const double dx = xb - xa, dy = yb - ya;
      const double horiz2 = dx * dx + dy * dy;
      if (horiz2 > best_upper * best_upper) continue;
      const double dz = gb[q] - ga[p];
      best = std::min(best, std::sqrt(horiz2 + dz * dz));
    }
  }
  return best;
}

std::string to_json_string(const SheetStack& stack) {
  nlohmann::ordered_json j;
  j["grid"] = {{"dim", stack.grid.dim},
               {"extent", stack.grid.extent},
               {"resolution", stack.grid.resolution},
               {"periodic", stack.grid.periodic}};
  j["s"] = stack.params.s;
  j["parity_base"] = stack.parity_base;
  auto& sheets = j["sheets"] = nlohmann::ordered_json::array();
  for (const auto& sh : stack.sheets) sheets.push_back(sh.height);
  return j.dump();
}

SheetStack stack_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("stack JSON parse error: ") + e.what());
  }
  try {
    GridSpec grid;
    grid.dim = j.at("grid").at("dim").get<int>();
    grid.extent = j.at("grid").at("extent").get<double>();
    grid.resolution = j.at("grid").at("resolution").get<int>();
    grid.periodic = j.at("grid").at("periodic").get<bool>();
    FractionalParams params{grid.dim + 1, j.at("s").get<double>()};
    const int parity = j.value("parity_base", 1);
    std::vector<GraphSheet> sheets;
    for (const auto& arr : j.at("sheets")) {
      sheets.push_back({arr.get<std::vector<double>>()});
    }
    return build_stack(grid, params, std::move(sheets), parity);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("stack JSON missing/invalid field: ") +
                        e.what());
  }
}

}  // namespace fracmin
