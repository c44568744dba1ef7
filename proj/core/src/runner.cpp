#include "fracmin/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "fracmin/cone.hpp"
#include "fracmin/errors.hpp"
#include "fracmin/geometry.hpp"
#include "fracmin/nonlocal.hpp"
#include "fracmin/report.hpp"
#include "fracmin/slab.hpp"
#include "fracmin/toda.hpp"
#include "fracmin/version.hpp"
#include "nonlocal_detail.hpp"

namespace fracmin {
namespace {

using ordered_json = nlohmann::ordered_json;

const char* const kCommands[] = {
    "kernel",         "hs-eval", "slab-check", "slab-stability",
    "separation-fit", "toda",    "cone",       "variation-oracle"};

// Typed access to the option bag. Every read marks its key; finish() rejects
// leftovers so a misspelled option fails loudly instead of silently keeping
// a default.
class OptionBag {
 public:
  explicit OptionBag(const ExperimentConfig& cfg) : cfg_(cfg) {}

  std::string text(const std::string& key, std::string fallback) {
    const auto it = cfg_.options.find(key);
    if (it == cfg_.options.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  double number(const std::string& key, double fallback) {
    const auto it = cfg_.options.find(key);
    if (it == cfg_.options.end()) return fallback;
    used_.insert(key);
    return parse_number(key, it->second);
  }

  double require_number(const std::string& key) {
    const auto it = cfg_.options.find(key);
    if (it == cfg_.options.end())
      throw ConfigInvalid(cfg_.command + ": option '" + key + "' is required");
    used_.insert(key);
    return parse_number(key, it->second);
  }

  int integer(const std::string& key, int fallback) {
    const double v = number(key, static_cast<double>(fallback));
    const double r = std::nearbyint(v);
    if (v != r || std::abs(v) > 1e9)
      throw ConfigInvalid(cfg_.command + ": option '" + key +
                          "' must be an integer");
    return static_cast<int>(r);
  }

  bool flag(const std::string& key, bool fallback) {
    const auto it = cfg_.options.find(key);
    if (it == cfg_.options.end()) return fallback;
    used_.insert(key);
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigInvalid(cfg_.command + ": option '" + key +
                        "' must be true or false");
  }

  std::vector<double> number_list(const std::string& key,
                                  std::vector<double> fallback) {
    const auto it = cfg_.options.find(key);
    if (it == cfg_.options.end()) return fallback;
    used_.insert(key);
    std::vector<double> out;
    const std::string& raw = it->second;
    std::size_t start = 0;
    while (start <= raw.size()) {
      std::size_t comma = raw.find(',', start);
      if (comma == std::string::npos) comma = raw.size();
      std::size_t a = start, b = comma;
      while (a < b && raw[a] == ' ') ++a;
      while (b > a && raw[b - 1] == ' ') --b;
      out.push_back(parse_number(key, raw.substr(a, b - a)));
      start = comma + 1;
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : cfg_.options) {
      (void)value;
      if (used_.count(key) == 0)
        throw ConfigInvalid(cfg_.command + ": unknown option '" + key + "'");
    }
  }

 private:
  double parse_number(const std::string& key, const std::string& raw) const {
    double value = 0.0;
    const char* begin = raw.c_str();
    const char* end = begin + raw.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
      throw ConfigInvalid(cfg_.command + ": option '" + key + "': '" + raw +
                          "' is not a number");
    return value;
  }

  const ExperimentConfig& cfg_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// artifact emission

std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(cfg.canonical());
}

void emit_artifact(const ExperimentConfig& cfg,
                   const std::vector<std::string>& columns,
                   const std::vector<std::vector<std::string>>& rows,
                   const ordered_json& payload) {
  if (cfg.output_path.empty()) return;
  if (cfg.format == "csv") {
    std::string text;
    text += "# fracmin " + std::string(kVersion) + "\n";
    text += "# command " + cfg.command + "\n";
    text += "# config_hash " + config_hash(cfg) + "\n";
    text += csv_line(columns);
    for (const auto& row : rows) text += csv_line(row);
    write_file_atomic(cfg.output_path, text);
    return;
  }
  ordered_json j;
  j["tool"] = "fracmin";
  j["version"] = kVersion;
  j["command"] = cfg.command;
  j["config_hash"] = config_hash(cfg);
  for (const auto& item : payload.items()) j[item.key()] = item.value();
  write_file_atomic(cfg.output_path, j.dump(2) + "\n");
}

std::string fmt(double v) { return format_double(v); }

double max_of(const std::vector<double>& values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

// sample_sheet picks its overload by lambda arity, so route 1-D grids
// through a section of the two-argument shape function
GraphSheet sample_any(const GridSpec& grid,
                      const std::function<double(double, double)>& fn) {
  if (grid.dim == 1)
    return sample_sheet(grid, [&fn](double x1) { return fn(x1, 0.0); });
  return sample_sheet(grid, fn);
}

// ---------------------------------------------------------------------------
// kernel

void run_kernel(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  opt.finish();

  const KernelConstants kc = kernel_constants(cfg.params);
  const OmegaCheck oc = omega_check(cfg.params);
  std::printf("c_ns = %.6g  (n = %d, s = %g, c_circ = %.6g)\n", kc.c_ns,
              cfg.params.n, cfg.params.s, kc.c_circ);

  emit_artifact(
      cfg, {"n", "s", "sigma", "c_ns", "c_circ", "f_infinity", "omega_rel_error"},
      {{std::to_string(cfg.params.n), fmt(cfg.params.s), fmt(kc.sigma),
        fmt(kc.c_ns), fmt(kc.c_circ), fmt(kc.f_infinity), fmt(oc.rel_error)}},
      ordered_json{{"n", cfg.params.n},
                   {"s", cfg.params.s},
                   {"sigma", kc.sigma},
                   {"c_ns", kc.c_ns},
                   {"c_circ", kc.c_circ},
                   {"f_infinity", kc.f_infinity},
                   {"omega_check",
                    ordered_json{{"analytic", oc.analytic},
                                 {"quadrature", oc.quadrature},
                                 {"rel_error", oc.rel_error}}}});
}

// ---------------------------------------------------------------------------
// hs-eval

void run_hs_eval(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const std::string shape = opt.text("shape", "bump");
  const int resolution = opt.integer("resolution", 201);
  const double extent = opt.number("extent", 4.0);
  const double amplitude = opt.number("amplitude", 0.5);
  const double gap = opt.number("gap", 0.8);
  const int sheet = opt.integer("sheet", 0);
  opt.finish();

  const int dim = cfg.params.n - 1;
  if (dim != 1 && dim != 2)
    throw InvalidParams("hs-eval: graph sheets need n = 2 or n = 3");
  const GridSpec grid{dim, extent, resolution, false};

  std::vector<GraphSheet> sheets;
  if (shape == "flat") {
    sheets.push_back(sample_any(grid, [](double, double) { return 0.0; }));
  } else if (shape == "bump") {
    sheets.push_back(sample_any(grid, [=](double x1, double x2) {
      return amplitude * std::exp(-(x1 * x1 + x2 * x2));
    }));
  } else if (shape == "pair") {
    sheets.push_back(sample_any(grid, [](double, double) { return 0.0; }));
    sheets.push_back(sample_any(grid, [=](double, double) { return gap; }));
  } else {
    throw ConfigInvalid("hs-eval: shape must be flat, bump, or pair");
  }
  const SheetStack st = build_stack(grid, cfg.params, std::move(sheets));
  if (sheet < 0 || sheet >= st.n_sheets())
    throw ConfigInvalid("hs-eval: sheet index out of range");

  // every interior node in 1-D, the interior of the center row in 2-D
  // (a full 2-D sweep would cost resolution^4 kernel evaluations); the
  // outermost three nodes per edge lack the one-sided stencil room the
  // evaluator needs
  std::vector<std::size_t> nodes;
  if (dim == 1) {
    for (int i = 3; i < resolution - 3; ++i)
      nodes.push_back(static_cast<std::size_t>(i));
  } else {
    const std::size_t row = static_cast<std::size_t>(resolution / 2);
    for (int i = 3; i < resolution - 3; ++i)
      nodes.push_back(row * static_cast<std::size_t>(resolution) +
                      static_cast<std::size_t>(i));
  }

  std::vector<double> values(nodes.size());
  detail::parallel_for(nodes.size(), [&](std::size_t k) {
    values[k] = hs_graph(st, sheet, nodes[k], cfg.quadrature);
  });

  std::size_t argmax = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (std::abs(values[k]) > std::abs(values[argmax])) argmax = k;
  const double max_abs = values.empty() ? 0.0 : std::abs(values[argmax]);
  std::printf("hs-eval %s: max |H_s| = %.6g at node %zu (%zu nodes)\n",
              shape.c_str(), max_abs, nodes.empty() ? 0 : nodes[argmax],
              nodes.size());

  std::vector<std::string> columns = {"node", "x1", "value"};
  if (dim == 2) columns = {"node", "x1", "x2", "value"};
  std::vector<std::vector<std::string>> rows;
  ordered_json jnodes = ordered_json::array();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::size_t node = nodes[k];
    const int ix = static_cast<int>(node % static_cast<std::size_t>(resolution));
    const int iy = static_cast<int>(node / static_cast<std::size_t>(resolution));
    const double x1 = grid.coord(ix);
    if (dim == 1) {
      rows.push_back({std::to_string(node), fmt(x1), fmt(values[k])});
      jnodes.push_back(ordered_json{
          {"node", node}, {"x1", x1}, {"value", values[k]}});
    } else {
      const double x2 = grid.coord(iy);
      rows.push_back({std::to_string(node), fmt(x1), fmt(x2), fmt(values[k])});
      jnodes.push_back(ordered_json{
          {"node", node}, {"x1", x1}, {"x2", x2}, {"value", values[k]}});
    }
  }
  emit_artifact(cfg, columns, rows,
                ordered_json{{"shape", shape},
                             {"sheet", sheet},
                             {"resolution", resolution},
                             {"extent", extent},
                             {"max_abs", max_abs},
                             {"argmax_node", nodes.empty() ? 0 : nodes[argmax]},
                             {"values", jnodes}});
}

// ---------------------------------------------------------------------------
// slab-check

void run_slab_check(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const double sigma = opt.number("sigma", cfg.params.sigma());
  const double cstar = opt.number("cstar", 5.0);
  const int count = opt.integer("sheets", 6);
  const std::vector<double> breaks = opt.number_list("breakpoints", {});
  const double cell = opt.number("cell", 0.0);
  opt.finish();

  const FractionalParams p{cfg.params.n, 1.0 - sigma};
  SlabPattern pattern;
  if (!breaks.empty()) {
    pattern.breakpoints = breaks;
    pattern.params = p;
    if (cell > 0.0) pattern.periodic_cell = cell;
    pattern.validate();
  } else {
    pattern = ladder_pattern(p, cstar, count);
  }

  const std::size_t boundaries = pattern.breakpoints.size();
  std::vector<double> values(boundaries);
  detail::parallel_for(boundaries, [&](std::size_t b) {
    values[b] = slab_hs_1d(pattern, b, cfg.quadrature);
  });
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  std::printf("slab-check: max |H_s| = %.3e over %zu boundaries (sigma = %g)\n",
              max_abs, boundaries, sigma);

  std::vector<std::vector<std::string>> rows;
  ordered_json jrows = ordered_json::array();
  for (std::size_t b = 0; b < boundaries; ++b) {
    rows.push_back(
        {std::to_string(b), fmt(pattern.breakpoints[b]), fmt(values[b])});
    jrows.push_back(ordered_json{{"boundary", b},
                                 {"position", pattern.breakpoints[b]},
                                 {"hs", values[b]}});
  }
  ordered_json payload{{"sigma", sigma},
                       {"n", cfg.params.n},
                       {"max_abs", max_abs},
                       {"boundaries", jrows}};
  if (pattern.periodic_cell) payload["period"] = *pattern.periodic_cell;
  if (pattern.c_star) payload["c_star"] = *pattern.c_star;
  emit_artifact(cfg, {"boundary", "position", "hs"}, rows, payload);
}

// ---------------------------------------------------------------------------
// slab-stability and separation-fit

CylinderDomain window_from(OptionBag& opt) {
  const double radius = opt.number("radius", 4.0);
  const double zmin = opt.number("zmin", -30.0);
  const double zmax = opt.number("zmax", 30.0);
  return {radius, zmin, zmax};
}

std::vector<double> spacing_grid_for(double sigma,
                                     const std::vector<double>& multipliers) {
  std::vector<double> grid;
  grid.reserve(multipliers.size());
  for (double m : multipliers) grid.push_back(m * std::sqrt(sigma));
  return grid;
}

void run_slab_stability(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const double sigma = opt.require_number("sigma");
  const std::vector<double> multipliers =
      opt.number_list("multipliers", {0.2, 0.8, 3.2, 12.8});
  const std::vector<double> spacings =
      opt.number_list("spacings", spacing_grid_for(sigma, multipliers));
  const CylinderDomain omega = window_from(opt);
  opt.finish();

  const std::vector<PlateauMode> modes = default_mode_family(omega);
  const StabilityScan scan =
      slab_stability_scan(sigma, spacings, modes, omega, cfg.quadrature);
  std::printf("slab-stability: d_star = %.6g (sigma = %g, l2 = %.6g)\n",
              scan.d_star, sigma, scan.l2_observable);

  std::vector<std::vector<std::string>> rows;
  ordered_json jrows = ordered_json::array();
  for (const ScanRow& r : scan.rows) {
    rows.push_back({fmt(r.sigma), fmt(r.spacing), fmt(r.min_margin),
                    std::to_string(r.worst_mode_id)});
    jrows.push_back(ordered_json{{"sigma", r.sigma},
                                 {"spacing", r.spacing},
                                 {"min_margin", r.min_margin},
                                 {"worst_mode_id", r.worst_mode_id}});
  }
  emit_artifact(
      cfg, {"sigma", "spacing", "min_margin", "worst_mode_id"}, rows,
      ordered_json{{"sigma", sigma},
                   {"rows", jrows},
                   {"d_star", scan.d_star},
                   {"l2_observable", scan.l2_observable},
                   {"gap_bound",
                    ordered_json{{"lhs", scan.gap_bound.lhs},
                                 {"rhs", scan.gap_bound.rhs},
                                 {"holds", scan.gap_bound.holds()}}}});
}

void run_separation_fit(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const std::vector<double> sigmas =
      opt.number_list("sigmas", {0.2, 0.1, 0.05, 0.02});
  const std::vector<double> multipliers =
      opt.number_list("multipliers", {0.2, 0.8, 3.2, 12.8});
  const bool robust = opt.flag("robust", false);
  const CylinderDomain omega = window_from(opt);
  opt.finish();

  const std::vector<PlateauMode> modes = default_mode_family(omega);
  std::vector<ThresholdPoint> points;
  std::vector<double> l2s;
  for (double sigma : sigmas) {
    const StabilityScan scan =
        slab_stability_scan(sigma, spacing_grid_for(sigma, multipliers), modes,
                            omega, cfg.quadrature);
    points.push_back({sigma, scan.d_star});
    l2s.push_back(scan.l2_observable);
  }
  const ExponentFit fit = separation_exponent_fit(points, robust);
  std::printf("separation-fit: exponent = %.4g (r2 = %.6g, %zu points)\n",
              fit.exponent, fit.r2, points.size());

  std::vector<std::vector<std::string>> rows;
  ordered_json jpoints = ordered_json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    rows.push_back({fmt(points[i].sigma), fmt(points[i].d_star), fmt(l2s[i])});
    jpoints.push_back(ordered_json{{"sigma", points[i].sigma},
                                   {"d_star", points[i].d_star},
                                   {"l2_observable", l2s[i]}});
  }
  emit_artifact(cfg, {"sigma", "d_star", "l2_observable"}, rows,
                ordered_json{{"points", jpoints},
                             {"exponent", fit.exponent},
                             {"prefactor", fit.prefactor},
                             {"r2", fit.r2},
                             {"dropped", fit.dropped}});
}

// ---------------------------------------------------------------------------
// toda

void run_toda(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const int profiles = opt.integer("profiles", 2);
  const std::string domain_name = opt.text("domain", "disc");
  const int resolution = opt.integer("resolution", 41);
  const double extent = opt.number("extent", 1.0);
  const double g0 = opt.number("g0", 1.0);
  const int substeps = opt.integer("substeps", 4);
  const double tol = opt.number("tol", 1e-10);
  const std::string seed = opt.text("seed", "harmonic");
  opt.finish();

  int dim = 2;
  bool disc = false;
  if (domain_name == "interval") {
    dim = 1;
  } else if (domain_name == "disc") {
    disc = true;
  } else if (domain_name != "rectangle") {
    throw ConfigInvalid("toda: domain must be interval, rectangle, or disc");
  }
  if (seed != "harmonic" && seed != "ansatz")
    throw ConfigInvalid("toda: seed must be harmonic or ansatz");

  const TodaDomain domain{GridSpec{dim, extent, resolution, false}, disc};
  const BalancingVector bal = solve_balancing(profiles);
  const RadialProfile le = lane_emden_radial(dim, 2.0 * extent, g0, substeps);

  // boundary data from the product ansatz: balancing coefficient times the
  // radial profile, coefficients reversed so the fields come out ascending
  std::vector<std::vector<double>> data(
      static_cast<std::size_t>(profiles),
      std::vector<double>(domain.grid.node_count()));
  for (std::size_t node = 0; node < domain.grid.node_count(); ++node) {
    double r = 0.0;
    if (dim == 1) {
      r = std::abs(domain.grid.coord(static_cast<int>(node)));
    } else {
      const int ix = static_cast<int>(node % static_cast<std::size_t>(resolution));
      const int iy = static_cast<int>(node / static_cast<std::size_t>(resolution));
      r = std::hypot(domain.grid.coord(ix), domain.grid.coord(iy));
    }
    const double g = le.at(r);
    for (int k = 0; k < profiles; ++k)
      data[static_cast<std::size_t>(k)][node] =
          bal.a[static_cast<std::size_t>(profiles - 1 - k)] * g;
  }

  std::vector<std::vector<double>> guess;
  if (seed == "ansatz") guess = data;
  const TodaState state = toda_solve(profiles, domain, data, guess, tol);
  const ResidualField res = toda_residual(state);
  std::printf(
      "toda: N = %d on %s (res %d), %d iterations, residual = %.3e\n",
      profiles, domain_name.c_str(), resolution, state.iterations,
      max_of(res.max_norm));

  std::vector<std::vector<std::string>> rows;
  ordered_json jhist = ordered_json::array();
  for (const IterationLog& log : state.history) {
    rows.push_back({std::to_string(log.iteration), fmt(log.residual),
                    fmt(log.step_length)});
    jhist.push_back(ordered_json{{"iteration", log.iteration},
                                 {"residual", log.residual},
                                 {"step_length", log.step_length}});
  }
  ordered_json jprofiles = ordered_json::array();
  for (const auto& g : state.profiles) jprofiles.push_back(g);
  emit_artifact(cfg, {"iteration", "residual", "step_length"}, rows,
                ordered_json{{"n_profiles", profiles},
                             {"domain",
                              ordered_json{{"dim", dim},
                                           {"extent", extent},
                                           {"resolution", resolution},
                                           {"disc", disc}}},
                             {"iterations", state.iterations},
                             {"residual_norm", state.residual_norm},
                             {"residual_max", max_of(res.max_norm)},
                             {"residual_l2", max_of(res.l2_norm)},
                             {"history", jhist},
                             {"profiles", jprofiles}});
}

// ---------------------------------------------------------------------------
// cone

void run_cone(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const int resolution = opt.integer("resolution", 64);
  const double eps = opt.number("eps", 0.01);
  opt.finish();

  const int n = cfg.params.n;
  if (n != 3 && n != 4)
    throw InvalidParams("cone: the link grid lives on S^(n-2), so n must be 3 or 4");
  SphereGrid grid = make_sphere_grid(n - 2, resolution);
  const double level = 1.0 / std::sqrt(static_cast<double>(n - 2));
  SphereState state{
      2, grid,
      {std::vector<double>(grid.node_count(), -level),
       std::vector<double>(grid.node_count(), level)}};

  const ResidualField res = sphere_toda_residual(state, n);
  const FarinaReport report = farina_certificate(state, n, eps);
  const double hardy = hardy_ratio(n, default_hardy_family());
  const double gap = dimension_gap(n);
  std::printf(
      "cone: residual = %.3e, A = %.6g, B = %.6g, bound = %.6g, "
      "contradiction = %s, hardy = %.6g\n",
      max_of(res.max_norm), report.per_gap[0].a, report.per_gap[0].b,
      report.stability_bound, report.contradiction ? "true" : "false", hardy);

  std::vector<std::vector<std::string>> rows;
  for (int k = 0; k < state.n_profiles; ++k)
    for (std::size_t node = 0; node < grid.node_count(); ++node)
      rows.push_back({std::to_string(k), fmt(grid.theta[node]),
                      fmt(grid.phi[node]),
                      fmt(state.profiles[static_cast<std::size_t>(k)][node])});

  ordered_json jgaps = ordered_json::array();
  for (const GapPair& g : report.per_gap)
    jgaps.push_back(ordered_json{{"a", g.a}, {"b", g.b}});
  emit_artifact(cfg, {"profile", "theta", "phi", "value"}, rows,
                ordered_json{{"n", n},
                             {"resolution", resolution},
                             {"measure", grid.measure()},
                             {"residual_max", max_of(res.max_norm)},
                             {"residual_l2", max_of(res.l2_norm)},
                             {"per_gap", jgaps},
                             {"stability_bound", report.stability_bound},
                             {"contradiction", report.contradiction},
                             {"hardy_ratio", hardy},
                             {"dimension_gap", gap}});
}

// ---------------------------------------------------------------------------
// variation-oracle

SheetStack shifted(const SheetStack& st, const PerturbationField& f,
                   double t) {
  std::vector<GraphSheet> sheets = st.sheets;
  for (std::size_t i = 0; i < sheets.size(); ++i)
    for (std::size_t k = 0; k < sheets[i].height.size(); ++k)
      sheets[i].height[k] += t * f.eta[i][k];
  return build_stack(st.grid, st.params, std::move(sheets), st.parity(0));
}

struct OracleCase {
  SheetStack stack;
  PerturbationField field;
  CylinderDomain omega;
};

OracleCase make_oracle_case(const std::string& shape, const GridSpec& grid,
                            const FractionalParams& p) {
  if (shape == "bump") {
    SheetStack st = build_stack(
        grid, p,
        {sample_sheet(grid, [](double x) { return 0.5 * std::exp(-x * x); })});
    PerturbationField f = plateau_field(st, 0.5, 1.2, {1.0});
    return {std::move(st), std::move(f), {2.0, -1.0, 1.5}};
  }
  if (shape == "pair") {
    SheetStack st = build_stack(
        grid, p,
        {sample_sheet(grid, [](double) { return 0.0; }),
         sample_sheet(grid, [](double) { return 0.8; })});
    PerturbationField f = plateau_field(st, 0.5, 1.2, {1.0, 0.0});
    return {std::move(st), std::move(f), {2.0, -1.5, 2.3}};
  }
  if (shape == "sandwich") {
    SheetStack st = build_stack(
        grid, p,
        {sample_sheet(grid, [](double) { return -0.9; }),
         sample_sheet(grid, [](double) { return 0.0; }),
         sample_sheet(grid, [](double) { return 0.9; })});
    PerturbationField f = plateau_field(st, 0.5, 1.2, {0.0, 1.0, 0.0});
    return {std::move(st), std::move(f), {2.0, -1.6, 1.6}};
  }
  throw ConfigInvalid("variation-oracle: shape must be bump, pair, or sandwich");
}

void run_variation_oracle(const ExperimentConfig& cfg) {
  OptionBag opt(cfg);
  const std::string shape = opt.text("shape", "bump");
  const int resolution = opt.integer("resolution", 401);
  const double t1 = opt.number("t1", 1e-3);
  const double t2 = opt.number("t2", 1e-2);
  opt.finish();
  if (!(t1 > 0.0) || !(t2 > 0.0))
    throw ConfigInvalid("variation-oracle: steps must be positive");

  // the window perimeter runs at full accuracy on planar graphs only, so the
  // ambient dimension is pinned and --n has no effect here
  const FractionalParams p{2, cfg.params.s};
  const GridSpec grid{1, 4.0, resolution, false};
  const OracleCase oc = make_oracle_case(shape, grid, p);

  const double fv =
      first_variation(oc.stack, oc.field, oc.omega, cfg.quadrature);
  const double sv =
      second_variation(oc.stack, oc.field, oc.omega, cfg.quadrature);
  const auto perimeter_at = [&](double t) {
    return per_s(shifted(oc.stack, oc.field, t), oc.omega, cfg.quadrature);
  };
  const double p0 = perimeter_at(0.0);
  const double fd1 = (perimeter_at(t1) - perimeter_at(-t1)) / (2.0 * t1);
  const double fd2 =
      (perimeter_at(t2) - 2.0 * p0 + perimeter_at(-t2)) / (t2 * t2);
  const double rel1 = std::abs(fd1 - fv) / std::max(std::abs(fv), 1e-12);
  const double rel2 = std::abs(fd2 - sv) / std::max(std::abs(sv), 1e-12);
  std::printf(
      "variation-oracle %s: first %.6g vs FD %.6g (rel %.2e), "
      "second %.6g vs FD %.6g (rel %.2e)\n",
      shape.c_str(), fv, fd1, rel1, sv, fd2, rel2);

  emit_artifact(
      cfg, {"shape", "quantity", "analytic", "finite_difference", "rel_error", "step"},
      {{shape, "first", fmt(fv), fmt(fd1), fmt(rel1), fmt(t1)},
       {shape, "second", fmt(sv), fmt(fd2), fmt(rel2), fmt(t2)}},
      ordered_json{{"shape", shape},
                   {"resolution", resolution},
                   {"perimeter", p0},
                   {"first",
                    ordered_json{{"analytic", fv},
                                 {"finite_difference", fd1},
                                 {"rel_error", rel1},
                                 {"step", t1}}},
                   {"second",
                    ordered_json{{"analytic", sv},
                                 {"finite_difference", fd2},
                                 {"rel_error", rel2},
                                 {"step", t2}}}});
}

std::string diagnostic_line(const ExperimentConfig& cfg,
                            const std::string& code,
                            const std::string& detail) {
  ordered_json j;
  j["error"] = code;
  j["detail"] = detail;
  j["command"] = cfg.command;
  return j.dump();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ExperimentConfig::canonical() const {
  ordered_json j;
  j["command"] = command;
  j["n"] = params.n;
  j["s"] = params.s;
  j["quadrature"] = ordered_json{{"h", quadrature.h},
                                 {"r_core", quadrature.r_core},
                                 {"r_tail", quadrature.r_tail},
                                 {"tol", quadrature.tol}};
  j["format"] = format;
  ordered_json opts = ordered_json::object();
  for (const auto& [key, value] : options) opts[key] = value;
  j["options"] = opts;
  return j.dump();
}

void ExperimentConfig::validate() const {
  const auto* end = std::end(kCommands);
  if (std::find(std::begin(kCommands), end, command) == end)
    throw ConfigInvalid("unknown command '" + command + "'");
  if (format != "csv" && format != "json")
    throw ConfigInvalid("format must be csv or json, got '" + format + "'");
  if (threads < 0 || threads > 256)
    throw ConfigInvalid("threads must be between 0 and 256");
}

namespace {

std::string scalar_to_string(const std::string& key, const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      if (!item.is_number())
        throw ConfigInvalid("config: option '" + key +
                            "': arrays may hold numbers only");
      if (!joined.empty()) joined.push_back(',');
      joined += item.is_number_integer()
                    ? std::to_string(item.get<long long>())
                    : format_double(item.get<double>());
    }
    return joined;
  }
  throw ConfigInvalid("config: option '" + key +
                      "' must be a scalar or an array of numbers");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("config: ") + e.what());
  }
  if (!doc.is_object())
    throw ConfigInvalid("config: the top level must be an object");

  ExperimentConfig cfg;
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    const ordered_json& v = item.value();
    if (key == "command") {
      if (!v.is_string()) throw ConfigInvalid("config: command must be a string");
      cfg.command = v.get<std::string>();
    } else if (key == "n") {
      if (!v.is_number_integer())
        throw ConfigInvalid("config: n must be an integer");
      cfg.params.n = v.get<int>();
    } else if (key == "s") {
      if (!v.is_number()) throw ConfigInvalid("config: s must be a number");
      cfg.params.s = v.get<double>();
    } else if (key == "output") {
      if (!v.is_string()) throw ConfigInvalid("config: output must be a string");
      cfg.output_path = v.get<std::string>();
    } else if (key == "format") {
      if (!v.is_string()) throw ConfigInvalid("config: format must be a string");
      cfg.format = v.get<std::string>();
    } else if (key == "threads") {
      if (!v.is_number_integer())
        throw ConfigInvalid("config: threads must be an integer");
      cfg.threads = v.get<int>();
    } else if (key == "quadrature") {
      if (!v.is_object())
        throw ConfigInvalid("config: quadrature must be an object");
      for (const auto& q : v.items()) {
        if (!q.value().is_number())
          throw ConfigInvalid("config: quadrature." + q.key() +
                              " must be a number");
        const double num = q.value().get<double>();
        if (q.key() == "h") cfg.quadrature.h = num;
        else if (q.key() == "r_core") cfg.quadrature.r_core = num;
        else if (q.key() == "r_tail") cfg.quadrature.r_tail = num;
        else if (q.key() == "tol") cfg.quadrature.tol = num;
        else throw ConfigInvalid("config: unknown quadrature key '" + q.key() + "'");
      }
    } else if (key == "options") {
      if (!v.is_object())
        throw ConfigInvalid("config: options must be an object");
      for (const auto& o : v.items())
        cfg.options[o.key()] = scalar_to_string(o.key(), o.value());
    } else {
      throw ConfigInvalid("config: unknown key '" + key + "'");
    }
  }
  if (cfg.command.empty())
    throw ConfigInvalid("config: 'command' is required");
  return cfg;
}

void run(const ExperimentConfig& config) {
  config.validate();
  // the pool size is read once and cached, so this must land before the
  // first parallel section of the process
  if (config.threads > 0)
    ::setenv("FRACMIN_THREADS", std::to_string(config.threads).c_str(), 1);

  if (config.command == "kernel") run_kernel(config);
  else if (config.command == "hs-eval") run_hs_eval(config);
  else if (config.command == "slab-check") run_slab_check(config);
  else if (config.command == "slab-stability") run_slab_stability(config);
  else if (config.command == "separation-fit") run_separation_fit(config);
  else if (config.command == "toda") run_toda(config);
  else if (config.command == "cone") run_cone(config);
  else run_variation_oracle(config);
}

int run_guarded(const ExperimentConfig& config) {
  try {
    run(config);
    return 0;
  } catch (const ConfigInvalid& e) {
    std::fprintf(stderr, "%s\n",
                 diagnostic_line(config, e.code(), e.what()).c_str());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "%s\n",
                 diagnostic_line(config, e.code(), e.what()).c_str());
    return 3;
  }
}

}  // namespace fracmin
