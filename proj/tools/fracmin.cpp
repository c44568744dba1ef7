// Command line front end over the experiment runner. A run is described by
// one ExperimentConfig, assembled here in three layers: built-in defaults,
// then the --config JSON document, then explicit flags. Exit codes: 0 on
// success, 2 for configuration problems, 3 for numerical failures.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fracmin/errors.hpp"
#include "fracmin/runner.hpp"
#include "fracmin/version.hpp"

namespace {

struct Subcommand {
  CLI::App* app = nullptr;
  // node-based map: references handed to CLI11 stay valid as entries are added
  std::map<std::string, std::string> values;

  CLI::Option* option(const std::string& key, const std::string& help) {
    return app->add_option("--" + key, values[key], help);
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fracmin::ConfigInvalid("config: cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fracmin: nearly flat stacks, slab stability scans, and singular cone "
      "checks for the sigma -> 0 fractional perimeter regime"};
  app.set_version_flag("--version", std::string(fracmin::kVersion));
  app.require_subcommand(0, 1);

  std::string config_path;
  int n = 0;
  double s = 0.0;
  std::string out_path;
  std::string format;
  int threads = 0;
  double quad_h = 0.0, quad_core = 0.0, quad_tail = 0.0, quad_tol = 0.0;

  app.add_option("--config", config_path,
                 "JSON config document; explicit flags override its fields");
  app.add_option("--n", n, "ambient dimension");
  app.add_option("--s", s, "fractional order in (0, 1); sigma = 1 - s");
  app.add_option("--out", out_path, "artifact path (written atomically)");
  app.add_option("--format", format, "artifact format: csv or json");
  app.add_option("--threads", threads,
                 "worker pool size; falls back to FRACMIN_THREADS, then to "
                 "the hardware count (results are identical for any value)");
  app.add_option("--quad-h", quad_h, "quadrature step");
  app.add_option("--quad-core", quad_core, "symmetric core radius");
  app.add_option("--quad-tail", quad_tail, "analytic tail start");
  app.add_option("--quad-tol", quad_tol, "quadrature tolerance");

  std::map<std::string, Subcommand> subs;
  const auto sub = [&](const std::string& name,
                       const std::string& help) -> Subcommand& {
    Subcommand& s_ = subs[name];
    s_.app = app.add_subcommand(name, help);
    s_.app->fallthrough();
    return s_;
  };

  {
    sub("kernel",
        "Kernel normalization constants for (n, s). CSV columns: n, s, "
        "sigma, c_ns, c_circ, f_infinity, omega_rel_error.");
  }
  {
    Subcommand& c = sub(
        "hs-eval",
        "Fractional mean curvature along one sheet of a graph stack (every "
        "node in 1-D, the center row in 2-D). CSV columns: node, x1 [, x2], "
        "value.");
    c.option("shape", "flat, bump, or pair (default bump)");
    c.option("resolution", "grid nodes per axis (default 201)");
    c.option("extent", "grid half width (default 4)");
    c.option("amplitude", "bump height (default 0.5)");
    c.option("gap", "pair separation (default 0.8)");
    c.option("sheet", "sheet to evaluate (default 0)");
  }
  {
    Subcommand& c = sub(
        "slab-check",
        "H_s at every boundary of a periodic slab ladder (or an explicit "
        "breakpoint list). CSV columns: boundary, position, hs.");
    c.option("sigma", "1 - s (default from --s)");
    c.option("cstar", "ladder spacing in units of sqrt(sigma) (default 5)");
    c.option("sheets", "slab face count, even (default 6)");
    c.option("breakpoints", "explicit breakpoints, comma separated");
    c.option("cell", "period for explicit breakpoints");
  }
  {
    Subcommand& c = sub(
        "slab-stability",
        "Worst stability margin over the plateau mode family per spacing, "
        "with the bisected threshold. CSV columns: sigma, spacing, "
        "min_margin, worst_mode_id.");
    c.option("sigma", "1 - s (required)");
    c.option("spacings", "spacing grid, comma separated (default "
             "0.2,0.8,3.2,12.8 times sqrt(sigma))");
    c.option("multipliers", "spacing grid in units of sqrt(sigma)");
    c.option("radius", "window radius (default 4)");
    c.option("zmin", "window floor (default -30)");
    c.option("zmax", "window ceiling (default 30)");
  }
  {
    Subcommand& c = sub(
        "separation-fit",
        "Stability thresholds across sigma and the fitted power law. CSV "
        "columns: sigma, d_star, l2_observable. JSON carries the exponent.");
    c.option("sigmas", "sigma values, comma separated (default "
             "0.2,0.1,0.05,0.02)");
    c.option("multipliers", "spacing grid in units of sqrt(sigma)");
    c.app->add_flag("--robust", "drop outliers during the fit");
    c.option("radius", "window radius (default 4)");
    c.option("zmin", "window floor (default -30)");
    c.option("zmax", "window ceiling (default 30)");
  }
  {
    Subcommand& c = sub(
        "toda", "Newton solve of the interaction system from product-ansatz "
                "boundary data. CSV columns: iteration, residual, "
                "step_length.");
    c.option("profiles", "profile count N (default 2)");
    c.option("domain", "interval, rectangle, or disc (default disc)");
    c.option("resolution", "grid nodes per axis (default 41)");
    c.option("extent", "domain half width (default 1)");
    c.option("g0", "radial profile center value (default 1)");
    c.option("substeps", "radial integrator substeps (default 4)");
    c.option("tol", "Newton residual target (default 1e-10)");
    c.option("seed", "initial guess: harmonic or ansatz (default harmonic)");
  }
  {
    Subcommand& c = sub(
        "cone", "Constant-profile state on the sphere: residual, gap "
                "integral certificate, Hardy ratio, dimension gap. CSV "
                "columns: profile, theta, phi, value.");
    c.option("resolution", "latitude bands on S^2, nodes on S^1 (default 64)");
    c.option("eps", "slack in the stability bound (default 0.01)");
  }
  {
    Subcommand& c = sub(
        "variation-oracle",
        "First and second variation against finite differences of the "
        "window perimeter along a graph flow. CSV columns: shape, quantity, "
        "analytic, finite_difference, rel_error, step.");
    c.option("shape", "bump, pair, or sandwich (default bump)");
    c.option("resolution", "grid nodes (default 401)");
    c.option("t1", "first difference step (default 1e-3)");
    c.option("t2", "second difference step (default 1e-2)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    fracmin::ExperimentConfig cfg;
    if (app.count("--config") > 0)
      cfg = fracmin::parse_config(read_file(config_path));

    if (app.count("--n") > 0) cfg.params.n = n;
    if (app.count("--s") > 0) cfg.params.s = s;
    if (app.count("--out") > 0) cfg.output_path = out_path;
    if (app.count("--format") > 0) cfg.format = format;
    if (app.count("--threads") > 0) cfg.threads = threads;
    if (app.count("--quad-h") > 0) cfg.quadrature.h = quad_h;
    if (app.count("--quad-core") > 0) cfg.quadrature.r_core = quad_core;
    if (app.count("--quad-tail") > 0) cfg.quadrature.r_tail = quad_tail;
    if (app.count("--quad-tol") > 0) cfg.quadrature.tol = quad_tol;

    for (const auto& [name, sc] : subs) {
      if (!sc.app->parsed()) continue;
      cfg.command = name;
      for (const auto& [key, value] : sc.values)
        if (sc.app->count("--" + key) > 0) cfg.options[key] = value;
      if (name == "separation-fit" && sc.app->count("--robust") > 0)
        cfg.options["robust"] = "true";
    }
    if (cfg.command.empty())
      throw fracmin::ConfigInvalid(
          "no command given (pass a subcommand or a config with one)");

    return fracmin::run_guarded(cfg);
  } catch (const fracmin::ConfigInvalid& e) {
    nlohmann::ordered_json j;
    j["error"] = e.code();
    j["detail"] = e.what();
    std::fprintf(stderr, "%s\n", j.dump().c_str());
    return 2;
  }
}
