#include "fracmin/cone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "fracmin/errors.hpp"

namespace fracmin {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

double SphereGrid::measure() const { return dim == 1 ? 2.0 * kPi : 4.0 * kPi; }

void SphereGrid::validate() const {
  if (dim != 1 && dim != 2)
    throw InvalidParams("SphereGrid: sphere dimension must be 1 or 2");
  const std::size_t expect =
      static_cast<std::size_t>(n_theta) * static_cast<std::size_t>(n_phi);
  if (n_theta < 4 || (dim == 2 && n_phi < 4) || (dim == 1 && n_phi != 1))
    throw ConfigInvalid("SphereGrid: too few nodes for the stencil");
  if (theta.size() != expect || phi.size() != expect ||
      weight.size() != expect)
    throw GridMismatch("SphereGrid: node arrays disagree with the layout");
}

SphereGrid make_sphere_grid(int dim, int resolution) {
  if (dim != 1 && dim != 2)
    throw InvalidParams("make_sphere_grid: sphere dimension must be 1 or 2");
  if (resolution < 4)
    throw ConfigInvalid("make_sphere_grid: resolution must be >= 4");

  SphereGrid g;
  g.dim = dim;
  if (dim == 1) {
    g.n_theta = resolution;
    g.n_phi = 1;
    const double dtheta = 2.0 * kPi / resolution;
    g.theta.resize(static_cast<std::size_t>(resolution));
    g.phi.assign(static_cast<std::size_t>(resolution), 0.0);
    g.weight.assign(static_cast<std::size_t>(resolution), dtheta);
    for (int k = 0; k < resolution; ++k)
      g.theta[static_cast<std::size_t>(k)] = k * dtheta;
    return g;
  }

  g.n_theta = resolution;
  g.n_phi = 2 * resolution;
  const double dtheta = kPi / g.n_theta;
  const double dphi = 2.0 * kPi / g.n_phi;
  const std::size_t nodes =
      static_cast<std::size_t>(g.n_theta) * static_cast<std::size_t>(g.n_phi);
  g.theta.resize(nodes);
  g.phi.resize(nodes);
  g.weight.resize(nodes);
  for (int i = 0; i < g.n_theta; ++i) {
    // exact area of the band between the two cell latitudes, split evenly
    const double band = std::cos(i * dtheta) - std::cos((i + 1) * dtheta);
    for (int j = 0; j < g.n_phi; ++j) {
      const std::size_t k =
          static_cast<std::size_t>(i) * static_cast<std::size_t>(g.n_phi) +
          static_cast<std::size_t>(j);
      g.theta[k] = (i + 0.5) * dtheta;
      g.phi[k] = (j + 0.5) * dphi;
      g.weight[k] = band * dphi;
    }
  }
  return g;
}

std::vector<double> SphereGrid::laplacian(const std::vector<double>& u) const {
  validate();
  if (u.size() != node_count())
    throw GridMismatch("SphereGrid::laplacian: value count mismatch");

  std::vector<double> out(u.size(), 0.0);
  if (dim == 1) {
    const double inv_h2 =
        1.0 / (weight[0] * weight[0]);  // uniform spacing = weight
    const int m = n_theta;
    for (int k = 0; k < m; ++k) {
      const std::size_t prev = static_cast<std::size_t>((k + m - 1) % m);
      const std::size_t next = static_cast<std::size_t>((k + 1) % m);
      out[static_cast<std::size_t>(k)] =
          (u[prev] - 2.0 * u[static_cast<std::size_t>(k)] + u[next]) * inv_h2;
    }
    return out;
  }

  // finite volume: theta-face conductance sin(theta_face)*dphi/dtheta,
  // phi-face conductance dtheta/(sin(theta_center)*dphi), divided by the
  // exact cell area. Pole faces carry sin(0) = sin(pi) = 0, closing the
  // sphere without special cases.
  const double dtheta = kPi / n_theta;
  const double dphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    const double k_up = std::sin((i + 1) * dtheta) * dphi / dtheta;
    const double k_dn = std::sin(i * dtheta) * dphi / dtheta;
    const double k_phi = dtheta / (std::sin((i + 0.5) * dtheta) * dphi);
    for (int j = 0; j < n_phi; ++j) {
      const std::size_t c = static_cast<std::size_t>(i * n_phi + j);
      double flux = 0.0;
      if (i + 1 < n_theta)
        flux += k_up * (u[c + static_cast<std::size_t>(n_phi)] - u[c]);
      if (i > 0) flux += k_dn * (u[c - static_cast<std::size_t>(n_phi)] - u[c]);
      const std::size_t east =
          static_cast<std::size_t>(i * n_phi + (j + 1) % n_phi);
      const std::size_t west =
          static_cast<std::size_t>(i * n_phi + (j + n_phi - 1) % n_phi);
      flux += k_phi * (u[east] - 2.0 * u[c] + u[west]);
      out[c] = flux / weight[c];
    }
  }
  return out;
}

double SphereGrid::dirichlet_energy(const std::vector<double>& u) const {
  validate();
  if (u.size() != node_count())
    throw GridMismatch("SphereGrid::dirichlet_energy: value count mismatch");

  double acc = 0.0;
  if (dim == 1) {
    const double inv_h = 1.0 / weight[0];
    const int m = n_theta;
    for (int k = 0; k < m; ++k) {
      const double d = u[static_cast<std::size_t>((k + 1) % m)] -
                       u[static_cast<std::size_t>(k)];
      acc += d * d * inv_h;
    }
    return acc;
  }

  const double dtheta = kPi / n_theta;
  const double dphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    const double k_up = std::sin((i + 1) * dtheta) * dphi / dtheta;
    const double k_phi = dtheta / (std::sin((i + 0.5) * dtheta) * dphi);
    for (int j = 0; j < n_phi; ++j) {
      const std::size_t c = static_cast<std::size_t>(i * n_phi + j);
      if (i + 1 < n_theta) {
        const double d = u[c + static_cast<std::size_t>(n_phi)] - u[c];
        acc += k_up * d * d;
      }
      const double d =
          u[static_cast<std::size_t>(i * n_phi + (j + 1) % n_phi)] - u[c];
      acc += k_phi * d * d;
    }
  }
  return acc;
}

ResidualField sphere_toda_residual(const SphereState& state, int n) {
  state.grid.validate();
  if (n < 3) throw InvalidParams("sphere_toda_residual: n must be >= 3");
  const std::size_t nodes = state.grid.node_count();
  const std::size_t nn = static_cast<std::size_t>(state.n_profiles);
  if (state.n_profiles < 1 || state.profiles.size() != nn)
    throw GridMismatch("sphere_toda_residual: profile count mismatch");
  for (const auto& gi : state.profiles)
    if (gi.size() != nodes)
      throw GridMismatch("sphere_toda_residual: profile node count mismatch");
  for (std::size_t i = 0; i + 1 < nn; ++i)
    for (std::size_t p = 0; p < nodes; ++p)
      if (!(state.profiles[i + 1][p] > state.profiles[i][p]))
        throw OrderingViolated(
            "sphere_toda_residual: profiles must be strictly ascending");

  std::vector<std::vector<double>> lap(nn);
  for (std::size_t i = 0; i < nn; ++i)
    lap[i] = state.grid.laplacian(state.profiles[i]);

  ResidualField out;
  out.pointwise.assign(nn, std::vector<double>(nodes, 0.0));
  out.max_norm.assign(nn, 0.0);
  out.l2_norm.assign(nn, 0.0);
  std::vector<double> col(nn);
  std::vector<double> sq(nn, 0.0);
  for (std::size_t p = 0; p < nodes; ++p) {
    for (std::size_t i = 0; i < nn; ++i) col[i] = state.profiles[i][p];
    for (std::size_t i = 0; i < nn; ++i) {
      const double r = lap[i][p] + (n - 2) * col[i] -
                       toda_coupling(col, static_cast<int>(i));
      out.pointwise[i][p] = r;
      out.max_norm[i] = std::max(out.max_norm[i], std::abs(r));
      sq[i] += state.grid.weight[p] * r * r;
    }
  }
  for (std::size_t i = 0; i < nn; ++i) out.l2_norm[i] = std::sqrt(sq[i]);
  return out;
}

namespace {

void check_cutoff(const HardyCutoff& c) {
  if (!(c.inner_start > 0.0) || !(c.inner_start <= c.inner_end) ||
      !(c.inner_end <= c.outer_start) || !(c.outer_start <= c.outer_end) ||
      !(c.outer_end <= 1.0))
    throw ConfigInvalid(
        "hardy_ratio: cutoff needs 0 < inner_start <= inner_end <= "
        "outer_start <= outer_end <= 1");
}

}  // namespace

std::vector<HardyCutoff> default_hardy_family() {
  std::vector<HardyCutoff> fam;
  for (double ramp : {2.0, 5.0, 10.0, 20.0, 40.0}) {
    for (double plateau : {0.0, ramp}) {
      HardyCutoff c;
      c.outer_end = 1.0;
      c.outer_start = std::exp(-ramp);
      c.inner_end = std::exp(-(ramp + plateau));
      c.inner_start = std::exp(-(2.0 * ramp + plateau));
      fam.push_back(c);
    }
  }
  return fam;
}

double hardy_ratio(int n, const std::vector<HardyCutoff>& family) {
  if (n < 3) throw InvalidParams("hardy_ratio: n must be >= 3");
  if (family.empty()) throw ConfigInvalid("hardy_ratio: empty cutoff family");

  // With psi = r^{-lambda} m(r), lambda = (n-3)/2, and m linear in log r on
  // the ramps, both integrals collapse in t = log r: the cross term
  // integrates to zero over a ramp pair, leaving
  //   numerator   = 1/L_in + 1/L_out + lambda^2 * D
  //   denominator = D = L_in/3 + plateau + L_out/3.
  const double lambda = 0.5 * (n - 3);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : family) {
    check_cutoff(c);
    const double l_in = std::log(c.inner_end / c.inner_start);
    const double l_out = std::log(c.outer_end / c.outer_start);
    const double plateau = std::log(c.outer_start / c.inner_end);
    const double denom = l_in / 3.0 + plateau + l_out / 3.0;
    if (!(denom > 1e-14))
      throw DegenerateDenominator(
          "hardy_ratio: cutoff has no mass between its endpoints");
    // a collapsed ramp means a jump cutoff with infinite Dirichlet energy;
    // it simply never attains the infimum
    const double ramps =
        (l_in > 0.0 && l_out > 0.0)
            ? 1.0 / l_in + 1.0 / l_out
            : std::numeric_limits<double>::infinity();
    best = std::min(best, lambda * lambda + ramps / denom);
  }
  return best;
}

FarinaReport farina_certificate(const SphereState& state, int n, double eps) {
  state.grid.validate();
  if (n < 3) throw InvalidParams("farina_certificate: n must be >= 3");
  if (!(eps > 0.0))
    throw ConfigInvalid("farina_certificate: eps must be positive");
  if (state.n_profiles < 2)
    throw ConfigInvalid("farina_certificate: needs at least two profiles");
  const std::size_t nodes = state.grid.node_count();
  const std::size_t nn = static_cast<std::size_t>(state.n_profiles);
  if (state.profiles.size() != nn)
    throw GridMismatch("farina_certificate: profile count mismatch");
  for (const auto& gi : state.profiles)
    if (gi.size() != nodes)
      throw GridMismatch("farina_certificate: profile node count mismatch");

  const double mass = state.grid.measure();
  FarinaReport report;
  report.stability_bound = ((n - 3) * (n - 3) + eps) / 4.0 * mass;

  std::vector<double> logv(nodes);
  for (std::size_t i = 0; i + 1 < nn; ++i) {
    GapPair gp;
    double inv_sq = 0.0;
    for (std::size_t p = 0; p < nodes; ++p) {
      const double v = state.profiles[i + 1][p] - state.profiles[i][p];
      if (!(v > 0.0))
        throw NonPositiveGap(
            "farina_certificate: consecutive profiles touch or cross");
      logv[p] = std::log(v);
      inv_sq += state.grid.weight[p] / (v * v);
    }
    gp.a = state.grid.dirichlet_energy(logv) + (n - 2) * mass;
    gp.b = 4.0 * inv_sq;
    report.per_gap.push_back(gp);
  }

  // the data contradict stability when the dimensional gap is open and no
  // gap index is compatible with both integral inequalities
  bool fires = (n - 2) * mass > report.stability_bound;
  if (fires)
    for (const auto& gp : report.per_gap)
      if (gp.a <= gp.b && gp.b <= report.stability_bound) {
        fires = false;
        break;
      }
  report.contradiction = fires;
  return report;
}

std::string to_json_string(const FarinaReport& report) {
  nlohmann::ordered_json j;
  j["per_gap"] = nlohmann::ordered_json::array();
  for (const auto& gp : report.per_gap)
    j["per_gap"].push_back({{"a", gp.a}, {"b", gp.b}});
  j["stability_bound"] = report.stability_bound;
  j["contradiction"] = report.contradiction;
  return j.dump(2);
}

double dimension_gap(int n) {
  if (n < 3) throw InvalidParams("dimension_gap: n must be >= 3");
  const double shift = n - 3;
  return (n - 2) - shift * shift / 4.0;
}

}  // namespace fracmin
