#include "fracmin/toda.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "fracmin/errors.hpp"

namespace fracmin {

double toda_coupling(const std::vector<double>& values, int i) {
  double acc = 0.0;
  const int n = static_cast<int>(values.size());
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
    acc += sign / (values[j] - values[i]);
  }
  return 2.0 * acc;
}

BalancingVector solve_balancing(int n) {
  if (n < 1) throw InvalidParams("solve_balancing: n must be >= 1");
  if (n == 1) return {{0.0}, 0.0};

  // Equispaced antisymmetric start, gaps of 2 (exact already for n <= 3).
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) a[i] = static_cast<double>(n - 1 - 2 * i);

  std::vector<double> vals(static_cast<std::size_t>(n));
  const auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& f) {
    for (int i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = x[i];
    for (int i = 0; i < n; ++i) f[i] = x[i] - toda_coupling(vals, i);
  };

  Eigen::VectorXd f(n), fnew(n), step(n), trial(n);
  residual(a, f);
  double norm = f.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < 200 && norm > 1e-12; ++iter) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      jac(i, i) = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
        const double inv2 = 1.0 / ((a[j] - a[i]) * (a[j] - a[i]));
        jac(i, i) -= 2.0 * sign * inv2;
        jac(i, j) += 2.0 * sign * inv2;
      }
    }
    step = jac.partialPivLu().solve(-f);

    // Keep the iterate strictly descending: cut to 90% of the distance to
    // the first collision, then halve until the residual actually drops.
    double t = 1.0;
    for (int i = 0; i + 1 < n; ++i) {
      const double gap = a[i] - a[i + 1];
      const double dgap = step[i] - step[i + 1];
      if (dgap < 0.0 && t * (-dgap) > 0.9 * gap) t = 0.9 * gap / (-dgap);
    }
    bool accepted = false;
    for (; t > 1e-14; t *= 0.5) {
      trial = a + t * step;
      residual(trial, fnew);
      const double nn = fnew.lpNorm<Eigen::Infinity>();
      if (nn < norm) {
        a = trial;
        f = fnew;
        norm = nn;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw NewtonDiverged("solve_balancing: damping stalled at residual " +
                           std::to_string(norm));
  }
  if (norm > 1e-12)
    throw NewtonDiverged(
        "solve_balancing: no convergence in 200 iterations, residual " +
        std::to_string(norm));

  BalancingVector out;
  out.a.assign(a.data(), a.data() + n);
  out.residual = norm;
  return out;
}

double RadialProfile::at(double rq) const {
  if (r.size() < 2 || value.size() != r.size() || slope.size() != r.size())
    throw ConfigInvalid("RadialProfile: inconsistent sample arrays");
  if (rq < r.front() - 1e-12 || rq > r.back() + 1e-12)
    throw BadDomain("RadialProfile::at: query outside sampled range");
  rq = std::clamp(rq, r.front(), r.back());
  const auto it = std::upper_bound(r.begin(), r.end(), rq);
  const std::size_t k =
      std::min(r.size() - 2, static_cast<std::size_t>(
                                 std::max<std::ptrdiff_t>(
                                     0, (it - r.begin()) - 1)));
  const double h = r[k + 1] - r[k];
  const double u = (rq - r[k]) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
  const double h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u);
  const double h11 = u * u * (u - 1);
  return h00 * value[k] + h10 * h * slope[k] + h01 * value[k + 1] +
         h11 * h * slope[k + 1];
}

double RadialProfile::slope_at(double rq) const {
  if (r.size() < 2 || value.size() != r.size() || slope.size() != r.size())
    throw ConfigInvalid("RadialProfile: inconsistent sample arrays");
  if (rq < r.front() - 1e-12 || rq > r.back() + 1e-12)
    throw BadDomain("RadialProfile::slope_at: query outside sampled range");
  rq = std::clamp(rq, r.front(), r.back());
  const auto it = std::upper_bound(r.begin(), r.end(), rq);
  const std::size_t k =
      std::min(r.size() - 2, static_cast<std::size_t>(
                                 std::max<std::ptrdiff_t>(
                                     0, (it - r.begin()) - 1)));
  const double h = r[k + 1] - r[k];
  const double u = (rq - r[k]) / h;
  const double d00 = 6 * u * (u - 1) / h;
  const double d10 = (1 - u) * (1 - 3 * u);
  const double d01 = -d00;
  const double d11 = u * (3 * u - 2);
  return d00 * value[k] + d10 * slope[k] + d01 * value[k + 1] +
         d11 * slope[k + 1];
}

RadialProfile lane_emden_radial(int m, double r_max, double g0, int substeps) {
  if (m < 1) throw InvalidParams("lane_emden_radial: m must be >= 1");
  if (!(r_max > 0.0) || !(g0 > 0.0))
    throw InvalidParams("lane_emden_radial: r_max and g0 must be positive");
  if (substeps < 1)
    throw ConfigInvalid("lane_emden_radial: substeps must be >= 1");

  constexpr int kCells = 4096;
  const double h = r_max / kCells;
  const double hs = h / substeps;

  // Regular center: g = g0 + c2 r^2 + c4 r^4 + O(r^6). The first substep is
  // taken from this series so the friction term is never evaluated at r = 0.
  const double c2 = 1.0 / (2.0 * m * g0);
  const double c4 = -c2 / ((4.0 * m + 8.0) * g0 * g0);

  const auto accel = [m](double r, double g, double v) {
    return 1.0 / g - (m - 1) * v / r;
  };

  RadialProfile out;
  out.r.resize(kCells + 1);
  out.value.resize(kCells + 1);
  out.slope.resize(kCells + 1);
  out.r[0] = 0.0;
  out.value[0] = g0;
  out.slope[0] = 0.0;

  double r = hs;
  double g = g0 + c2 * r * r + c4 * r * r * r * r;
  double v = 2.0 * c2 * r + 4.0 * c4 * r * r * r;
  int taken = 1;  // substeps completed since r = 0

  for (int cell = 1; cell <= kCells; ++cell) {
    const int target = cell * substeps;
    for (; taken < target; ++taken) {
      const double k1g = v, k1v = accel(r, g, v);
      const double k2g = v + 0.5 * hs * k1v,
                   k2v = accel(r + 0.5 * hs, g + 0.5 * hs * k1g,
                               v + 0.5 * hs * k1v);
      const double k3g = v + 0.5 * hs * k2v,
                   k3v = accel(r + 0.5 * hs, g + 0.5 * hs * k2g,
                               v + 0.5 * hs * k2v);
      const double k4g = v + hs * k3v,
                   k4v = accel(r + hs, g + hs * k3g, v + hs * k3v);
      g += hs / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g);
      v += hs / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
      r += hs;
      if (!(g > 0.0) || !(v > -1e-15) || !std::isfinite(g))
        throw BlowdownToZero(
            "lane_emden_radial: profile lost positivity near r = " +
            std::to_string(r));
    }
    out.r[static_cast<std::size_t>(cell)] = cell * h;
    out.value[static_cast<std::size_t>(cell)] = g;
    out.slope[static_cast<std::size_t>(cell)] = v;
  }
  return out;
}

void TodaDomain::validate() const {
  grid.validate();
  if (grid.dim != 1 && grid.dim != 2)
    throw DimensionTooLarge("TodaDomain: grid dim must be 1 or 2");
  if (grid.periodic)
    throw ConfigInvalid("TodaDomain: Dirichlet problems need a boundary");
  if (disc && grid.dim != 2)
    throw ConfigInvalid("TodaDomain: disc mask needs a dim 2 grid");
}

bool TodaDomain::interior(int node) const {
  const int res = grid.resolution;
  if (grid.dim == 1) return node > 0 && node < res - 1;
  const int i = node / res;
  const int j = node % res;
  if (i <= 0 || i >= res - 1 || j <= 0 || j >= res - 1) return false;
  if (!disc) return true;
  const double x1 = grid.coord(i);
  const double x2 = grid.coord(j);
  return x1 * x1 + x2 * x2 <
         grid.extent * grid.extent * (1.0 - 1e-12);
}

namespace {

struct Discretization {
  std::vector<int> unknown;    // node -> unknown id, -1 at Dirichlet nodes
  std::vector<int> node_of;    // unknown id -> node
  std::vector<std::array<int, 4>> neighbors;  // per unknown, -1 padded
  double inv_h2 = 0.0;
  int degree = 0;  // 2 * dim
};

Discretization discretize(const TodaDomain& dom) {
  const int res = dom.grid.resolution;
  const std::size_t nodes = dom.grid.node_count();
  Discretization d;
  d.unknown.assign(nodes, -1);
  const double h = dom.grid.spacing();
  d.inv_h2 = 1.0 / (h * h);
  d.degree = 2 * dom.grid.dim;
  for (std::size_t p = 0; p < nodes; ++p) {
    if (!dom.interior(static_cast<int>(p))) continue;
    d.unknown[p] = static_cast<int>(d.node_of.size());
    d.node_of.push_back(static_cast<int>(p));
  }
  d.neighbors.resize(d.node_of.size());
  for (std::size_t u = 0; u < d.node_of.size(); ++u) {
    const int p = d.node_of[u];
    if (dom.grid.dim == 1) {
      d.neighbors[u] = {p - 1, p + 1, -1, -1};
    } else {
      d.neighbors[u] = {p - res, p + res, p - 1, p + 1};
    }
  }
  return d;
}

// Residual of the discrete system at every interior node, flattened as
// unknown-major within each profile block.
void system_residual(const Discretization& d,
                     const std::vector<std::vector<double>>& g, int n,
                     Eigen::VectorXd& f) {
  const std::size_t m = d.node_of.size();
  std::vector<double> col(static_cast<std::size_t>(n));
  for (std::size_t u = 0; u < m; ++u) {
    const int p = d.node_of[u];
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] =
        g[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
    for (int i = 0; i < n; ++i) {
      double lap = -static_cast<double>(d.degree) *
                   col[static_cast<std::size_t>(i)];
      for (int k = 0; k < d.degree; ++k)
        lap += g[static_cast<std::size_t>(i)]
                [static_cast<std::size_t>(d.neighbors[u][k])];
      lap *= d.inv_h2;
      f[static_cast<Eigen::Index>(i) * static_cast<Eigen::Index>(m) +
        static_cast<Eigen::Index>(u)] = lap - toda_coupling(col, i);
    }
  }
}

double min_gap(const std::vector<std::vector<double>>& g) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < g.size(); ++i)
    for (std::size_t p = 0; p < g[i].size(); ++p)
      gap = std::min(gap, g[i + 1][p] - g[i][p]);
  return gap;
}

}  // namespace

TodaState toda_solve(int n_profiles, const TodaDomain& domain,
                     const std::vector<std::vector<double>>& boundary_data,
                     const std::vector<std::vector<double>>& initial_guess,
                     double tol) {
  domain.validate();
  if (n_profiles < 1) throw InvalidParams("toda_solve: need n >= 1 profiles");
  if (!(tol > 0.0)) throw ConfigInvalid("toda_solve: tol must be positive");
  const std::size_t nodes = domain.grid.node_count();
  const std::size_t nn = static_cast<std::size_t>(n_profiles);
  if (boundary_data.size() != nn)
    throw GridMismatch("toda_solve: one boundary array per profile");
  for (const auto& b : boundary_data)
    if (b.size() != nodes)
      throw GridMismatch("toda_solve: boundary array has wrong node count");

  const Discretization d = discretize(domain);
  const std::size_t m = d.node_of.size();

  for (std::size_t p = 0; p < nodes; ++p) {
    if (d.unknown[p] >= 0) continue;
    for (std::size_t i = 0; i + 1 < nn; ++i)
      if (!(boundary_data[i + 1][p] > boundary_data[i][p]))
        throw OrderingViolated(
            "toda_solve: boundary data must be strictly ascending");
  }

  // Profiles carry boundary values at Dirichlet nodes throughout.
  std::vector<std::vector<double>> g(nn);
  Eigen::SparseMatrix<double> lap(static_cast<Eigen::Index>(m),
                                  static_cast<Eigen::Index>(m));
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m * static_cast<std::size_t>(d.degree + 1));
    for (std::size_t u = 0; u < m; ++u) {
      trip.emplace_back(static_cast<int>(u), static_cast<int>(u),
                        -static_cast<double>(d.degree) * d.inv_h2);
      for (int k = 0; k < d.degree; ++k) {
        const int q = d.unknown[static_cast<std::size_t>(d.neighbors[u][k])];
        if (q >= 0)
          trip.emplace_back(static_cast<int>(u), q, d.inv_h2);
      }
    }
    lap.setFromTriplets(trip.begin(), trip.end());
  }

  if (initial_guess.empty()) {
    // Discrete harmonic interpolant per profile; the maximum principle keeps
    // the interior strictly ordered whenever the boundary data is.
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(lap);
    lu.factorize(lap);
    if (lu.info() != Eigen::Success)
      throw NumericalError("LinearSolveFailed",
                           "toda_solve: Laplace factorization failed");
    for (std::size_t i = 0; i < nn; ++i) {
      g[i] = boundary_data[i];
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
      for (std::size_t u = 0; u < m; ++u)
        for (int k = 0; k < d.degree; ++k) {
          const std::size_t q = static_cast<std::size_t>(d.neighbors[u][k]);
          if (d.unknown[q] < 0)
            rhs[static_cast<Eigen::Index>(u)] -=
                d.inv_h2 * boundary_data[i][q];
        }
      const Eigen::VectorXd sol = lu.solve(rhs);
      for (std::size_t u = 0; u < m; ++u)
        g[i][static_cast<std::size_t>(d.node_of[u])] =
            sol[static_cast<Eigen::Index>(u)];
    }
  } else {
    if (initial_guess.size() != nn)
      throw GridMismatch("toda_solve: one initial guess per profile");
    for (std::size_t i = 0; i < nn; ++i) {
      if (initial_guess[i].size() != nodes)
        throw GridMismatch("toda_solve: initial guess has wrong node count");
      g[i] = initial_guess[i];
      for (std::size_t p = 0; p < nodes; ++p)
        if (d.unknown[p] < 0) g[i][p] = boundary_data[i][p];
    }
  }
  if (!(min_gap(g) > 0.0))
    throw OrderingViolated("toda_solve: initial profiles must be ordered");

  const Eigen::Index dim = static_cast<Eigen::Index>(nn * m);
  Eigen::VectorXd f(dim), fnew(dim);
  system_residual(d, g, n_profiles, f);
  double norm = m == 0 ? 0.0 : f.lpNorm<Eigen::Infinity>();

  TodaState state;
  state.n_profiles = n_profiles;
  state.domain = domain;
  state.iterations = 0;

  std::vector<std::vector<double>> trial(nn);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  constexpr int kMaxIter = 60;
  while (norm > tol) {
    if (state.iterations >= kMaxIter)
      throw NewtonDiverged("toda_solve: no convergence in " +
                           std::to_string(kMaxIter) +
                           " iterations, residual " + std::to_string(norm));

    // Jacobian: block-diagonal Laplacian plus node-local coupling terms.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nn * m * static_cast<std::size_t>(d.degree + 1) +
                 nn * nn * m);
    for (std::size_t i = 0; i < nn; ++i) {
      const int base = static_cast<int>(i * m);
      for (std::size_t u = 0; u < m; ++u) {
        trip.emplace_back(base + static_cast<int>(u), base + static_cast<int>(u),
                          -static_cast<double>(d.degree) * d.inv_h2);
        for (int k = 0; k < d.degree; ++k) {
          const int q = d.unknown[static_cast<std::size_t>(d.neighbors[u][k])];
          if (q >= 0)
            trip.emplace_back(base + static_cast<int>(u), base + q, d.inv_h2);
        }
      }
    }
    for (std::size_t u = 0; u < m; ++u) {
      const std::size_t p = static_cast<std::size_t>(d.node_of[u]);
      for (std::size_t i = 0; i < nn; ++i) {
        double diag = 0.0;
        for (std::size_t j = 0; j < nn; ++j) {
          if (j == i) continue;
          const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
          const double gap = g[j][p] - g[i][p];
          const double inv2 = 1.0 / (gap * gap);
          diag -= 2.0 * sign * inv2;
          trip.emplace_back(static_cast<int>(i * m + u),
                            static_cast<int>(j * m + u), 2.0 * sign * inv2);
        }
        trip.emplace_back(static_cast<int>(i * m + u),
                          static_cast<int>(i * m + u), diag);
      }
    }
    Eigen::SparseMatrix<double> jac(dim, dim);
    jac.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success)
      throw NumericalError("LinearSolveFailed",
                           "toda_solve: Jacobian factorization failed");
    const Eigen::VectorXd step = lu.solve(-f);

    // Fraction to boundary: at most 90% of the way to the first collision
    // between adjacent profiles.
    double t = 1.0;
    for (std::size_t i = 0; i + 1 < nn; ++i)
      for (std::size_t u = 0; u < m; ++u) {
        const std::size_t p = static_cast<std::size_t>(d.node_of[u]);
        const double gap = g[i + 1][p] - g[i][p];
        const double dgap = step[static_cast<Eigen::Index>((i + 1) * m + u)] -
                            step[static_cast<Eigen::Index>(i * m + u)];
        if (dgap < 0.0 && t * (-dgap) > 0.9 * gap) t = 0.9 * gap / (-dgap);
      }

    bool accepted = false;
    for (; t > 1e-12; t *= 0.5) {
      for (std::size_t i = 0; i < nn; ++i) {
        trial[i] = g[i];
        for (std::size_t u = 0; u < m; ++u)
          trial[i][static_cast<std::size_t>(d.node_of[u])] +=
              t * step[static_cast<Eigen::Index>(i * m + u)];
      }
      system_residual(d, trial, n_profiles, fnew);
      const double nrm = fnew.lpNorm<Eigen::Infinity>();
      if (nrm < norm) {
        g.swap(trial);
        f.swap(fnew);
        norm = nrm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (min_gap(g) < 1e-8)
        throw OrderingCollapse(
            "toda_solve: profiles within 1e-8 and no admissible step");
      throw NewtonDiverged("toda_solve: damping stalled at residual " +
                           std::to_string(norm));
    }
    ++state.iterations;
    state.history.push_back({state.iterations, norm, t});
    if (min_gap(g) < 1e-8)
      throw OrderingCollapse("toda_solve: profiles collapsed within 1e-8");
  }

  state.profiles = std::move(g);
  state.residual_norm = norm;
  return state;
}

ResidualField toda_residual(const TodaState& state) {
  state.domain.validate();
  const std::size_t nodes = state.domain.grid.node_count();
  const std::size_t nn = static_cast<std::size_t>(state.n_profiles);
  if (state.profiles.size() != nn)
    throw GridMismatch("toda_residual: profile count mismatch");
  for (const auto& gi : state.profiles)
    if (gi.size() != nodes)
      throw GridMismatch("toda_residual: profile has wrong node count");

  const Discretization d = discretize(state.domain);
  const std::size_t m = d.node_of.size();
  Eigen::VectorXd f(static_cast<Eigen::Index>(nn * m));
  system_residual(d, state.profiles, state.n_profiles, f);

  ResidualField out;
  out.pointwise.assign(nn, std::vector<double>(nodes, 0.0));
  out.max_norm.assign(nn, 0.0);
  out.l2_norm.assign(nn, 0.0);
  const double cell = std::pow(state.domain.grid.spacing(),
                               state.domain.grid.dim);
  for (std::size_t i = 0; i < nn; ++i) {
    double sq = 0.0;
    for (std::size_t u = 0; u < m; ++u) {
      const double v = f[static_cast<Eigen::Index>(i * m + u)];
      out.pointwise[i][static_cast<std::size_t>(d.node_of[u])] = v;
      out.max_norm[i] = std::max(out.max_norm[i], std::abs(v));
      sq += v * v;
    }
    out.l2_norm[i] = std::sqrt(sq * cell);
  }
  return out;
}

}  // namespace fracmin
