#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "volterra_ito/bracket.hpp"
#include "volterra_ito/kernel.hpp"
#include "volterra_ito/parallel.hpp"
#include "volterra_ito/paths.hpp"
#include "volterra_ito/test_function.hpp"

namespace vito {

/// Outcome of one statistical or quadrature check.
/// pass <=> |estimate - reference| <= z * se + bias_bound (uniqueness adds a detection clause).
struct VerificationReport {
  std::string identity;
  double estimate = 0.0;
  double reference = 0.0;
  double se = 0.0;
  double bias_bound = 0.0;
  std::size_t grid_n = 0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  bool pass = false;
  double z = 4.0;

  double tolerance() const { return z * se + bias_bound; }
  bool within_tolerance() const { return std::abs(estimate - reference) <= tolerance(); }

  nlohmann::ordered_json to_json() const {
    return {{"identity", identity}, {"estimate", estimate}, {"reference", reference}, {"se", se},
            {"bias_bound", bias_bound}, {"grid_n", grid_n}, {"paths", paths}, {"seed", seed},
            {"pass", pass}, {"z", z}};
  }

  std::string summary_line() const {
    std::ostringstream os;
    os.precision(6);
    os << (pass ? "PASS " : "FAIL ") << identity << ": estimate=" << estimate << " reference=" << reference
       << " tol=" << tolerance() << " (se=" << se << ", bias=" << bias_bound << ", n=" << grid_n
       << ", paths=" << paths << ")";
    return os.str();
  }
};

struct VerifyOptions {
  double z = 4.0;
  std::size_t gh_order = 32;
  double quad_tol = 1e-6;        // acceptance tolerance of the deterministic quadrature route
  double bias_constant = -1.0;   // C in C * mesh^{min(2H,1)}; negative -> 2T (Brownian calibration)
  double detection_factor = 5.0; // uniqueness: |residual| must exceed this multiple of the tolerance
  unsigned threads = 0;
  std::size_t block = 256;       // paths per work item; results do not depend on it
  QuadSpec quad{};
};

namespace detail {

inline double bias_bound(const VerifyOptions& opt, double horizon, double mesh, double hurst) {
  const double c = opt.bias_constant < 0.0 ? 2.0 * horizon : opt.bias_constant;
  return c * std::pow(mesh, std::min(2.0 * hurst, 1.0));
}

/// Per-time data for conditioning at t = t_index: weights w_j, and residual
/// variances v_j = sum_{i >= j} mass_i (v_0 = Gamma(t), v_t = 0).
struct ConditioningRow {
  std::vector<double> weights;
  std::vector<double> residual_var;
};

inline ConditioningRow conditioning_row(const Kernel& k, const TimeGrid& grid, std::size_t t_index) {
  ConditioningRow row;
  const double t = grid[t_index];
  row.weights.resize(t_index);
  row.residual_var.assign(t_index + 1, 0.0);
  std::vector<double> mass(t_index);
  for (std::size_t j = 0; j < t_index; ++j) {
    mass[j] = k.cell_l2(t, grid[j], grid[j + 1]);
    const double mid = 0.5 * (grid[j] + grid[j + 1]);
    row.weights[j] = (k.eval_lag(t, t - mid) < 0.0 ? -1.0 : 1.0) * std::sqrt(mass[j]);
  }
  for (std::size_t j = t_index; j-- > 0;) row.residual_var[j] = row.residual_var[j + 1] + mass[j];
  return row;
}

inline ConditioningRow conditioning_row(const VolterraWeights& w, std::size_t t_index) {
  ConditioningRow row;
  const auto wt = w.weights(t_index);
  const auto ms = w.masses(t_index);
  row.weights.assign(wt.begin(), wt.end());
  row.residual_var.assign(t_index + 1, 0.0);
  for (std::size_t j = t_index; j-- > 0;) row.residual_var[j] = row.residual_var[j + 1] + ms[j];
  return row;
}

/// sum_j E[phi'(X_t) | F_{s_j}] w_j z_j: the adapted (left-point) Clark-Ocone sum.
inline double clark_ocone_path(const ConditioningRow& row, const TestFunction& phi, std::span<const double> z,
                               std::size_t gh_order) {
  double mean = 0.0, sum = 0.0;
  for (std::size_t j = 0; j < row.weights.size(); ++j) {
    const double wz = row.weights[j] * z[j];
    sum += phi.gaussian_expectation(1, mean, row.residual_var[j], gh_order) * wz;
    mean += wz;
  }
  return sum;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

/// Runs fn(global_path, z_row) over all paths in fixed-size blocks and
/// collects one value per path.
template <class Fn>
std::vector<double> per_path(std::size_t paths, std::size_t cells, std::uint64_t seed, const VerifyOptions& opt,
                             Fn&& fn) {
  std::vector<double> out(paths);
  const std::size_t block = std::max<std::size_t>(opt.block, 1);
  const std::size_t blocks = (paths + block - 1) / block;
  parallel_for(blocks, resolve_threads(opt.threads), [&](std::size_t b) {
    const std::size_t p0 = b * block, count = std::min(block, paths - p0);
    std::vector<double> z(count * cells);
    draw_noise(seed, p0, count, cells, z);
    for (std::size_t p = 0; p < count; ++p)
      out[p0 + p] = fn(p0 + p, std::span<const double>(z).subspan(p * cells, cells));
  });
  return out;
}

}  // namespace detail

/// Discrete E[X_t | F_r] and Var(X_t | F_r) for one path's standardized noise z.
inline std::pair<double, double> conditional_mean_and_var(const Kernel& k, const TimeGrid& grid,
                                                          std::span<const double> z, std::size_t r_index,
                                                          std::size_t t_index) {
  if (r_index > t_index) detail::domain_fail("conditional_mean_and_var: r_index ", r_index, " > t_index ", t_index);
  if (t_index > grid.cells()) detail::domain_fail("conditional_mean_and_var: t_index out of range");
  if (z.size() < t_index) detail::domain_fail("conditional_mean_and_var: path shorter than t_index");
  if (t_index == 0) return {0.0, 0.0};
  const auto row = detail::conditioning_row(k, grid, t_index);
  return {detail::dot(std::span<const double>(row.weights).first(r_index), z.first(r_index)), row.residual_var[r_index]};
}

/// Mehler/heat-kernel smoothing: E[f(m + sqrt(v) Z)] by Gauss-Hermite of the given order.
template <class F>
double mehler_conditional(F&& phi_prime, double m, double v, std::size_t order = 32) {
  if (v < 0.0) detail::domain_fail("mehler_conditional: variance must be >= 0, got ", v);
  if (v == 0.0) return phi_prime(m);
  return gauss_hermite(order).expect(phi_prime, m, v);
}

/// Same for phi' of a test function; exact Hermite moments when phi is polynomial.
inline double mehler_conditional(const TestFunction& phi, double m, double v, std::size_t order = 32) {
  if (v < 0.0) detail::domain_fail("mehler_conditional: variance must be >= 0, got ", v);
  if (v == 0.0) return phi.derivative(1, m);
  return phi.gaussian_expectation(1, m, v, order);
}

/// Per-path Clark-Ocone Ito sum up to grid point t_index.
inline std::vector<double> clark_ocone_ito_sum(const Kernel& k, const PathBundle& bundle, const TestFunction& phi,
                                               std::size_t t_index, const VerifyOptions& opt = {}) {
  if (bundle.kernel_id != k.id()) detail::domain_fail("clark_ocone_ito_sum: bundle was simulated with another kernel");
  if (bundle.z.empty()) detail::domain_fail("clark_ocone_ito_sum: bundle carries no driving noise");
  if (t_index > bundle.grid.cells()) detail::domain_fail("clark_ocone_ito_sum: t_index out of range");
  const auto row = detail::conditioning_row(k, bundle.grid, t_index);
  std::vector<double> out(bundle.paths);
  for (std::size_t p = 0; p < bundle.paths; ++p)
    out[p] = detail::clark_ocone_path(row, phi, bundle.z_row(p), opt.gh_order);
  return out;
}

/// E[phi(X_t)] = phi(0) + 1/2 int_0^t E[phi''(X_s)] dGamma(s).
/// Quadrature route: the Stieltjes sum takes E[phi''] under N(0, v) with v at
/// the Gamma-midpoint of each cell, against the closed-form (or Gauss-Hermite)
/// left side at N(0, Gamma(t)). With paths > 0 a Monte Carlo estimate of the
/// left side is reported as well.
inline std::vector<VerificationReport> verify_mean_identity(const Kernel& k, const TestFunction& phi,
                                                            const TimeGrid& grid, std::size_t paths,
                                                            std::uint64_t seed, double t,
                                                            const VerifyOptions& opt = {}) {
  const std::size_t ti = grid.index_of(t);
  const EnergyFunction gamma = energy_function(k, grid);
  std::vector<double> cells(grid.cells(), 0.0);
  for (std::size_t i = 0; i < ti; ++i)
    cells[i] = phi.gaussian_expectation(2, 0.0, 0.5 * (gamma.values[i] + gamma.values[i + 1]), opt.gh_order);
  const double rhs = phi.value(0.0) + 0.5 * stieltjes_integrate_cells(cells, gamma, {}, 0, ti);
  const double var_t = energy_at(k, grid[ti]);
  const double lhs = phi.closed_form_expectation(0.0, var_t).value_or(phi.gaussian_expectation(0, 0.0, var_t, opt.gh_order));

  std::vector<VerificationReport> out;
  VerificationReport q{"mean_identity/quadrature", rhs, lhs, 0.0, opt.quad_tol, grid.cells(), 0, seed, false, opt.z};
  q.pass = q.within_tolerance();
  out.push_back(q);

  if (paths > 0) {
    const auto row = detail::conditioning_row(k, grid, ti);
    const auto values = detail::per_path(paths, grid.cells(), seed, opt, [&](std::size_t, std::span<const double> z) {
      return phi.value(detail::dot(row.weights, z.first(ti)));
    });
    const SampleStats s = sample_stats(values);
    VerificationReport mc{"mean_identity/monte_carlo", s.mean, rhs, s.se, opt.quad_tol, grid.cells(), paths, seed,
                          false, opt.z};
    mc.pass = mc.within_tolerance();
    out.push_back(mc);
  }
  return out;
}

struct PathwiseResult {
  std::vector<VerificationReport> rungs;
  VerificationReport ladder;  // nonincreasing E[residual^2] across rungs, 1 SE slack
  bool pass = false;
};

/// Per-path residual phi(X_t) - phi(0) - (Clark-Ocone Ito sum) - 1/2 int phi''(X_s) dGamma
/// on one uniform grid of `cells` cells over the kernel horizon.
inline std::vector<double> pathwise_residuals(const Kernel& k, const TestFunction& phi, std::size_t cells,
                                              std::size_t paths, std::uint64_t seed, double t,
                                              const VerifyOptions& opt = {}) {
  const TimeGrid grid = TimeGrid::uniform(k.horizon(), cells);
  const std::size_t ti = grid.index_of(t);
  const EnergyFunction gamma = energy_function(k, grid);
  const bool flat = phi.constant_second_derivative();
  const double flat_correction = flat ? 0.5 * phi.derivative(2, 0.0) * gamma.values[ti] : 0.0;
  const double phi0 = phi.value(0.0);

  if (flat) {
    const auto row = detail::conditioning_row(k, grid, ti);
    return detail::per_path(paths, cells, seed, opt, [&](std::size_t, std::span<const double> z) {
      const double x = detail::dot(row.weights, z.first(ti));
      return phi.value(x) - phi0 - detail::clark_ocone_path(row, phi, z, opt.gh_order) - flat_correction;
    });
  }
  const VolterraWeights w(k, grid);
  const auto row = detail::conditioning_row(w, ti);
  std::vector<double> out(paths);
  const std::size_t block = std::max<std::size_t>(opt.block, 1);
  const std::size_t blocks = (paths + block - 1) / block;
  parallel_for(blocks, resolve_threads(opt.threads), [&](std::size_t b) {
    const std::size_t p0 = b * block, count = std::min(block, paths - p0);
    std::vector<double> z(count * cells), X(count * (cells + 1)), f(cells + 1, 0.0);
    draw_noise(seed, p0, count, cells, z);
    detail::apply_weights(w, z, count, X);
    for (std::size_t p = 0; p < count; ++p) {
      const auto zp = std::span<const double>(z).subspan(p * cells, cells);
      const auto xp = std::span<const double>(X).subspan(p * (cells + 1), cells + 1);
      for (std::size_t i = 0; i <= cells; ++i) f[i] = phi.derivative(2, xp[i]);
      const double correction = 0.5 * stieltjes_integrate(f, gamma, 0, ti);
      out[p0 + p] = phi.value(xp[ti]) - phi0 - detail::clark_ocone_path(row, phi, zp, opt.gh_order) - correction;
    }
  });
  return out;
}

/// E[residual^2] on each rung of a grid ladder; each rung must fall within
/// z*SE + C*mesh^{min(2H,1)} of zero and the ladder must not increase.
inline PathwiseResult verify_pathwise_formula(const Kernel& k, const TestFunction& phi,
                                              const std::vector<std::size_t>& ladder, std::size_t paths,
                                              std::uint64_t seed, double t, const VerifyOptions& opt = {}) {
  if (ladder.empty()) detail::domain_fail("verify_pathwise_formula: empty grid ladder");
  if (paths < 2) detail::domain_fail("verify_pathwise_formula: need at least 2 paths");
  PathwiseResult result;
  for (std::size_t cells : ladder) {
    auto res = pathwise_residuals(k, phi, cells, paths, seed, t, opt);
    for (auto& r : res) r *= r;
    const SampleStats s = sample_stats(res);
    const double mesh = k.horizon() / static_cast<double>(cells);
    VerificationReport rep{"pathwise/n=" + std::to_string(cells), s.mean, 0.0, s.se,
                           detail::bias_bound(opt, k.horizon(), mesh, k.regularity()), cells, paths, seed, false, opt.z};
    rep.pass = rep.within_tolerance();
    result.rungs.push_back(rep);
  }
  double worst = 0.0;
  for (std::size_t i = 1; i < result.rungs.size(); ++i)
    worst = std::max(worst, result.rungs[i].estimate - result.rungs[i - 1].estimate - result.rungs[i].se);
  result.ladder = {"pathwise/ladder_monotone", worst, 0.0, 0.0, 0.0, ladder.back(), paths, seed, worst <= 0.0, 1.0};
  result.pass = result.ladder.pass && result.rungs.back().pass;
  return result;
}

enum class Phi2 { product, sum_of_squares };

/// Mean identities of the two-dimensional formula with a shared driver:
/// phi = xy gives E[X1 X2] = <X1, X2>_t; phi = x^2 + y^2 gives two univariate checks.
inline std::vector<VerificationReport> verify_multivariate(const Kernel& k1, const Kernel& k2, Phi2 phi,
                                                           const TimeGrid& grid, std::size_t paths,
                                                           std::uint64_t seed, double t,
                                                           const VerifyOptions& opt = {}) {
  if (paths < 2) detail::domain_fail("verify_multivariate: need at least 2 paths");
  const std::size_t ti = grid.index_of(t);
  const auto r1 = detail::conditioning_row(k1, grid, ti);
  const auto r2 = detail::conditioning_row(k2, grid, ti);
  const double bias = detail::bias_bound(opt, grid.horizon(), grid.max_width(), std::min(k1.regularity(), k2.regularity()));
  auto run = [&](const std::string& name, double reference, auto&& f) {
    const auto v = detail::per_path(paths, grid.cells(), seed, opt, [&](std::size_t, std::span<const double> z) {
      return f(detail::dot(r1.weights, z.first(ti)), detail::dot(r2.weights, z.first(ti)));
    });
    const SampleStats s = sample_stats(v);
    VerificationReport rep{name, s.mean, reference, s.se, bias, grid.cells(), paths, seed, false, opt.z};
    rep.pass = rep.within_tolerance();
    return rep;
  };
  if (phi == Phi2::product)
    return {run("multivariate/xy", covariance(k1, k2, grid[ti], grid[ti], opt.quad), [](double x, double y) { return x * y; })};
  return {run("multivariate/x^2", energy_at(k1, grid[ti]), [](double x, double) { return x * x; }),
          run("multivariate/y^2", energy_at(k2, grid[ti]), [](double, double y) { return y * y; })};
}

struct UniquenessResult {
  VerificationReport report;  // estimate: residual under nu; reference: predicted shift
  double residual = 0.0;
  double predicted_shift = 0.0;
  double detection_ratio = 0.0;  // |residual| / tolerance
};

/// Mean identity with the corrupted integrator nu = Gamma + eps * t. The
/// residual must equal the shift 1/2 eps int_0^t E[phi''(X_s)] ds and, for eps != 0,
/// exceed detection_factor times the identity's tolerance.
inline UniquenessResult verify_uniqueness_perturbation(const Kernel& k, const TestFunction& phi, double eps,
                                                       const TimeGrid& grid, double t, const VerifyOptions& opt = {}) {
  const std::size_t ti = grid.index_of(t);
  const EnergyFunction gamma = energy_function(k, grid);
  std::vector<double> nu = gamma.values;
  for (std::size_t i = 0; i < nu.size(); ++i) nu[i] += eps * grid[i];
  const EnergyFunction corrupted = EnergyFunction::from_values(grid, std::move(nu), gamma.kernel_id + "+eps*t");

  std::vector<double> cells(grid.cells(), 0.0);
  double shift = 0.0;
  for (std::size_t i = 0; i < ti; ++i) {
    cells[i] = phi.gaussian_expectation(2, 0.0, 0.5 * (gamma.values[i] + gamma.values[i + 1]), opt.gh_order);
    shift += cells[i] * grid.width(i);
  }
  shift *= 0.5 * eps;
  const double rhs = phi.value(0.0) + 0.5 * stieltjes_integrate_cells(cells, corrupted, {}, 0, ti);
  const double var_t = energy_at(k, grid[ti]);
  const double lhs = phi.closed_form_expectation(0.0, var_t).value_or(phi.gaussian_expectation(0, 0.0, var_t, opt.gh_order));

  UniquenessResult r;
  r.residual = rhs - lhs;
  r.predicted_shift = shift;
  r.report = {"uniqueness", r.residual, shift, 0.0, opt.quad_tol, grid.cells(), 0, 0, false, opt.z};
  r.detection_ratio = std::abs(r.residual) / r.report.tolerance();
  r.report.pass = r.report.within_tolerance() && (eps == 0.0 || r.detection_ratio >= opt.detection_factor);
  return r;
}

}  // namespace vito
