#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include "volterra_ito/bracket.hpp"
#include "volterra_ito/errors.hpp"
#include "volterra_ito/itoverify.hpp"
#include "volterra_ito/kernel.hpp"
#include "volterra_ito/parallel.hpp"

namespace vito {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  double condition = 1.0;  // 2-norm condition of the final passive-set normal matrix
};

/// Lawson-Hanson active-set solver for min ||Ax - b|| subject to x >= 0.
inline NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, std::size_t max_iter = 0) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size()) detail::domain_fail("nnls: A has ", A.rows(), " rows but b has ", b.size());
  if (max_iter == 0) max_iter = 30 * static_cast<std::size_t>(n) + 30;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.norm() * std::max<double>(A.rows(), n) *
                     std::max(1.0, b.norm());

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) z[idx[c]] = zp[static_cast<Eigen::Index>(c)];
  };

  NnlsResult out;
  Eigen::VectorXd w = A.transpose() * (b - A * x);
  Eigen::VectorXd z(n);
  while (out.iterations < max_iter) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w[j] > best) best = w[j], t = j;
    if (t < 0) break;
    passive[t] = true;
    for (;;) {
      ++out.iterations;
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0.0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && x[j] <= tol * 1e-3) passive[j] = false, x[j] = 0.0;
      if (out.iterations >= max_iter) break;
    }
    w = A.transpose() * (b - A * x);
  }
  if (out.iterations >= max_iter)
    throw NumericalError("nnls: iteration limit reached", (A * x - b).norm(), static_cast<double>(max_iter));

  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < n; ++j)
    if (passive[j]) idx.push_back(j);
  if (!idx.empty()) {
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ap);
    const auto& s = svd.singularValues();
    const double ratio = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
    out.condition = ratio * ratio;
  }
  out.x = x;
  out.residual_norm = (A * x - b).norm();
  return out;
}

struct FitOptions {
  std::optional<double> lambda_min;  // default 1/T
  std::optional<double> lambda_max;  // default 1/t_min
  std::size_t panels_per_decade = 12;
  double condition_limit = 1e14;
};

/// Rates at the geometric midpoints of n log-uniform cells covering [lambda_min, lambda_max]:
/// lambda_j = lambda_min * r^{j + 1/2}, r = (lambda_max / lambda_min)^{1/n}. Each rate stands for
/// its cell of the Laplace representation int e^{-lambda tau} m(dlambda).
inline std::vector<double> geometric_rates(std::size_t n, double lambda_min, double lambda_max) {
  if (n == 0) detail::domain_fail("fit_expsum: n_terms must be >= 1");
  if (!(lambda_min > 0.0 && lambda_max >= lambda_min))
    detail::domain_fail("fit_expsum: need 0 < lambda_min <= lambda_max, got ", lambda_min, ", ", lambda_max);
  std::vector<double> r(n);
  const double step = std::log(lambda_max / lambda_min) / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) r[j] = lambda_min * std::exp(step * (static_cast<double>(j) + 0.5));
  return r;
}

struct ExpSumFit {
  Kernel kernel;
  double condition = 1.0;
  double residual = 0.0;  // weighted least-squares residual over lags >= t_min
};

/// Nonnegative exponential-sum fit of a stationary kernel with rates on a
/// geometric grid. Minimizes int_{t_min}^T (T - lag) (K(lag) - K_n(lag))^2 dlag,
/// i.e. the L^2(mu) distance restricted to lags >= t_min.
inline ExpSumFit fit_expsum_detailed(const Kernel& target, std::size_t n_terms, double t_min,
                                     const FitOptions& opt = {}) {
  const double T = target.horizon();
  if (n_terms == 0) detail::domain_fail("fit_expsum: n_terms must be >= 1");
  if (!(t_min > 0.0 && t_min < T)) detail::domain_fail("fit_expsum: t_min must lie in (0, T), got ", t_min);
  if (!target.stationary()) detail::domain_fail("fit_expsum: target kernel must depend on t - s only");
  if (const auto* es = std::get_if<ExpSumKernel>(&target.family()); es && es->rates.size() == n_terms)
    return {target, 1.0, 0.0};

  const auto rates = geometric_rates(n_terms, opt.lambda_min.value_or(1.0 / T), opt.lambda_max.value_or(1.0 / t_min));

  // Log-spaced Gauss-Legendre panels on [t_min, T].
  using GL = boost::math::quadrature::gauss<double, 20>;
  const auto& xs = GL::abscissa();
  const auto& ws = GL::weights();
  std::vector<double> nodes, weights;
  const double decades = std::log10(T / t_min);
  const std::size_t panels = std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil(decades * opt.panels_per_decade)));
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = t_min * std::pow(T / t_min, static_cast<double>(p) / panels);
    const double b = t_min * std::pow(T / t_min, static_cast<double>(p + 1) / panels);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < xs.size(); ++q) {
      for (int sgn : {-1, 1}) {
        if (xs[q] == 0.0 && sgn < 0) continue;
        const double tau = mid + sgn * half * xs[q];
        nodes.push_back(tau);
        weights.push_back(half * ws[q] * (T - tau));
      }
    }
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(n_terms));
  Eigen::VectorXd b(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    const double sw = std::sqrt(weights[q]);
    b[static_cast<Eigen::Index>(q)] = sw * target.eval_lag(T, nodes[q]);
    for (std::size_t j = 0; j < n_terms; ++j)
      A(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = sw * std::exp(-rates[j] * nodes[q]);
  }
  // Unit columns: NNLS is invariant under positive column scaling, conditioning is not.
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    if (!(scale[j] > 0.0)) scale[j] = 1.0;
    A.col(j) /= scale[j];
  }
  const NnlsResult sol = nnls(A, b);
  if (!(sol.condition <= opt.condition_limit))
    throw ConditioningError("fit_expsum: normal equations too ill-conditioned (condition " +
                                std::to_string(sol.condition) + ")",
                            sol.condition, opt.condition_limit);
  std::vector<double> c(n_terms);
  for (std::size_t j = 0; j < n_terms; ++j) c[j] = sol.x[static_cast<Eigen::Index>(j)] / scale[static_cast<Eigen::Index>(j)];
  return {Kernel::exp_sum(std::move(c), rates, T), sol.condition, sol.residual_norm};
}

inline Kernel fit_expsum(const Kernel& target, std::size_t n_terms, double t_min, const FitOptions& opt = {}) {
  return fit_expsum_detailed(target, n_terms, t_min, opt).kernel;
}

struct ApproxOptions {
  FitOptions fit{};
  double t_min = 1e-3;
  double hurst_lo = -1.0;  // window for the Hurst estimate of the last fit; negative -> t_min
  double hurst_hi = -1.0;  // negative -> 100 t_min
  double ratio_slack = 0.1;
  double bracket_constant = 1.0;  // C in the term-by-term tolerance z*SE + C*sup bracket error
  VerifyOptions verify{};
};

struct ApproxReport {
  std::vector<std::size_t> n_list;
  std::vector<double> l2_err;
  std::vector<double> bracket_sup_err;
  std::vector<double> mean_residual;
  std::vector<double> condition;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> rates;
  std::vector<bool> cauchy_schwarz;      // pointwise bound held on every grid point
  std::vector<double> cs_worst_margin;  // max_t |dGamma| - d_n(t)(|K_n|_t + |K|_t), <= 0 when the bound holds
  double target_mean_residual = 0.0;
  double term_by_term_tolerance = 0.0;
  std::optional<HurstEstimate> fitted_hurst;
  double hurst_lo = 0.0, hurst_hi = 0.0;
  std::size_t grid_n = 0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double ratio_slack = 0.1;

  bool l2_strictly_decreasing() const {
    for (std::size_t i = 1; i < l2_err.size(); ++i)
      if (!(l2_err[i] < l2_err[i - 1])) return false;
    return true;
  }
  bool bracket_nonincreasing() const {
    for (std::size_t i = 1; i < bracket_sup_err.size(); ++i)
      if (bracket_sup_err[i] > bracket_sup_err[i - 1]) return false;
    return true;
  }
  bool cauchy_schwarz_everywhere() const {
    return std::all_of(cauchy_schwarz.begin(), cauchy_schwarz.end(), [](bool b) { return b; });
  }
  /// bracket ratio <= kernel ratio + slack for consecutive n.
  bool ratios_tracked() const {
    for (std::size_t i = 1; i < l2_err.size(); ++i) {
      if (bracket_sup_err[i - 1] == 0.0 || l2_err[i - 1] == 0.0) continue;
      if (bracket_sup_err[i] / bracket_sup_err[i - 1] > l2_err[i] / l2_err[i - 1] + ratio_slack) return false;
    }
    return true;
  }
  bool term_by_term() const {
    return std::all_of(mean_residual.begin(), mean_residual.end(), [&](double r) {
      return std::abs(r - target_mean_residual) <= term_by_term_tolerance;
    });
  }
  bool pass() const {
    return l2_strictly_decreasing() && bracket_nonincreasing() && cauchy_schwarz_everywhere() && term_by_term();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json fits = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n_list.size(); ++i)
      fits.push_back({{"n", n_list[i]}, {"weights", weights[i]}, {"rates", rates[i]}, {"condition", condition[i]},
                      {"cauchy_schwarz", static_cast<bool>(cauchy_schwarz[i])}, {"cs_worst_margin", cs_worst_margin[i]}});
    nlohmann::ordered_json j = {{"identity", "approx"},
                                {"n", n_list},
                                {"l2_err", l2_err},
                                {"bracket_sup_err", bracket_sup_err},
                                {"mean_residual", mean_residual},
                                {"target_mean_residual", target_mean_residual},
                                {"term_by_term_tolerance", term_by_term_tolerance},
                                {"fits", fits},
                                {"l2_strictly_decreasing", l2_strictly_decreasing()},
                                {"bracket_nonincreasing", bracket_nonincreasing()},
                                {"cauchy_schwarz", cauchy_schwarz_everywhere()},
                                {"ratio_tracking", ratios_tracked()},
                                {"ratio_slack", ratio_slack},
                                {"term_by_term", term_by_term()},
                                {"grid_n", grid_n},
                                {"paths", paths},
                                {"seed", seed}};
    if (fitted_hurst)
      j["fitted_hurst"] = {{"hurst", fitted_hurst->hurst}, {"r2", fitted_hurst->r2}, {"points", fitted_hurst->points},
                           {"window", {hurst_lo, hurst_hi}}};
    j["pass"] = pass();
    return j;
  }
};

inline void write_approx_csv(std::ostream& os, const ApproxReport& r) {
  os << "n,l2_err,bracket_sup_err,mean_residual\n";
  os.precision(17);
  for (std::size_t i = 0; i < r.n_list.size(); ++i)
    os << r.n_list[i] << ',' << r.l2_err[i] << ',' << r.bracket_sup_err[i] << ',' << r.mean_residual[i] << '\n';
}

/// Fits each n, then measures kernel, bracket and mean-identity convergence.
inline ApproxReport convergence_suite(const Kernel& target, const std::vector<std::size_t>& n_list,
                                      const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                                      const ApproxOptions& opt = {}) {
  if (n_list.empty()) detail::domain_fail("convergence_suite: empty n list");
  if (std::abs(grid.horizon() - target.horizon()) > 1e-12 * target.horizon())
    detail::domain_fail("convergence_suite: grid must span the kernel horizon");
  const std::size_t m = n_list.size();
  ApproxReport r;
  r.n_list = n_list;
  r.grid_n = grid.cells();
  r.paths = paths;
  r.seed = seed;
  r.ratio_slack = opt.ratio_slack;
  r.l2_err.resize(m);
  r.bracket_sup_err.resize(m);
  r.mean_residual.resize(m);
  r.condition.resize(m);
  r.weights.resize(m);
  r.rates.resize(m);
  r.cauchy_schwarz.resize(m);
  r.cs_worst_margin.resize(m);

  const TestFunction phi = TestFunction::cosine();
  const EnergyFunction g_target = energy_function(target, grid);
  const double T = grid.horizon();
  const auto residual_of = [&](const Kernel& k, double& se) {
    const auto reps = verify_mean_identity(k, phi, grid, paths, seed, T, opt.verify);
    se = reps.size() > 1 ? reps[1].se : 0.0;
    return reps.front().estimate - reps.front().reference;
  };
  double target_se = 0.0;
  r.target_mean_residual = residual_of(target, target_se);

  std::vector<std::optional<Kernel>> fits(m);
  std::vector<double> ses(m, 0.0);
  std::vector<std::uint8_t> cs_ok(m, 0);
  parallel_for(m, resolve_threads(opt.verify.threads), [&](std::size_t i) {
    const ExpSumFit fit = fit_expsum_detailed(target, n_list[i], opt.t_min, opt.fit);
    const auto& es = std::get<ExpSumKernel>(fit.kernel.family());
    r.weights[i] = es.weights;
    r.rates[i] = es.rates;
    r.condition[i] = fit.condition;
    r.l2_err[i] = kernel_l2mu_distance(fit.kernel, target, opt.verify.quad);
    const EnergyFunction g = energy_function(fit.kernel, grid);
    double sup = 0.0, worst = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t < grid.size(); ++t) {
      const double diff = std::abs(g.values[t] - g_target.values[t]);
      sup = std::max(sup, diff);
      const double d = kernel_l2_distance_at(fit.kernel, target, grid[t], opt.verify.quad);
      const double bound = d * (std::sqrt(g.values[t]) + std::sqrt(g_target.values[t]));
      // quadrature of d carries relative error ~ rel_tol
      worst = std::max(worst, diff - bound * (1.0 + 10.0 * opt.verify.quad.rel_tol));
    }
    r.bracket_sup_err[i] = sup;
    r.cs_worst_margin[i] = worst;
    cs_ok[i] = worst <= 1e-14 * std::max(1.0, g_target.values.back());
    r.mean_residual[i] = residual_of(fit.kernel, ses[i]);
    fits[i] = fit.kernel;
  });
  for (std::size_t i = 0; i < m; ++i) r.cauchy_schwarz[i] = cs_ok[i] != 0;

  double worst_se = target_se;
  for (double s : ses) worst_se = std::max(worst_se, s);
  const double sup_err = *std::max_element(r.bracket_sup_err.begin(), r.bracket_sup_err.end());
  r.term_by_term_tolerance = opt.verify.z * worst_se + 2.0 * opt.verify.quad_tol + opt.bracket_constant * sup_err;

  r.hurst_lo = opt.hurst_lo > 0.0 ? opt.hurst_lo : opt.t_min;
  r.hurst_hi = opt.hurst_hi > 0.0 ? opt.hurst_hi : 100.0 * opt.t_min;
  try {
    r.fitted_hurst = estimate_hurst(energy_function(*fits.back(), grid), r.hurst_lo, r.hurst_hi);
  } catch (const DomainError&) {
    r.fitted_hurst.reset();
  }
  return r;
}

}  // namespace vito
