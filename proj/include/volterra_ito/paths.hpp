#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "volterra_ito/grid.hpp"
#include "volterra_ito/kernel.hpp"
#include "volterra_ito/parallel.hpp"
#include "volterra_ito/rng.hpp"

namespace vito {

/// Discrete Volterra weights on a grid. For grid point i and cell j < i:
///   mass(i,j)   = int_{s_j}^{s_{j+1}} K(t_i, r)^2 dr
///   weight(i,j) = sign(K(t_i, cell midpoint)) * sqrt(mass(i,j))
/// so that X_{t_i} = sum_{j<i} weight(i,j) z_j has variance Gamma(t_i) exactly.
class VolterraWeights {
public:
  VolterraWeights(const Kernel& k, const TimeGrid& grid) : grid_(grid) {
    if (grid.horizon() > k.horizon() * (1.0 + 1e-12)) detail::domain_fail("grid extends beyond the kernel horizon");
    const std::size_t n = grid.cells();
    mass_.resize(n * (n + 1) / 2);
    weight_.resize(mass_.size());
    for (std::size_t i = 1; i <= n; ++i) {
      const double t = grid[i];
      for (std::size_t j = 0; j < i; ++j) {
        const double m = k.cell_l2(t, grid[j], grid[j + 1]);
        const double mid = 0.5 * (grid[j] + grid[j + 1]);
        const double sign = k.eval_lag(t, t - mid) < 0.0 ? -1.0 : 1.0;
        mass_[offset(i) + j] = m;
        weight_[offset(i) + j] = sign * std::sqrt(m);
      }
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> masses(std::size_t i) const { return {mass_.data() + offset(i), i}; }
  std::span<const double> weights(std::size_t i) const { return {weight_.data() + offset(i), i}; }

private:
  static std::size_t offset(std::size_t i) noexcept { return i * (i - 1) / 2; }

  TimeGrid grid_;
  std::vector<double> mass_;
  std::vector<double> weight_;
};

/// A batch of simulated paths: standardized noise z, increments dW = sqrt(dt) z,
/// and process values X on every grid point (X[.,0] = 0). Row-major.
struct PathBundle {
  TimeGrid grid;
  std::size_t paths = 0;
  std::uint64_t first_path = 0;
  std::uint64_t seed = 0;
  std::string kernel_id;
  std::vector<double> z;
  std::vector<double> dW;
  std::vector<double> X;

  std::span<const double> z_row(std::size_t p) const { return {z.data() + p * grid.cells(), grid.cells()}; }
  std::span<const double> dW_row(std::size_t p) const { return {dW.data() + p * grid.cells(), grid.cells()}; }
  std::span<const double> X_row(std::size_t p) const { return {X.data() + p * grid.size(), grid.size()}; }
};

struct SimulationOptions {
  std::uint64_t first_path = 0;
  double budget = 2e11;  // cap on paths * cells^2
  unsigned threads = 0;  // 0: VOLTERRA_ITO_THREADS or 1
};

namespace detail {

inline constexpr std::size_t kPathBlock = 32;

inline void check_budget(std::size_t paths, std::size_t cells, double budget) {
  const double required = static_cast<double>(paths) * static_cast<double>(cells) * static_cast<double>(cells);
  if (required > budget)
    throw BudgetError("simulation needs paths*cells^2 = " + std::to_string(required) + " > budget " +
                          std::to_string(budget),
                      required, budget);
}

/// X rows for a block of paths. Each path accumulates over j in ascending
/// order, so results do not depend on the block size.
inline void apply_weights(const VolterraWeights& w, std::span<const double> z, std::size_t count,
                          std::span<double> X) {
  const std::size_t n = w.grid().cells();
  std::vector<double> zt(n * count);
  for (std::size_t p = 0; p < count; ++p)
    for (std::size_t j = 0; j < n; ++j) zt[j * count + p] = z[p * n + j];
  std::vector<double> acc(count);
  for (std::size_t i = 0; i <= n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const auto row = w.weights(i);
    for (std::size_t j = 0; j < i; ++j) {
      const double wij = row[j];
      const double* zj = zt.data() + j * count;
      for (std::size_t p = 0; p < count; ++p) acc[p] += wij * zj[p];
    }
    for (std::size_t p = 0; p < count; ++p) X[p * (n + 1) + i] = acc[p];
  }
}

}  // namespace detail

/// Fills z (paths x cells) for global path indices first..first+paths-1.
inline void draw_noise(std::uint64_t seed, std::uint64_t first_path, std::size_t paths, std::size_t cells,
                       std::span<double> z) {
  for (std::size_t p = 0; p < paths; ++p)
    RngStream(seed, first_path + p).fill_normal(0, z.subspan(p * cells, cells));
}

inline PathBundle simulate_volterra(const Kernel& k, const VolterraWeights& w, std::size_t paths, std::uint64_t seed,
                                    const SimulationOptions& opt = {}) {
  if (paths == 0) detail::domain_fail("simulate_volterra: paths must be >= 1");
  const TimeGrid& grid = w.grid();
  const std::size_t n = grid.cells();
  detail::check_budget(paths, n, opt.budget);
  PathBundle b{grid, paths, opt.first_path, seed, k.id(), {}, {}, {}};
  b.z.resize(paths * n);
  b.dW.resize(paths * n);
  b.X.resize(paths * (n + 1));
  const std::size_t blocks = (paths + detail::kPathBlock - 1) / detail::kPathBlock;
  parallel_for(blocks, resolve_threads(opt.threads), [&](std::size_t blk) {
    const std::size_t p0 = blk * detail::kPathBlock;
    const std::size_t count = std::min(detail::kPathBlock, paths - p0);
    auto z = std::span<double>(b.z).subspan(p0 * n, count * n);
    draw_noise(seed, opt.first_path + p0, count, n, z);
    for (std::size_t p = p0; p < p0 + count; ++p)
      for (std::size_t j = 0; j < n; ++j) b.dW[p * n + j] = std::sqrt(grid.width(j)) * b.z[p * n + j];
    detail::apply_weights(w, z, count, std::span<double>(b.X).subspan(p0 * (n + 1), count * (n + 1)));
  });
  return b;
}

/// Volterra discretization driven by a counter-based RNG keyed by (seed, path).
inline PathBundle simulate_volterra(const Kernel& k, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                                    const SimulationOptions& opt = {}) {
  detail::check_budget(paths, grid.cells(), opt.budget);
  return simulate_volterra(k, VolterraWeights(k, grid), paths, seed, opt);
}

/// Exact joint samples of (X_{t_1},...,X_{t_n}) from the Cholesky factor of the
/// covariance matrix. dW and z stay empty.
inline PathBundle simulate_cholesky(const Kernel& k, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                                    const QuadSpec& quad = {}, const SimulationOptions& opt = {}) {
  if (paths == 0) detail::domain_fail("simulate_cholesky: paths must be >= 1");
  const std::size_t n = grid.cells();
  detail::check_budget(paths, n, opt.budget);
  Eigen::MatrixXd cov(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = covariance(k, k, grid[i + 1], grid[j + 1], quad);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
    }
  cov.diagonal().array() += 1e-10 * cov.trace();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("simulate_cholesky: covariance matrix is not positive definite after jitter", 0.0,
                         1e-10 * cov.trace());
  const Eigen::MatrixXd L = llt.matrixL();

  PathBundle b{grid, paths, opt.first_path, seed, k.id(), {}, {}, {}};
  b.X.assign(paths * (n + 1), 0.0);
  parallel_for(paths, resolve_threads(opt.threads), [&](std::size_t p) {
    Eigen::VectorXd z(n);
    RngStream(seed, opt.first_path + p).fill_normal(0, std::span<double>(z.data(), n));
    const Eigen::VectorXd x = L.triangularView<Eigen::Lower>() * z;
    for (std::size_t i = 0; i < n; ++i) b.X[p * (n + 1) + i + 1] = x[static_cast<Eigen::Index>(i)];
  });
  return b;
}

/// CSV dump with header `path,t,X`, one row per (path, grid point).
inline void write_paths_csv(std::ostream& os, const PathBundle& b) {
  os << "path,t,X\n";
  os << std::setprecision(17);
  for (std::size_t p = 0; p < b.paths; ++p) {
    const auto x = b.X_row(p);
    for (std::size_t i = 0; i < b.grid.size(); ++i) os << (b.first_path + p) << ',' << b.grid[i] << ',' << x[i] << '\n';
  }
}

}  // namespace vito
