#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "volterra_ito/grid.hpp"
#include "volterra_ito/kernel.hpp"

namespace vito {

/// Sampled energy function / intrinsic bracket on a grid. `jumps[i]` is the
/// atom Gamma(t_i) - Gamma(t_i-) carried by grid point i (zero for kernels).
struct EnergyFunction {
  TimeGrid grid;
  std::vector<double> values;
  std::vector<double> jumps;
  bool monotone = true;
  std::string kernel_id;

  /// Builds from values on the grid, with optional atoms; checks Gamma(0) = 0.
  static EnergyFunction from_values(TimeGrid grid, std::vector<double> values, std::string id = {},
                                    std::vector<double> jumps = {}) {
    if (values.size() != grid.size()) detail::domain_fail("energy function: one value per grid point required");
    if (values.front() != 0.0) detail::domain_fail("energy function: Gamma(0) must be 0");
    if (jumps.empty()) jumps.assign(values.size(), 0.0);
    if (jumps.size() != values.size()) detail::domain_fail("energy function: one jump per grid point required");
    if (jumps.front() != 0.0) detail::domain_fail("energy function: no atom allowed at t = 0");
    bool mono = true;
    for (std::size_t i = 1; i < values.size(); ++i) mono = mono && values[i] >= values[i - 1] && jumps[i] >= 0.0;
    return {std::move(grid), std::move(values), std::move(jumps), mono, std::move(id)};
  }

  double total_variation() const {
    double tv = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) tv += std::abs(values[i] - values[i - 1]);
    return tv;
  }
};

/// Gamma(t_i) = sum_{j<i} kernel_cell_l2(k, t_i, s_j, s_{j+1}): the variance the
/// discretized process carries at each grid point.
inline EnergyFunction energy_function(const Kernel& k, const TimeGrid& grid) {
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < i; ++j) s += k.cell_l2(grid[i], grid[j], grid[j + 1]);
    v[i] = s;
  }
  return EnergyFunction::from_values(grid, std::move(v), k.id());
}

/// <X^1, X^2>(t_i) = int_0^{t_i} K1(t_i,r) K2(t_i,r) dr. May be non-monotone.
inline EnergyFunction cross_bracket(const Kernel& k1, const Kernel& k2, const TimeGrid& grid, const QuadSpec& quad = {}) {
  if (std::abs(k1.horizon() - k2.horizon()) > 1e-12 * k1.horizon())
    detail::domain_fail("cross_bracket: kernels must share the horizon T");
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) v[i] = covariance(k1, k2, grid[i], grid[i], quad);
  return EnergyFunction::from_values(grid, std::move(v), k1.id() + "|" + k2.id());
}

/// Riemann-Stieltjes sum over cells [first, last): cell i contributes
/// cell_values[i] * (Gamma(t_{i+1}-) - Gamma(t_i)), and each atom at an interior
/// or right-end grid point i contributes atom_values[i] * jump_i.
inline double stieltjes_integrate_cells(std::span<const double> cell_values, const EnergyFunction& g,
                                        std::span<const double> atom_values = {}, std::size_t first = 0,
                                        std::size_t last = static_cast<std::size_t>(-1)) {
  const std::size_t n = g.grid.cells();
  if (last == static_cast<std::size_t>(-1)) last = n;
  if (cell_values.size() != n) detail::domain_fail("stieltjes: integrand has ", cell_values.size(), " cells, grid has ", n);
  if (first > last || last > n) detail::domain_fail("stieltjes: bad cell range");
  bool has_atoms = false;
  for (std::size_t i = first + 1; i <= last; ++i) has_atoms = has_atoms || g.jumps[i] != 0.0;
  if (has_atoms && atom_values.size() != g.grid.size())
    detail::domain_fail("stieltjes: integrator has atoms but no integrand values at grid points");
  double s = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double continuous = g.values[i + 1] - g.jumps[i + 1] - g.values[i];
    s += cell_values[i] * continuous;
    if (g.jumps[i + 1] != 0.0) s += atom_values[i + 1] * g.jumps[i + 1];
  }
  return s;
}

/// f sampled on the grid nodes; the midpoint sample of each cell is the mean
/// of its endpoint values and atoms use the node value.
inline double stieltjes_integrate(std::span<const double> f_nodes, const EnergyFunction& g, std::size_t first = 0,
                                  std::size_t last = static_cast<std::size_t>(-1)) {
  if (f_nodes.size() != g.grid.size())
    detail::domain_fail("stieltjes: integrand has ", f_nodes.size(), " samples, grid has ", g.grid.size());
  std::vector<double> mid(g.grid.cells());
  for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (f_nodes[i] + f_nodes[i + 1]);
  return stieltjes_integrate_cells(mid, g, f_nodes, first, last);
}

/// Midpoint rule for a callable f(t): f at cell midpoints, atoms at jump times.
template <class F>
double stieltjes_integrate_fn(F&& f, const EnergyFunction& g) {
  std::vector<double> mid(g.grid.cells()), nodes(g.grid.size());
  for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = f(0.5 * (g.grid[i] + g.grid[i + 1]));
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = g.jumps[i] != 0.0 ? f(g.grid[i]) : 0.0;
  return stieltjes_integrate_cells(mid, g, nodes);
}

struct HurstEstimate {
  double hurst;
  double r2;
  std::size_t points;
};

/// Unweighted least-squares slope of log Gamma against log t over grid points
/// in [lo, hi]; H = slope / 2.
inline HurstEstimate estimate_hurst(const EnergyFunction& g, double lo, double hi) {
  std::vector<double> x, y;
  for (std::size_t i = 1; i < g.grid.size(); ++i) {
    const double t = g.grid[i];
    if (t < lo * (1.0 - 1e-12) || t > hi * (1.0 + 1e-12)) continue;
    if (!(g.values[i] > 0.0)) detail::domain_fail("estimate_hurst: Gamma must be positive on the window (t=", t, ")");
    x.push_back(std::log(t));
    y.push_back(std::log(g.values[i]));
  }
  if (x.size() < 3) detail::domain_fail("estimate_hurst: fewer than 3 grid points in [", lo, ", ", hi, "]");
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return {0.5 * slope, r2, x.size()};
}

/// CSV `t,<column>` with 17 significant digits.
inline void write_energy_csv(std::ostream& os, const EnergyFunction& g, const std::string& column = "gamma") {
  os << "t," << column << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < g.grid.size(); ++i) os << g.grid[i] << ',' << g.values[i] << '\n';
}

}  // namespace vito
