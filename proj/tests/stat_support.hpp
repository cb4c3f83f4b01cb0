#pragma once

// Goodness-of-fit statistics used by the distributional tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace vito::testing {

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// 1% critical value of the two-sample KS statistic (asymptotic).
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

/// Anderson-Darling A^2 of a sample against N(0, var), parameters fully known.
inline double anderson_darling_normal(std::vector<double> x, double var) {
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> nd(0.0, std::sqrt(var));
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = std::clamp(boost::math::cdf(nd, x[i]), 1e-300, 1.0 - 1e-16);
    const double hi = std::clamp(boost::math::cdf(boost::math::complement(nd, x[x.size() - 1 - i])), 1e-300, 1.0);
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(lo) + std::log(hi));
  }
  return -n - s / n;
}

/// 1% critical value of A^2 with known parameters.
inline constexpr double kAndersonDarling1pct = 3.857;

}  // namespace vito::testing
