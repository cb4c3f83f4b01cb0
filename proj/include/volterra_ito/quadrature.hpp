#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <queue>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "volterra_ito/errors.hpp"

namespace vito {

/// Accuracy contract for adaptive quadrature.
struct QuadSpec {
  double rel_tol = 1e-11;
  double abs_tol = 1e-15;
  std::size_t max_panels = 4000;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a,b]: the panel with the largest
/// error estimate is bisected until the total error meets the tolerance.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, const QuadSpec& spec) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    double err = 0.0;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    const double v = half * GK::integrate([&](double x) { return f(mid + half * x); }, -1.0, 1.0, 0, 0.0, &err);
    return Panel{lo, hi, v, std::abs(half * err)};
  };

  std::priority_queue<Panel> heap;
  Panel first = eval(a, b);
  double total = first.value, total_err = first.error;
  heap.push(first);
  while (total_err > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
    if (heap.size() >= spec.max_panels)
      throw NumericalError("adaptive quadrature exceeded its panel budget", total, total_err);
    Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b))
      throw NumericalError("adaptive quadrature hit the resolution limit", total, total_err);
    Panel left = eval(worst.a, mid), right = eval(mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to drop the drift accumulated by the running updates.
  double sum = 0.0, err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  return {sum, err};
}

/// Integrates f(lag) over (0, length] when f behaves like lag^exponent at 0
/// (exponent > -1). The substitution lag = length * w^p with p = 1/(1+exponent)
/// turns the leading singular term into a constant.
template <class F>
QuadResult integrate_graded(F&& f, double length, double exponent, const QuadSpec& spec) {
  if (!(exponent > -1.0)) detail::domain_fail("graded quadrature: exponent must exceed -1");
  const double p = exponent < 0.0 ? 1.0 / (1.0 + exponent) : 1.0;
  if (p == 1.0) return integrate_adaptive(f, 0.0, length, spec);
  auto g = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double wp1 = std::pow(w, p - 1.0);
    return f(length * wp1 * w) * length * p * wp1;
  };
  return integrate_adaptive(g, 0.0, 1.0, spec);
}

/// E[Z^k] for a standard normal Z: (k-1)!! for even k, 0 for odd k.
inline double gaussian_moment(unsigned k) {
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  for (unsigned j = k; j > 1; j -= 2) m *= static_cast<double>(j - 1);
  return m;
}

/// Gauss-Hermite rule for the standard normal weight: sum_i w_i f(x_i) = E[f(Z)],
/// exact for polynomials of degree <= 2*order - 1.
class GaussHermite {
public:
  explicit GaussHermite(std::size_t order) : nodes_(order), weights_(order) {
    if (order == 0) detail::domain_fail("Gauss-Hermite order must be >= 1");
    const auto n = static_cast<Eigen::Index>(order);
    // Golub-Welsch start; He_k recurrence has off-diagonal sqrt(k).
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index k = 0; k + 1 < n; ++k) sub[k] = std::sqrt(static_cast<double>(k + 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    for (std::size_t i = 0; i < order; ++i) {
      double x = eig.eigenvalues()[static_cast<Eigen::Index>(i)];
      // Newton polish on the orthonormal polynomial p_n, p_n' = sqrt(n) p_{n-1}.
      for (int it = 0; it < 3; ++it) {
        auto [pn, pn1, sumsq] = orthonormal(x, order);
        (void)sumsq;
        x -= pn / (std::sqrt(static_cast<double>(order)) * pn1);
      }
      auto [pn, pn1, sumsq] = orthonormal(x, order);
      (void)pn;
      (void)pn1;
      nodes_[i] = x;
      weights_[i] = 1.0 / sumsq;
    }
  }

  std::size_t order() const noexcept { return nodes_.size(); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// E[f(mean + sqrt(var) Z)].
  template <class F>
  double expect(F&& f, double mean, double var) const {
    const double sd = std::sqrt(std::max(var, 0.0));
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(mean + sd * nodes_[i]);
    return s;
  }

private:
  struct Eval {
    double pn, pn1, sumsq;  // p_n(x), p_{n-1}(x), sum_{k<n} p_k(x)^2
  };
  static Eval orthonormal(double x, std::size_t n) {
    double prev = 0.0, cur = 1.0, sumsq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sumsq += cur * cur;
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
    }
    return {cur, prev, sumsq};
  }

  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Shared, lazily built rule for the given order.
inline const GaussHermite& gauss_hermite(std::size_t order) {
  static std::mutex mu;
  static std::map<std::size_t, GaussHermite> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, GaussHermite(order)).first;
  return it->second;
}

}  // namespace vito
