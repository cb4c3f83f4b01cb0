#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "volterra_ito/errors.hpp"
#include "volterra_ito/quadrature.hpp"

namespace vito {

struct BrownianKernel {};

/// sqrt(2H) (t-s)^{H-1/2}; normalized so that the diagonal variance is t^{2H}.
struct RiemannLiouvilleKernel {
  double hurst;
};

/// sum_j c_j exp(-lambda_j (t-s)).
struct ExpSumKernel {
  std::vector<double> weights;
  std::vector<double> rates;
};

/// Samples K(times[i], times[j]) in a square row-major matrix, bilinearly
/// interpolated. Entries with j > i only serve as interpolation support.
struct TableKernel {
  std::vector<double> times;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * times.size() + j]; }
};

enum class KernelKind { brownian, riemann_liouville, exp_sum, table };

/// Deterministic Volterra kernel K(t,s), 0 <= s < t <= T. Immutable.
class Kernel {
public:
  using Family = std::variant<BrownianKernel, RiemannLiouvilleKernel, ExpSumKernel, TableKernel>;

  static Kernel brownian(double horizon) { return Kernel(BrownianKernel{}, horizon); }

  static Kernel riemann_liouville(double hurst, double horizon) {
    if (!(hurst > 0.0 && hurst < 1.0)) detail::domain_fail("kernel field 'hurst' must lie in (0,1), got ", hurst);
    return Kernel(RiemannLiouvilleKernel{hurst}, horizon);
  }

  static Kernel exp_sum(std::vector<double> weights, std::vector<double> rates, double horizon) {
    if (weights.empty()) detail::domain_fail("kernel field 'weights' must be non-empty");
    if (weights.size() != rates.size())
      detail::domain_fail("kernel fields 'weights' and 'rates' must have equal length");
    for (double r : rates)
      if (!(r > 0.0) || !std::isfinite(r)) detail::domain_fail("kernel field 'rates' must be strictly positive, got ", r);
    for (double w : weights)
      if (!std::isfinite(w)) detail::domain_fail("kernel field 'weights' must be finite");
    return Kernel(ExpSumKernel{std::move(weights), std::move(rates)}, horizon);
  }

  static Kernel table(std::vector<double> times, std::vector<std::vector<double>> rows) {
    if (times.size() < 2) detail::domain_fail("kernel field 'times' needs at least two entries");
    if (times.front() != 0.0) detail::domain_fail("kernel field 'times' must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) detail::domain_fail("kernel field 'times' must be strictly increasing");
    if (rows.size() != times.size()) detail::domain_fail("kernel field 'values' must have one row per time");
    std::vector<double> flat;
    flat.reserve(times.size() * times.size());
    for (const auto& r : rows) {
      if (r.size() != times.size()) detail::domain_fail("kernel field 'values' must be a square matrix");
      for (double v : r) {
        if (!std::isfinite(v)) detail::domain_fail("kernel field 'values' must be finite");
        flat.push_back(v);
      }
    }
    const double horizon = times.back();
    return Kernel(TableKernel{std::move(times), std::move(flat)}, horizon);
  }

  static Kernel from_json(const nlohmann::json& j) {
    if (!j.is_object()) detail::domain_fail("kernel spec must be a JSON object");
    if (!j.contains("kind") || !j["kind"].is_string()) detail::domain_fail("kernel field 'kind' is missing");
    const auto kind = j["kind"].get<std::string>();
    auto number = [&](const char* key, double fallback, bool required) {
      if (!j.contains(key)) {
        if (required) detail::domain_fail("kernel field '", key, "' is missing");
        return fallback;
      }
      if (!j[key].is_number()) detail::domain_fail("kernel field '", key, "' must be a number");
      return j[key].get<double>();
    };
    auto numbers = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_array()) detail::domain_fail("kernel field '", key, "' must be an array");
      std::vector<double> out;
      for (const auto& v : j[key]) {
        if (!v.is_number()) detail::domain_fail("kernel field '", key, "' must contain numbers");
        out.push_back(v.get<double>());
      }
      return out;
    };
    if (kind == "brownian") return brownian(number("T", 1.0, false));
    if (kind == "rl" || kind == "riemann_liouville")
      return riemann_liouville(number("hurst", 0.0, true), number("T", 1.0, false));
    if (kind == "expsum") return exp_sum(numbers("weights"), numbers("rates"), number("T", 1.0, false));
    if (kind == "table") {
      auto times = numbers("times");
      if (!j.contains("values") || !j["values"].is_array()) detail::domain_fail("kernel field 'values' must be an array");
      std::vector<std::vector<double>> rows;
      for (const auto& r : j["values"]) {
        if (!r.is_array()) detail::domain_fail("kernel field 'values' must be an array of rows");
        std::vector<double> row;
        for (const auto& v : r) {
          if (!v.is_number()) detail::domain_fail("kernel field 'values' must contain numbers");
          row.push_back(v.get<double>());
        }
        rows.push_back(std::move(row));
      }
      return table(std::move(times), std::move(rows));
    }
    detail::domain_fail("kernel field 'kind' has unknown value '", kind, "'");
  }

  nlohmann::json to_json() const {
    return std::visit(
        [&](const auto& f) -> nlohmann::json {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, BrownianKernel>) {
            return {{"kind", "brownian"}, {"T", horizon_}};
          } else if constexpr (std::is_same_v<F, RiemannLiouvilleKernel>) {
            return {{"kind", "rl"}, {"hurst", f.hurst}, {"T", horizon_}};
          } else if constexpr (std::is_same_v<F, ExpSumKernel>) {
            return {{"kind", "expsum"}, {"weights", f.weights}, {"rates", f.rates}, {"T", horizon_}};
          } else {
            const std::size_t m = f.times.size();
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t i = 0; i < m; ++i)
              rows.push_back(std::vector<double>(f.values.begin() + static_cast<std::ptrdiff_t>(i * m),
                                                 f.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * m)));
            return {{"kind", "table"}, {"times", f.times}, {"values", rows}};
          }
        },
        family_);
  }

  KernelKind kind() const noexcept { return static_cast<KernelKind>(family_.index()); }
  const Family& family() const noexcept { return family_; }
  double horizon() const noexcept { return horizon_; }

  /// Stable identifier: canonical JSON, or a content hash for tables.
  std::string id() const {
    if (const auto* tab = std::get_if<TableKernel>(&family_)) {
      std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
      auto mix = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
          h ^= (bits >> (8 * b)) & 0xffU;
          h *= 1099511628211ULL;
        }
      };
      for (double v : tab->times) mix(v);
      for (double v : tab->values) mix(v);
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
      return "table:" + std::string(buf);
    }
    return to_json().dump();
  }

  double hurst() const {
    if (const auto* rl = std::get_if<RiemannLiouvilleKernel>(&family_)) return rl->hurst;
    detail::domain_fail("kernel has no Hurst parameter");
  }

  /// Hoelder exponent H of |K(t,s)| <= C |t-s|^{H-1/2}; 1/2 for bounded kernels.
  double regularity() const noexcept {
    if (const auto* rl = std::get_if<RiemannLiouvilleKernel>(&family_)) return rl->hurst;
    return 0.5;
  }

  /// Leading power of K(t, t-lag) as lag -> 0 (negative only for RL with H < 1/2).
  double singular_exponent() const noexcept { return std::min(regularity() - 0.5, 0.0); }

  /// True when K(t,s) depends on t-s only.
  bool stationary() const noexcept { return kind() != KernelKind::table; }

  double eval(double t, double s) const {
    if (!(s >= 0.0 && s < t)) detail::domain_fail("kernel_eval needs 0 <= s < t, got t=", t, " s=", s);
    check_time(t);
    return eval_unchecked(t, t - s, s);
  }

  /// K(t, t - lag) without the s < t check; lag is passed directly to avoid cancellation.
  double eval_lag(double t, double lag) const { return eval_unchecked(t, lag, t - lag); }

  /// Integral of K(t,r)^2 over [a,b], exact for every built-in family.
  double cell_l2(double t, double a, double b) const {
    if (!(a >= 0.0 && a < b && b <= t)) detail::domain_fail("kernel_cell_l2 needs 0 <= a < b <= t, got a=", a, " b=", b, " t=", t);
    check_time(t);
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, BrownianKernel>) {
            return b - a;
          } else if constexpr (std::is_same_v<F, RiemannLiouvilleKernel>) {
            const double two_h = 2.0 * f.hurst;
            const double near = t - b;
            if (near <= 0.0) return std::pow(t - a, two_h);
            // (t-a)^{2H} - (t-b)^{2H} without cancellation
            return std::pow(near, two_h) * std::expm1(two_h * std::log1p((b - a) / near));
          } else if constexpr (std::is_same_v<F, ExpSumKernel>) {
            double s = 0.0;
            for (std::size_t i = 0; i < f.rates.size(); ++i)
              for (std::size_t j = 0; j < f.rates.size(); ++j) {
                const double rate = f.rates[i] + f.rates[j];
                s += f.weights[i] * f.weights[j] * std::exp(-rate * (t - b)) * (-std::expm1(-rate * (b - a))) / rate;
              }
            return s;
          } else {
            return table_cell_l2(f, t, a, b);
          }
        },
        family_);
  }

private:
  Kernel(Family family, double horizon) : family_(std::move(family)), horizon_(horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) detail::domain_fail("kernel field 'T' must be positive, got ", horizon);
  }

  void check_time(double t) const {
    if (t > horizon_ * (1.0 + 1e-12)) detail::domain_fail("time ", t, " exceeds kernel horizon ", horizon_);
  }

  double eval_unchecked(double t, double lag, double s) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, BrownianKernel>) {
            return 1.0;
          } else if constexpr (std::is_same_v<F, RiemannLiouvilleKernel>) {
            return std::sqrt(2.0 * f.hurst) * std::pow(lag, f.hurst - 0.5);
          } else if constexpr (std::is_same_v<F, ExpSumKernel>) {
            double v = 0.0;
            for (std::size_t i = 0; i < f.rates.size(); ++i) v += f.weights[i] * std::exp(-f.rates[i] * lag);
            return v;
          } else {
            return table_value(f, t, s);
          }
        },
        family_);
  }

  // Segment index k with times[k] <= x <= times[k+1] and the fractional position.
  static std::pair<std::size_t, double> locate(const std::vector<double>& times, double x) {
    if (x < times.front() || x > times.back() * (1.0 + 1e-12))
      detail::domain_fail("table kernel queried outside its grid at ", x);
    auto it = std::upper_bound(times.begin(), times.end(), x);
    std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    k = std::min(k, times.size() - 2);
    const double frac = std::clamp((x - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
    return {k, frac};
  }

  static double table_value(const TableKernel& f, double t, double s) {
    const auto [i, a] = locate(f.times, t);
    const auto [j, b] = locate(f.times, s);
    auto row = [&](std::size_t r) { return (1.0 - b) * f.at(r, j) + b * f.at(r, j + 1); };
    if (a == 0.0) return row(i);
    if (a == 1.0) return row(i + 1);
    return (1.0 - a) * row(i) + a * row(i + 1);
  }

  // K(t,.) is piecewise linear between table times: Simpson is exact per piece.
  static double table_cell_l2(const TableKernel& f, double t, double a, double b) {
    double total = 0.0;
    double lo = a;
    double f_lo = table_value(f, t, lo);
    auto it = std::upper_bound(f.times.begin(), f.times.end(), a);
    while (lo < b) {
      const double hi = (it != f.times.end() && *it < b) ? *it++ : b;
      const double f_hi = table_value(f, t, hi);
      total += (hi - lo) * (f_lo * f_lo + f_lo * f_hi + f_hi * f_hi) / 3.0;
      lo = hi;
      f_lo = f_hi;
    }
    return total;
  }

  Family family_;
  double horizon_;
};

inline double kernel_eval(const Kernel& k, double t, double s) { return k.eval(t, s); }

inline double kernel_cell_l2(const Kernel& k, double t, double a, double b) { return k.cell_l2(t, a, b); }

/// Gamma(t) = int_0^t K(t,r)^2 dr.
inline double energy_at(const Kernel& k, double t) { return t > 0.0 ? k.cell_l2(t, 0.0, t) : 0.0; }

/// R(t,u) = int_0^{t^u} K1(t,s) K2(u,s) ds by graded quadrature toward the diagonal.
inline double covariance(const Kernel& k1, const Kernel& k2, double t, double u, const QuadSpec& quad = {}) {
  if (!(t > 0.0 && u > 0.0)) detail::domain_fail("covariance needs t, u in (0,T], got t=", t, " u=", u);
  if (t > k1.horizon() * (1.0 + 1e-12) || u > k2.horizon() * (1.0 + 1e-12))
    detail::domain_fail("covariance time exceeds kernel horizon");
  const double m = std::min(t, u);
  const double exponent = (t == m ? k1.singular_exponent() : 0.0) + (u == m ? k2.singular_exponent() : 0.0);
  auto f = [&](double lag) { return k1.eval_lag(t, t - m + lag) * k2.eval_lag(u, u - m + lag); };
  return integrate_graded(f, m, exponent, quad).value;
}

/// (int_0^t (K1(t,r) - K2(t,r))^2 dr)^{1/2}.
inline double kernel_l2_distance_at(const Kernel& k1, const Kernel& k2, double t, const QuadSpec& quad = {}) {
  if (t <= 0.0) return 0.0;
  const double exponent = 2.0 * std::min(k1.singular_exponent(), k2.singular_exponent());
  auto f = [&](double lag) {
    const double d = k1.eval_lag(t, lag) - k2.eval_lag(t, lag);
    return d * d;
  };
  return std::sqrt(integrate_graded(f, t, exponent, quad).value);
}

/// L^2(mu) distance over the simplex {0 <= s <= t <= T} with d(mu) = ds dt.
inline double kernel_l2mu_distance(const Kernel& k1, const Kernel& k2, const QuadSpec& quad = {}) {
  const double horizon = k1.horizon();
  if (std::abs(horizon - k2.horizon()) > 1e-12 * horizon) detail::domain_fail("kernels must share the horizon T");
  const double exponent = 2.0 * std::min(k1.singular_exponent(), k2.singular_exponent());
  if (k1.stationary() && k2.stationary()) {
    // Both depend on the lag only: the t-integral contributes the weight (T - lag).
    auto f = [&](double lag) {
      const double d = k1.eval_lag(horizon, lag) - k2.eval_lag(horizon, lag);
      return (horizon - lag) * d * d;
    };
    return std::sqrt(integrate_graded(f, horizon, exponent, quad).value);
  }
  QuadSpec inner = quad;
  inner.rel_tol = quad.rel_tol * 0.1;
  auto outer = [&](double t) {
    if (t <= 0.0) return 0.0;
    auto f = [&](double lag) {
      const double d = k1.eval_lag(t, lag) - k2.eval_lag(t, lag);
      return d * d;
    };
    return integrate_graded(f, t, exponent, inner).value;
  };
  return std::sqrt(integrate_adaptive(outer, 0.0, horizon, quad).value);
}

}  // namespace vito
