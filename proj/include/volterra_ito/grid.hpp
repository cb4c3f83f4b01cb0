#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "volterra_ito/errors.hpp"

namespace vito {

/// Strictly increasing partition 0 = t_0 < t_1 < ... < t_n = T.
class TimeGrid {
public:
  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) detail::domain_fail("grid: need at least two points");
    if (times_.front() != 0.0) detail::domain_fail("grid: first time must be exactly 0");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i]))
        detail::domain_fail("grid: times must be strictly increasing and finite (index ", i, ")");
    }
  }

  static TimeGrid uniform(double horizon, std::size_t cells) {
    if (!(horizon > 0.0)) detail::domain_fail("grid: horizon must be positive");
    if (cells == 0) detail::domain_fail("grid: need at least one cell");
    std::vector<double> t(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
    t.back() = horizon;
    return TimeGrid(std::move(t));
  }

  std::size_t cells() const noexcept { return times_.size() - 1; }
  std::size_t size() const noexcept { return times_.size(); }
  double horizon() const noexcept { return times_.back(); }
  double operator[](std::size_t i) const noexcept { return times_[i]; }
  double width(std::size_t cell) const noexcept { return times_[cell + 1] - times_[cell]; }
  double max_width() const noexcept {
    double h = 0.0;
    for (std::size_t j = 0; j < cells(); ++j) h = std::max(h, width(j));
    return h;
  }
  std::span<const double> times() const noexcept { return times_; }

  /// Index of the grid point equal to t (within 1e-12 relative), or DomainError.
  std::size_t index_of(double t) const {
    const double tol = 1e-12 * horizon();
    for (std::size_t i = 0; i < times_.size(); ++i)
      if (std::abs(times_[i] - t) <= tol) return i;
    detail::domain_fail("time ", t, " is not a grid point");
  }

  bool operator==(const TimeGrid&) const = default;

private:
  std::vector<double> times_;
};

}  // namespace vito
