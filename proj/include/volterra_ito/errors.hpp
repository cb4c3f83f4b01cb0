#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace vito {

/// Precondition or input-validation failure (bad kernel spec, off-grid time, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A computation ran but could not reach its accuracy target.
class NumericalError : public std::runtime_error {
public:
  NumericalError(const std::string& what, double estimate, double error_bound)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

private:
  double estimate_;
  double error_bound_;
};

/// Refusal to start work whose cost exceeds the configured budget.
class BudgetError : public DomainError {
public:
  BudgetError(const std::string& what, double required, double budget)
      : DomainError(what), required_(required), budget_(budget) {}

  double required() const noexcept { return required_; }
  double budget() const noexcept { return budget_; }

private:
  double required_;
  double budget_;
};

/// Least-squares system too ill-conditioned to trust.
class ConditioningError : public NumericalError {
public:
  ConditioningError(const std::string& what, double condition, double limit)
      : NumericalError(what, condition, limit) {}

  double condition() const noexcept { return estimate(); }
};

namespace detail {

template <class... Args>
[[noreturn]] void domain_fail(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw DomainError(os.str());
}

}  // namespace detail
}  // namespace vito
