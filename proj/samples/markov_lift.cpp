// Exponential-sum (Markovian) approximations of a rough kernel and the
// convergence of their brackets.
#include <iostream>

#include <volterra_ito.hpp>

int main() {
  const auto target = vito::Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = vito::TimeGrid::uniform(1.0, 512);
  const auto report = vito::convergence_suite(target, {2, 4, 8}, grid, 0, 0);
  vito::write_approx_csv(std::cout, report);

  const auto fitted = vito::fit_expsum(target, 8, 1e-3);
  std::cout << "n=8 fit: " << fitted.to_json().dump() << '\n';
  return report.pass() ? 0 : 1;
}
