// Square of a rough Riemann-Liouville process: checks the pathwise Ito
// formula (X_1)^2 = 2 * (Clark-Ocone sum) + 1 on a grid ladder.
#include <iostream>

#include <volterra_ito.hpp>

int main() {
  const auto k = vito::Kernel::riemann_liouville(0.25, 1.0);
  const auto phi = vito::TestFunction::square();

  const auto mean = vito::verify_mean_identity(k, phi, vito::TimeGrid::uniform(1.0, 256), 0, 0, 1.0);
  std::cout << mean.front().summary_line() << '\n';

  const auto res = vito::verify_pathwise_formula(k, phi, {16, 64, 256}, 20000, 7, 1.0);
  for (const auto& r : res.rungs) std::cout << r.summary_line() << '\n';
  std::cout << res.ladder.summary_line() << '\n';
  return res.pass ? 0 : 1;
}
