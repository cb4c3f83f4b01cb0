#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <volterra_ito/bracket.hpp>
#include <volterra_ito/paths.hpp>
#include <volterra_ito/rng.hpp>

#include "stat_support.hpp"

using namespace vito;

TEST(Philox, KnownAnswerVectors) {
  using P = Philox4x32;
  EXPECT_EQ(P::generate({0, 0, 0, 0}, {0, 0}), (P::Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(P::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (P::Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(P::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (P::Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, NormalQuantileReferenceValues) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-13);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
}

TEST(Rng, StreamsArePureFunctionsOfTheirCoordinates) {
  const RngStream a(7, 3), b(7, 3), c(8, 3), d(7, 4);
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.normal(i), b.normal(i));
    EXPECT_NE(a.normal(i), c.normal(i));
    EXPECT_NE(a.normal(i), d.normal(i));
    const double u = a.uniform(i);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  std::vector<double> out(10);
  a.fill_normal(5, out);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(out[i], a.normal(5 + i));
}

TEST(Rng, NormalsPassAndersonDarling) {
  std::vector<double> v(20000);
  RngStream(2024, 0).fill_normal(0, v);
  EXPECT_LT(vito::testing::anderson_darling_normal(v, 1.0), vito::testing::kAndersonDarling1pct);
  double m = 0.0, s = 0.0;
  for (double x : v) m += x, s += x * x;
  m /= v.size();
  s /= v.size();
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(20000.0));
  EXPECT_NEAR(s, 1.0, 4.0 * std::sqrt(2.0 / 20000.0));
}

TEST(Paths, WeightsReproduceTheBracketExactly) {
  for (const auto& k : {Kernel::riemann_liouville(0.1, 1.0), Kernel::exp_sum({1.0, 0.3}, {2.0, 9.0}, 1.0),
                        Kernel::brownian(1.0)}) {
    const auto grid = TimeGrid::uniform(1.0, 64);
    const VolterraWeights w(k, grid);
    for (std::size_t i = 1; i <= 64; ++i) {
      double s = 0.0;
      for (double x : w.weights(i)) s += x * x;
      EXPECT_NEAR(s, energy_at(k, grid[i]), 1e-12);
    }
  }
}

TEST(Paths, BrownianPathIsCumulativeNoise) {
  const auto grid = TimeGrid::uniform(1.0, 16);
  const auto b = simulate_volterra(Kernel::brownian(1.0), grid, 3, 5);
  for (std::size_t p = 0; p < 3; ++p) {
    double w = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_NEAR(b.X_row(p)[j], w, 1e-13);
      w += b.dW_row(p)[j];
      EXPECT_NEAR(b.dW_row(p)[j], 0.25 * b.z_row(p)[j], 1e-15);
    }
    EXPECT_NEAR(b.X_row(p)[16], w, 1e-13);
  }
}

TEST(Paths, VarianceMatchesBracket) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 32);
  const std::size_t paths = 40000;
  const auto b = simulate_volterra(k, grid, paths, 99);
  for (std::size_t i : {1u, 8u, 32u}) {
    double s = 0.0;
    for (std::size_t p = 0; p < paths; ++p) s += b.X_row(p)[i] * b.X_row(p)[i];
    const double gamma = energy_at(k, grid[i]);
    EXPECT_NEAR(s / paths, gamma, 4.0 * gamma * std::sqrt(2.0 / paths)) << "i=" << i;
  }
}

TEST(Paths, BitIdenticalAcrossThreadsAndOffsets) {
  const auto k = Kernel::riemann_liouville(0.3, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 40);
  SimulationOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = simulate_volterra(k, grid, 100, 17, one);
  const auto b = simulate_volterra(k, grid, 100, 17, four);
  EXPECT_EQ(a.X, b.X);
  SimulationOptions tail;
  tail.first_path = 37;
  const auto c = simulate_volterra(k, grid, 63, 17, tail);
  for (std::size_t p = 0; p < 63; ++p)
    for (std::size_t i = 0; i <= 40; ++i) EXPECT_EQ(c.X_row(p)[i], a.X_row(37 + p)[i]);
}

TEST(Paths, VolterraAndCholeskyAgreeInLaw) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 16);
  const std::size_t paths = 4000;
  const auto v = simulate_volterra(k, grid, paths, 1);
  const auto c = simulate_cholesky(k, grid, paths, 2);
  for (std::size_t i : {4u, 16u}) {
    std::vector<double> a(paths), b(paths);
    for (std::size_t p = 0; p < paths; ++p) a[p] = v.X_row(p)[i], b[p] = c.X_row(p)[i];
    EXPECT_LT(vito::testing::ks_two_sample(a, b), vito::testing::ks_critical_1pct(paths, paths)) << "i=" << i;
    // Cholesky marginals are exact: Anderson-Darling against N(0, t^{1/2}).
    EXPECT_LT(vito::testing::anderson_darling_normal(b, std::sqrt(grid[i])), vito::testing::kAndersonDarling1pct);
  }
}

TEST(Paths, BudgetAndArgumentChecks) {
  const auto k = Kernel::brownian(1.0);
  const auto grid = TimeGrid::uniform(1.0, 1000);
  SimulationOptions small;
  small.budget = 1e6;
  EXPECT_THROW(simulate_volterra(k, grid, 10, 1, small), BudgetError);
  EXPECT_THROW(simulate_cholesky(k, grid, 10, 1, {}, small), BudgetError);
  EXPECT_THROW(simulate_volterra(k, grid, 0, 1), DomainError);
  EXPECT_THROW(VolterraWeights(k, TimeGrid::uniform(2.0, 4)), DomainError);
}

TEST(Paths, CsvDump) {
  const auto b = simulate_volterra(Kernel::brownian(1.0), TimeGrid::uniform(1.0, 2), 2, 3);
  std::ostringstream os;
  write_paths_csv(os, b);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "path,t,X");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
}
