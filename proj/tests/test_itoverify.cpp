#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include <volterra_ito/itoverify.hpp>

using namespace vito;

namespace {

SampleStats stats(const std::vector<double>& v) { return sample_stats(v); }

}  // namespace

TEST(Report, PassRuleAndSchema) {
  VerificationReport r{"x", 1.0, 1.5, 0.1, 0.1, 8, 100, 3, false, 4.0};
  EXPECT_TRUE(r.within_tolerance());
  r.estimate = 2.1;
  EXPECT_FALSE(r.within_tolerance());
  const auto j = r.to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"identity", "estimate", "reference", "se", "bias_bound", "grid_n", "paths",
                                            "seed", "pass", "z"}));
  EXPECT_EQ(r.summary_line().rfind("FAIL x:", 0), 0u);
}

TEST(Conditioning, Endpoints) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 32);
  const auto b = simulate_volterra(k, grid, 2, 9);
  const auto z = b.z_row(1);
  const auto [m_full, v_full] = conditional_mean_and_var(k, grid, z, 20, 20);
  EXPECT_EQ(v_full, 0.0);
  EXPECT_NEAR(m_full, b.X_row(1)[20], 1e-13);
  const auto [m0, v0] = conditional_mean_and_var(k, grid, z, 0, 20);
  EXPECT_EQ(m0, 0.0);
  EXPECT_NEAR(v0, energy_at(k, grid[20]), 1e-13);
  EXPECT_THROW(conditional_mean_and_var(k, grid, z, 21, 20), DomainError);
}

TEST(Conditioning, BrownianResidualVarianceIsRemainingTime) {
  const auto k = Kernel::brownian(1.0);
  const auto grid = TimeGrid::uniform(1.0, 16);
  std::vector<double> z(16, 0.5);
  for (std::size_t r = 0; r <= 12; ++r) {
    const auto [m, v] = conditional_mean_and_var(k, grid, z, r, 12);
    EXPECT_NEAR(v, grid[12] - grid[r], 1e-14);
    EXPECT_NEAR(m, 0.5 * 0.25 * static_cast<double>(r), 1e-14);
  }
}

TEST(Mehler, ClosedFormCases) {
  const auto sq = TestFunction::square();  // phi' = 2x
  for (double v : {0.0, 0.3, 5.0}) EXPECT_NEAR(mehler_conditional(sq, 0.7, v), 1.4, 1e-14);
  auto x2 = [](double x) { return x * x; };
  EXPECT_NEAR(mehler_conditional(x2, 0.0, 1.0), 1.0, 1e-14);
  auto c = [](double x) { return std::cos(x); };
  for (double v : {0.25, 1.0, 2.0, 4.0}) EXPECT_NEAR(mehler_conditional(c, 0.0, v, 32), std::exp(-0.5 * v), 1e-10);
  EXPECT_THROW(mehler_conditional(c, 0.0, -1.0), DomainError);
}

TEST(Mehler, EndpointConsistency) {
  // v = 0 gives phi'(m) exactly; at r = 0 the integrand constant is E[phi'(X_t)].
  const auto f = TestFunction::cosine(1.4);
  for (double m : {-0.3, 0.0, 2.2}) EXPECT_EQ(mehler_conditional(f, m, 0.0), f.derivative(1, m));
  const auto cube = TestFunction::polynomial({0, 0, 0, 1});  // phi' = 3x^2
  const double gamma = energy_at(Kernel::riemann_liouville(0.25, 1.0), 0.6);
  EXPECT_NEAR(mehler_conditional(cube, 0.0, gamma), 3.0 * gamma, 1e-12);
}

TEST(ClarkOcone, SquareMatchesExplicitSum) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 24);
  const auto b = simulate_volterra(k, grid, 5, 4);
  const auto sums = clark_ocone_ito_sum(k, b, TestFunction::square(), 24);
  const VolterraWeights w(k, grid);
  for (std::size_t p = 0; p < 5; ++p) {
    double m = 0.0, s = 0.0;
    for (std::size_t j = 0; j < 24; ++j) {
      const double wz = w.weights(24)[j] * b.z_row(p)[j];
      s += 2.0 * m * wz;
      m += wz;
    }
    EXPECT_NEAR(sums[p], s, 1e-12);
    // Residual of the square is sum_j w_j^2 (z_j^2 - 1).
    double res = 0.0;
    for (std::size_t j = 0; j < 24; ++j) res += w.masses(24)[j] * (b.z_row(p)[j] * b.z_row(p)[j] - 1.0);
    const double x = b.X_row(p)[24];
    EXPECT_NEAR(x * x - sums[p] - energy_at(k, 1.0), res, 1e-12);
  }
}

TEST(ClarkOcone, ZeroMeanDivergence) {
  const auto grid = TimeGrid::uniform(1.0, 32);
  for (const auto& k : {Kernel::riemann_liouville(0.25, 1.0), Kernel::brownian(1.0),
                        Kernel::exp_sum({1.0, 0.5}, {1.0, 10.0}, 1.0)}) {
    const auto b = simulate_volterra(k, grid, 20000, 31);
    for (const auto& phi : {TestFunction::square(), TestFunction::cosine(), TestFunction::mollified_square(),
                            TestFunction::polynomial({0, 1, 0, 1})}) {
      const auto s = stats(clark_ocone_ito_sum(k, b, phi, 32));
      EXPECT_LE(std::abs(s.mean), 4.0 * s.se) << k.id() << " " << phi.to_json().dump();
    }
  }
}

TEST(ClarkOcone, TowerProperty) {
  // E over paths of E[phi'(X_t) | F_r] does not depend on r.
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 32);
  const auto b = simulate_volterra(k, grid, 20000, 5);
  const auto phi = TestFunction::polynomial({0, 0, 0, 1});
  const double want = 3.0 * energy_at(k, 1.0);
  for (std::size_t r : {0u, 8u, 16u, 32u}) {
    std::vector<double> v(b.paths);
    for (std::size_t p = 0; p < b.paths; ++p) {
      const auto [m, var] = conditional_mean_and_var(k, grid, b.z_row(p), r, 32);
      v[p] = mehler_conditional(phi, m, var);
    }
    const auto s = stats(v);
    EXPECT_LE(std::abs(s.mean - want), 4.0 * s.se + 1e-12) << "r=" << r;
  }
}

TEST(ClarkOcone, RejectsForeignBundles) {
  const auto grid = TimeGrid::uniform(1.0, 8);
  const auto b = simulate_volterra(Kernel::brownian(1.0), grid, 2, 1);
  EXPECT_THROW(clark_ocone_ito_sum(Kernel::riemann_liouville(0.25, 1.0), b, TestFunction::square(), 8), DomainError);
  const auto c = simulate_cholesky(Kernel::brownian(1.0), grid, 2, 1);
  EXPECT_THROW(clark_ocone_ito_sum(Kernel::brownian(1.0), c, TestFunction::square(), 8), DomainError);
}

TEST(MeanIdentity, QuadratureRoute) {
  const auto grid = TimeGrid::uniform(1.0, 1024);
  for (double H : {0.25, 0.5, 0.75}) {
    const auto k = Kernel::riemann_liouville(H, 1.0);
    const auto sq = verify_mean_identity(k, TestFunction::square(), grid, 0, 0, 1.0).front();
    EXPECT_LE(std::abs(sq.estimate - sq.reference), 1e-10);
    const auto c = verify_mean_identity(k, TestFunction::cosine(), grid, 0, 0, 1.0).front();
    EXPECT_NEAR(c.reference, std::exp(-0.5), 1e-15);
    EXPECT_LE(std::abs(c.estimate - c.reference), 1e-6) << "H=" << H;
    EXPECT_TRUE(c.pass);
    const auto m = verify_mean_identity(k, TestFunction::mollified_square(), grid, 0, 0, 1.0).front();
    EXPECT_LE(std::abs(m.estimate - m.reference), 1e-8);
  }
}

TEST(MeanIdentity, IntermediateTimeAndMonteCarlo) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto grid = TimeGrid::uniform(1.0, 64);
  const auto reps = verify_mean_identity(k, TestFunction::cosine(2.0), grid, 20000, 3, 0.5);
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_NEAR(reps[0].reference, std::exp(-2.0 * std::sqrt(0.5)), 1e-15);
  EXPECT_TRUE(reps[1].pass) << reps[1].summary_line();
  EXPECT_EQ(reps[1].identity, "mean_identity/monte_carlo");
  EXPECT_THROW(verify_mean_identity(k, TestFunction::cosine(), grid, 0, 0, 0.3), DomainError);
}

TEST(Pathwise, ConstantPhiHasZeroResidual) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  for (const auto& r : pathwise_residuals(k, TestFunction::constant(3.0), 32, 50, 1, 1.0)) EXPECT_EQ(r, 0.0);
}

TEST(Pathwise, BrownianSquareResidualVariance) {
  const auto k = Kernel::brownian(1.0);
  const auto res = verify_pathwise_formula(k, TestFunction::square(), {32}, 20000, 8, 1.0);
  const double want = 2.0 / 32.0;  // sum_j 2 h^2
  EXPECT_NEAR(res.rungs[0].estimate / want, 1.0, 0.1);
}

TEST(Pathwise, GeneralPhiRunsTheStieltjesRoute) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  const auto res = verify_pathwise_formula(k, TestFunction::cosine(), {16, 32}, 2000, 8, 1.0);
  ASSERT_EQ(res.rungs.size(), 2u);
  for (const auto& r : res.rungs) EXPECT_TRUE(std::isfinite(r.estimate));
  EXPECT_THROW(verify_pathwise_formula(k, TestFunction::cosine(), {}, 10, 1, 1.0), DomainError);
}

TEST(Pathwise, IndependentOfThreadCount) {
  const auto k = Kernel::riemann_liouville(0.25, 1.0);
  VerifyOptions a, b;
  a.threads = 1;
  b.threads = 3;
  b.block = 17;
  const auto ra = pathwise_residuals(k, TestFunction::cosine(), 32, 500, 2, 1.0, a);
  const auto rb = pathwise_residuals(k, TestFunction::cosine(), 32, 500, 2, 1.0, b);
  EXPECT_EQ(ra, rb);
}

TEST(Multivariate, SharedBrownianDriver) {
  const auto b = Kernel::brownian(1.0);
  const auto grid = TimeGrid::uniform(1.0, 16);
  const auto xy = verify_multivariate(b, b, Phi2::product, grid, 20000, 4, 0.5);
  EXPECT_NEAR(xy[0].reference, 0.5, 1e-12);
  EXPECT_TRUE(xy[0].pass);
  const auto ss = verify_multivariate(Kernel::riemann_liouville(0.25, 1.0), b, Phi2::sum_of_squares, grid, 20000, 4, 1.0);
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_NEAR(ss[0].reference, 1.0, 1e-12);
  EXPECT_NEAR(ss[1].reference, 1.0, 1e-12);
  for (const auto& r : ss) EXPECT_TRUE(r.pass) << r.summary_line();
}

TEST(Uniqueness, MollifiedSquareShiftIsEpsTimesT) {
  const auto grid = TimeGrid::uniform(1.0, 256);
  for (const auto& k : {Kernel::brownian(1.0), Kernel::riemann_liouville(0.25, 1.0),
                        Kernel::exp_sum({1.0, 2.0}, {1.0, 8.0}, 1.0)}) {
    for (double eps : {0.01, -0.02}) {
      const auto r = verify_uniqueness_perturbation(k, TestFunction::mollified_square(), eps, grid, 1.0);
      EXPECT_NEAR(r.residual, eps, 1e-12);
      EXPECT_TRUE(r.report.pass);
      EXPECT_GE(r.detection_ratio, 5.0);
    }
    const auto zero = verify_uniqueness_perturbation(k, TestFunction::mollified_square(), 0.0, grid, 1.0);
    EXPECT_TRUE(zero.report.pass);
  }
}

TEST(Uniqueness, CosineShiftMatchesOneDimensionalIntegral) {
  // 1/2 eps int_0^1 E[-cos X_s] ds = -eps/2 * (8 - 12 e^{-1/2}) for Gamma(s) = s^{1/2}
  const auto grid = TimeGrid::uniform(1.0, 1024);
  const auto r = verify_uniqueness_perturbation(Kernel::riemann_liouville(0.25, 1.0), TestFunction::cosine(), 0.01, grid, 1.0);
  const double want = -0.005 * (8.0 - 12.0 * std::exp(-0.5));
  EXPECT_NEAR(r.predicted_shift, want, 1e-6);
  EXPECT_NEAR(r.residual, want, 1e-6);
  EXPECT_TRUE(r.report.pass);
}
