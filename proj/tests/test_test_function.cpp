#include <cmath>

#include <gtest/gtest.h>

#include <volterra_ito/test_function.hpp>

using namespace vito;

namespace {

double central_diff(const TestFunction& f, unsigned order, double x, double h = 1e-5) {
  return (f.derivative(order, x + h) - f.derivative(order, x - h)) / (2.0 * h);
}

}  // namespace

TEST(TestFunction, ParseForms) {
  EXPECT_EQ(TestFunction::parse("square").to_json(), TestFunction::polynomial({0, 0, 1}).to_json());
  EXPECT_EQ(TestFunction::parse("cos").to_json()["a"], 1.0);
  EXPECT_EQ(TestFunction::parse("cos:2.5").to_json()["a"], 2.5);
  EXPECT_EQ(TestFunction::parse("mollified").to_json()["n"], 20.0);
  EXPECT_EQ(TestFunction::parse("mollified:5").to_json()["n"], 5.0);
  EXPECT_EQ(TestFunction::parse("poly:1,0,3").value(2.0), 13.0);
  EXPECT_EQ(TestFunction::parse("const:4").value(-7.0), 4.0);
  EXPECT_THROW(TestFunction::parse("sin"), DomainError);
  EXPECT_THROW(TestFunction::parse("cos:abc"), DomainError);
  EXPECT_THROW(TestFunction::parse("poly:1,x"), DomainError);
  EXPECT_THROW(TestFunction::parse("mollified:-1"), DomainError);
}

TEST(TestFunction, DerivativesMatchFiniteDifferences) {
  for (const auto& f : {TestFunction::cosine(1.7), TestFunction::polynomial({1, -2, 0.5, 0.25}),
                        TestFunction::mollified_square(3.0)}) {
    for (double x : {-5.1, -4.2, -0.3, 0.0, 1.1, 3.5, 4.4, 5.9}) {
      EXPECT_NEAR(f.derivative(1, x), central_diff(f, 0, x), 1e-6 * std::max(1.0, std::abs(f.derivative(1, x))));
      EXPECT_NEAR(f.derivative(2, x), central_diff(f, 1, x), 1e-6 * std::max(1.0, std::abs(f.derivative(2, x))));
    }
  }
}

TEST(TestFunction, MollifiedSquareShape) {
  const auto f = TestFunction::mollified_square(4.0);
  for (double x : {-4.0, -2.0, 0.0, 1.5, 4.0}) {
    EXPECT_EQ(f.derivative(2, x), 2.0);
    EXPECT_EQ(f.value(x), x * x);
  }
  for (double x : {-8.0, 8.0, 11.0}) {
    EXPECT_EQ(f.value(x), 0.0);
    EXPECT_EQ(f.derivative(1, x), 0.0);
    EXPECT_EQ(f.derivative(2, x), 0.0);
  }
  // phi'' is continuous across the cutoff boundaries.
  for (double edge : {4.0, 8.0})
    EXPECT_NEAR(f.derivative(2, edge - 1e-9), f.derivative(2, edge + 1e-9), 1e-6);
  EXPECT_FALSE(f.constant_second_derivative());
  EXPECT_TRUE(TestFunction::square().constant_second_derivative());
  EXPECT_FALSE(TestFunction::polynomial({0, 0, 0, 1}).constant_second_derivative());
}

TEST(TestFunction, PolynomialGaussianMoments) {
  const double m = 0.7, v = 1.9;
  // E[(m + sZ)^4] = m^4 + 6 m^2 s^2 + 3 s^4
  const double want = std::pow(m, 4) + 6 * m * m * v + 3 * v * v;
  EXPECT_NEAR(TestFunction::polynomial({0, 0, 0, 0, 1}).gaussian_expectation(0, m, v), want, 1e-13);
  EXPECT_NEAR(TestFunction::square().gaussian_expectation(1, m, v), 2 * m, 1e-15);
  EXPECT_NEAR(TestFunction::square().gaussian_expectation(2, m, v), 2.0, 1e-15);
  EXPECT_NEAR(*TestFunction::square().closed_form_expectation(m, v), m * m + v, 1e-15);
}

TEST(TestFunction, CosineClosedFormAgreesWithQuadrature) {
  const auto f = TestFunction::cosine(1.3);
  for (double m : {0.0, 0.4, -1.1})
    for (double v : {0.0, 0.5, 2.0, 3.0}) {
      const double cf = *f.closed_form_expectation(m, v);
      EXPECT_NEAR(cf, std::cos(1.3 * m) * std::exp(-0.5 * 1.69 * v), 1e-15);
      EXPECT_NEAR(f.gaussian_expectation(0, m, v), cf, 1e-10);
    }
  EXPECT_FALSE(TestFunction::mollified_square().closed_form_expectation(0.0, 1.0).has_value());
}

TEST(TestFunction, MollifiedExpectationReducesToSquareOnVisitedSupport) {
  const auto f = TestFunction::mollified_square(20.0);
  EXPECT_NEAR(f.gaussian_expectation(2, 0.0, 1.0), 2.0, 1e-13);
  EXPECT_NEAR(f.gaussian_expectation(0, 0.0, 1.0), 1.0, 1e-13);
}
