#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "nmgme/grid_quadrature.hpp"

using namespace nmgme;

namespace {

std::vector<double> sample(const TimeGrid& g, double (*f)(double)) {
  std::vector<double> v;
  for (double t : g.points()) v.push_back(f(t));
  return v;
}

}  // namespace

TEST(TimeGrid, UniformAndEndpoints) {
  const TimeGrid g(1.0, 11);
  EXPECT_EQ(g.size(), 11u);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[10], 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] - g[i - 1], g.step(), 1e-12 * g.step());
}

TEST(TimeGrid, RejectsBadParameters) {
  EXPECT_THROW(TimeGrid(0.0, 11), ParameterError);
  EXPECT_THROW(TimeGrid(1.0, 1), ParameterError);
  EXPECT_THROW(TimeGrid(std::nan(""), 11), ParameterError);
}

TEST(TimeGrid, DefaultDensity) {
  const TimeGrid g = TimeGrid::with_density(2.0);
  EXPECT_EQ(g.size(), 129u);
  EXPECT_DOUBLE_EQ(g.step(), 1.0 / 64.0);
}

TEST(Weights, SumToInterval) {
  for (std::size_t k : {1u, 2u, 7u, 10u})
    for (Rule r : {Rule::Trapezoid, Rule::Simpson}) {
      double s = 0.0;
      for (double w : prefix_weights(k, 0.1, r)) s += w;
      EXPECT_NEAR(s, 0.1 * static_cast<double>(k), 1e-14);
    }
}

TEST(Integrate1d, ConstantIsExact) {
  const TimeGrid g(1.0, 11);
  EXPECT_NEAR(std::abs(integrate_1d(std::vector<double>(11, 1.0), g.step()) - 1.0), 0.0, 1e-15);
}

TEST(Integrate1d, AffineIsExactUnderTrapezoid) {
  const TimeGrid g(1.0, 11);
  const auto v = sample(g, [](double t) { return t; });
  EXPECT_NEAR(integrate_1d(v, g.step()).real(), 0.5, 1e-15);
}

TEST(Integrate1d, SineOverHalfPeriod) {
  const TimeGrid g(std::numbers::pi, 201);
  const auto v = sample(g, [](double t) { return std::sin(t); });
  EXPECT_NEAR(integrate_1d(v, g.step()).real(), 2.0, 1e-4);
  EXPECT_NEAR(integrate_1d(v, g.step(), Rule::Simpson).real(), 2.0, 1e-8);
}

TEST(Integrate1d, SimpsonOddPanelFallback) {
  // 3 panels: Simpson on the first two, trapezoid on the last.
  const TimeGrid g(0.3, 4);
  const auto v = sample(g, [](double t) { return t * t; });
  const double h = g.step();
  const double expect = h / 3.0 * (0.0 + 4.0 * h * h + 4.0 * h * h) + 0.5 * h * (4.0 * h * h + 9.0 * h * h);
  EXPECT_NEAR(integrate_1d(v, h, Rule::Simpson).real(), expect, 1e-15);
}

TEST(Integrate1d, NonFiniteSampleReportsIndex) {
  std::vector<double> v(5, 1.0);
  v[3] = std::nan("");
  try {
    integrate_1d(v, 0.1);
    FAIL() << "expected NonFiniteSample";
  } catch (const NonFiniteSample& e) {
    EXPECT_EQ(e.index(), 3u);
  }
}

TEST(Integrate1d, Linearity) {
  const TimeGrid g(2.0, 33);
  std::vector<cplx> f, h, mix;
  const cplx a(0.3, -1.2), b(2.5, 0.7);
  for (double t : g.points()) {
    f.push_back(std::exp(-t));
    h.push_back(cplx(std::cos(3 * t), t * t));
    mix.push_back(a * f.back() + b * h.back());
  }
  const cplx lhs = integrate_1d(mix, g.step());
  const cplx rhs = a * integrate_1d(f, g.step()) + b * integrate_1d(h, g.step());
  EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-14);
}

TEST(Integrate1d, RefinementConvergesAtSecondOrder) {
  const auto err = [](std::size_t n) {
    const TimeGrid g(1.0, n);
    std::vector<double> v;
    for (double t : g.points()) v.push_back(std::exp(t));
    return std::abs(integrate_1d(v, g.step()).real() - (std::exp(1.0) - 1.0));
  };
  EXPECT_GE(err(17) / err(33), 3.0);
  EXPECT_GE(err(33) / err(65), 3.0);
}

TEST(IntegrateTriangular, AreaOfTriangle) {
  const TimeGrid g(1.0, 21);
  EXPECT_NEAR(integrate_triangular([](std::size_t, std::size_t) { return cplx(1.0); }, 20, g.step()).real(), 0.5,
              1e-10);
}

TEST(IntegrateTriangular, ZeroIntegrand) {
  EXPECT_EQ(integrate_triangular([](std::size_t, std::size_t) { return cplx(0.0); }, 10, 0.1), cplx(0.0));
}

TEST(IntegrateTriangular, ExponentialDifference) {
  const TimeGrid g(1.0, 201);
  const auto f = [&](std::size_t a, std::size_t b) { return cplx(std::exp(-(g[a] - g[b]))); };
  EXPECT_NEAR(integrate_triangular(f, 200, g.step()).real(), std::exp(-1.0), 1e-3);
}

TEST(IntegrateTriangular, NonFiniteSample) {
  const auto f = [](std::size_t a, std::size_t b) { return a == 2 && b == 1 ? cplx(INFINITY) : cplx(1.0); };
  EXPECT_THROW(integrate_triangular(f, 4, 0.1), NonFiniteSample);
}

TEST(Step, HalfAtCoincidence) {
  EXPECT_EQ(step(0.0), 0.5);
  EXPECT_EQ(step(1e-300), 1.0);
  EXPECT_EQ(step(-1e-300), 0.0);
  EXPECT_EQ(step_index(3, 3), 0.5);
  EXPECT_EQ(step_index(4, 3), 1.0);
  EXPECT_EQ(step_index(2, 3), 0.0);
}

TEST(SegmentWeights, SubInterval) {
  const auto w = segment_weights(3, 7, 0.25);
  ASSERT_EQ(w.size(), 5u);
  double s = 0.0;
  for (double x : w) s += x;
  EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_EQ(segment_weights(4, 4, 0.25)[0], 0.0);
}
