#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "incstab/dynamics.hpp"
#include "incstab/errors.hpp"

using namespace incstab;

namespace {

VectorField linear(double a) {
  return VectorField(1, 1, [a](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = a * x[0] + u[0];
  });
}

// x'' = -x written as a first order system; exact solution cos/sin.
VectorField oscillator() {
  return VectorField(2, 1, [](std::span<const double> x, std::span<const double>, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -x[0];
  });
}

double endpoint_error(double h) {
  Vec x0(2);
  x0 << 1, 0;
  const Trajectory tr = integrate(oscillator(), x0, InputSignal::zero(1), 2.0, h);
  Vec exact(2);
  exact << std::cos(2.0), -std::sin(2.0);
  return (tr.final_state() - exact).norm();
}

}  // namespace

TEST(Rk4, FourthOrderConvergence) {
  const double e1 = endpoint_error(0.1), e2 = endpoint_error(0.05), e3 = endpoint_error(0.025);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2);
  EXPECT_NEAR(std::log2(e2 / e3), 4.0, 0.2);
}

TEST(Rk4, ExponentialDecayAccurate) {
  Vec x0 = Vec::Constant(1, 1.0);
  const Trajectory tr = integrate(linear(-16.0), x0, InputSignal::zero(1), 0.1, 1e-3);
  EXPECT_NEAR(tr.final_state()(0), std::exp(-1.6), 1e-9);
  EXPECT_EQ(tr.size(), 101u);
}

TEST(Integrate, ZeroHorizonSingleSample) {
  const Trajectory tr = integrate(linear(-1.0), Vec::Constant(1, 2.0), InputSignal::zero(1), 0.0, 1e-3);
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr.states[0](0), 2.0);
}

TEST(Integrate, StepMustDivideHorizon) {
  EXPECT_THROW(integrate(linear(-1.0), Vec::Zero(1), InputSignal::zero(1), 0.1005, 1e-3), ContractViolation);
  EXPECT_EQ(steps_in(0.1, 1e-3), 100u);
}

TEST(Integrate, DivergenceReportsTime) {
  try {
    integrate(linear(50.0), Vec::Constant(1, 1.0), InputSignal::zero(1), 2.0, 1e-3);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_LT(e.time(), 2.0);
  }
}

TEST(InputSignal, PiecewiseHoldsLastValue) {
  const InputSignal s = InputSignal::piecewise({Vec::Constant(1, 1.0), Vec::Constant(1, -2.0)}, 0.1);
  EXPECT_EQ(s.value_at(0.05)(0), 1.0);
  EXPECT_EQ(s.value_at(0.1)(0), -2.0);
  EXPECT_EQ(s.value_at(5.0)(0), -2.0);
}

TEST(ProjectBox, NonexpansiveOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-5, 5);
  const Vec lo = Vec::Constant(3, -1.0), hi = Vec::Constant(3, 2.0);
  for (int i = 0; i < 1000; ++i) {
    Vec a(3), b(3);
    for (int k = 0; k < 3; ++k) {
      a(k) = d(rng);
      b(k) = d(rng);
    }
    EXPECT_LE((project_box(a, lo, hi) - project_box(b, lo, hi)).norm(), (a - b).norm() + 1e-15);
  }
}

TEST(ProjectBox, RejectsInvertedBox) {
  EXPECT_THROW(project_box(Vec::Zero(1), Vec::Constant(1, 1.0), Vec::Constant(1, 0.0)), InvalidSetError);
}

TEST(Saturation, Clamps) {
  EXPECT_EQ(saturation(3.0), 1.0);
  EXPECT_EQ(saturation(-3.0), -1.0);
  EXPECT_EQ(saturation(0.25), 0.25);
}

TEST(DeltaIss, LinearContractionMeetsExactBound) {
  // x' = -2x + u: |x - x'|(t) <= e^{-2t}|x0 - x0'| + (1/2) sup|u - u'|
  std::vector<TrajectoryPair> pairs;
  pairs.push_back({Vec::Constant(1, 1.0), Vec::Constant(1, -1.0), InputSignal::constant(Vec::Constant(1, 0.5)),
                   InputSignal::constant(Vec::Constant(1, -0.5))});
  pairs.push_back({Vec::Constant(1, 0.3), Vec::Constant(1, 0.2), InputSignal::zero(1), InputSignal::zero(1)});
  const ExponentialBound bound{1.0, 2.0, 0.5, std::nullopt};
  EXPECT_TRUE(check_delta_iss_empirical(linear(-2.0), pairs, bound, 3.0, 1e-3).pass);
  // An unstable system violates the same bound.
  EXPECT_FALSE(check_delta_iss_empirical(linear(1.0), pairs, bound, 3.0, 1e-3).pass);
}

TEST(Jacobians, FiniteDifferenceFallback) {
  const VectorField f(2, 1, [](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = x[0] * x[1];
    dx[1] = std::sin(x[0]) + u[0] * u[0];
  });
  Vec x(2), u(1);
  x << 0.4, -1.2;
  u << 0.7;
  Mat jx(2, 2), ju(2, 1);
  jx << x(1), x(0), std::cos(x(0)), 0.0;
  ju << 0.0, 2 * u(0);
  EXPECT_LT((f.jacobian_x(x, u) - jx).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((f.jacobian_u(x, u) - ju).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(TrajectoryCsv, HeaderAndRows) {
  const Trajectory tr = integrate(oscillator(), Vec::Ones(2), InputSignal::zero(1), 0.002, 1e-3);
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,x1,x2");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
