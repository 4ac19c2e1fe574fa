#include <gtest/gtest.h>

#include <random>

#include "incstab/contraction.hpp"
#include "incstab/errors.hpp"
#include "incstab/examples.hpp"

using namespace incstab;
namespace sc = incstab::examples::saturated_cascade;

namespace {

VectorField scalar_linear(double a) {
  VectorField f(1, 1, [a](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = a * x[0] + u[0];
  });
  f.with_jacobians([a](const Vec&, const Vec&) { return Mat::Constant(1, 1, a); },
                   [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0); });
  return f;
}

Box box1(double r) { return Box{Vec::Constant(1, -r), Vec::Constant(1, r)}; }
Box box2(double r) { return Box{Vec::Constant(2, -r), Vec::Constant(2, r)}; }

ContractionCheckOptions opts(std::size_t n) {
  ContractionCheckOptions o;
  o.n_samples = n;
  return o;
}

}  // namespace

TEST(Contraction, ScalarRateIsExact) {
  // F = -32 for G = 1, so F + 32 G = 0 exactly and any larger rate fails.
  const MetricField g = MetricField::constant(Mat::Identity(1, 1));
  EXPECT_TRUE(check_contraction_states(scalar_linear(-16), g, 32.0, box1(1), box1(1), opts(200)).pass);
  EXPECT_FALSE(check_contraction_states(scalar_linear(-16), g, 32.5, box1(1), box1(1), opts(200)).pass);
}

TEST(Contraction, ScalarInputCoefficient) {
  const MetricField g = MetricField::constant(Mat::Identity(1, 1));
  const auto ok = check_contraction_states_inputs(scalar_linear(-16), g, 32.0, 2.0, box1(1), box1(1), opts(200));
  EXPECT_TRUE(ok.pass);
  EXPECT_DOUBLE_EQ(ok.values.at("fitted_alpha"), 2.0);
  EXPECT_FALSE(check_contraction_states_inputs(scalar_linear(-16), g, 32.0, 1.0, box1(1), box1(1), opts(200)).pass);
}

TEST(Contraction, RequiredGainFormula) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(0.1, 50.0);
  for (int i = 0; i < 100; ++i) {
    const double l = d(rng), a = d(rng);
    EXPECT_DOUBLE_EQ(required_gain_contraction(l, a), a * a / (8.0 * l));
  }
  EXPECT_THROW(required_gain_contraction(0.0, 1.0), ContractViolation);
}

TEST(Contraction, BlockMetricMatchesComposedMatrix) {
  const MetricField g = build_block_metric(MetricField::constant(Mat::Identity(1, 1)), sc::psi());
  ASSERT_TRUE(g.is_constant());
  Mat p(2, 2);
  p << 2, 1, 1, 1;
  EXPECT_EQ(*g.constant_value(), p);
}

TEST(Contraction, BlockMetricNonlinearPsi) {
  // psi(y) = -y^3: G~(x) = [[1 + 9 y^4, 3 y^2], [3 y^2, 1]] and it varies with y.
  const Polynomial y = Polynomial::variable(1, 0);
  const StabilizingFunction psi = StabilizingFunction::polynomial(PolynomialMap(1, {-(y * y * y)}));
  const MetricField g = build_block_metric(MetricField::constant(Mat::Identity(1, 1)), psi);
  EXPECT_FALSE(g.is_constant());
  Vec x(2);
  x << 0.5, 0.1;
  const Mat m = g(x);
  EXPECT_NEAR(m(0, 0), 1 + 9 * std::pow(0.5, 4), 1e-12);
  EXPECT_NEAR(m(0, 1), 3 * 0.25, 1e-12);
  EXPECT_NEAR(m(1, 1), 1.0, 1e-12);
}

TEST(Contraction, SubsystemUnitMetric) {
  const MetricField g = MetricField::constant(Mat::Identity(1, 1));
  const auto r = check_contraction_states_inputs(sc::eta_subsystem(), g, sc::kSubsystemRate, sc::kSubsystemAlpha,
                                                 box1(2), box1(10), opts(5000));
  EXPECT_TRUE(r.pass);
  EXPECT_GT(sc::kLambda, required_gain_contraction(sc::kSubsystemRate, sc::kSubsystemAlpha));
}

TEST(Contraction, ClosedLoopBlockMetricSmoothRegion) {
  Mat p(2, 2);
  p << 2, 1, 1, 1;
  const auto r = check_contraction_states_inputs(sc::closed_loop_expanded(), MetricField::constant(p), 5.0, 2.0,
                                                 box2(0.99), box1(10), opts(5000));
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.values.at("fitted_rate"), 5.0);
}

TEST(Contraction, NonsmoothSamplesSkipped) {
  // Sample exactly on the saturation kink.
  const MetricField g = MetricField::constant(Mat::Identity(1, 1));
  const Curvature c = curvature_matrix(sc::eta_field(), g, Vec::Constant(1, 1.0), Vec::Zero(1));
  EXPECT_TRUE(c.nonsmooth);
  const Curvature s = curvature_matrix(sc::eta_field(), g, Vec::Constant(1, 0.3), Vec::Zero(1));
  EXPECT_FALSE(s.nonsmooth);
  EXPECT_NEAR(s.F(0, 0), 4.0, 1e-8);
}

TEST(Contraction, TrajectoryBound) {
  const ConstantMetric m(Mat::Identity(1, 1), 32.0, 2.0);
  std::vector<TrajectoryPair> pairs{{Vec::Constant(1, 1.0), Vec::Constant(1, -0.5),
                                     InputSignal::constant(Vec::Constant(1, 3.0)), InputSignal::zero(1)}};
  EXPECT_TRUE(check_trajectory_bound(scalar_linear(-16), m, pairs, 1.0, 1e-3).pass);
  EXPECT_FALSE(check_trajectory_bound(scalar_linear(-1), m, pairs, 1.0, 1e-3).pass);
}

TEST(Contraction, InvalidMetricRejected) {
  Mat bad(2, 2);
  bad << 1, 0, 0, -1;
  EXPECT_THROW(MetricField::constant(bad), ContractViolation);
  EXPECT_THROW(ConstantMetric(Mat::Identity(1, 1), 0.0, 1.0), ContractViolation);
}
