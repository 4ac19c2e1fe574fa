#include <gtest/gtest.h>

#include <random>

#include "incstab/errors.hpp"
#include "incstab/examples.hpp"
#include "incstab/lyapunov.hpp"

using namespace incstab;
namespace sc = incstab::examples::saturated_cascade;

namespace {

Box box2(double r) { return Box{Vec::Constant(2, -r), Vec::Constant(2, r)}; }
Box box1(double r) { return Box{Vec::Constant(1, -r), Vec::Constant(1, r)}; }

Mat paper_p() {
  Mat p(2, 2);
  p << 2, 1, 1, 1;
  return p;
}

DecayCheckOptions opts(std::size_t n) {
  DecayCheckOptions o;
  o.n_samples = n;
  return o;
}

}  // namespace

TEST(Lyapunov, RequiredGain) {
  EXPECT_EQ(required_gain(5.0, 25.0), 15.5);
  EXPECT_EQ(required_gain(1.0, 0.0), 1.0);
  EXPECT_THROW(required_gain(0.0, 1.0), ContractViolation);
}

TEST(Lyapunov, ComposedMatrixIsExact) {
  const ComposedForm c = compose_lyapunov(sc::v1(), sc::psi());
  ASSERT_TRUE(c.matrix().has_value());
  EXPECT_EQ(*c.matrix(), paper_p());
  const auto q = c.as_quadratic();
  ASSERT_TRUE(q.has_value());
  EXPECT_EQ(q->kappa(), 5.0);
  EXPECT_EQ(q->kappa_hat(), 1.0);
}

TEST(Lyapunov, ComposedValueMatchesDefinition) {
  // V~ = V^(y, y') + ((z - psi(y)) - (z' - psi(y')))^2 with psi(y) = -y
  const ComposedForm c = compose_lyapunov(sc::v1(), sc::psi());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int i = 0; i < 200; ++i) {
    Vec x(2), xp(2);
    x << d(rng), d(rng);
    xp << d(rng), d(rng);
    const double dy = x(0) - xp(0), dchi = (x(1) + x(0)) - (xp(1) + xp(0));
    EXPECT_NEAR(c.value(x, xp), dy * dy + dchi * dchi, 1e-12);
  }
}

TEST(Lyapunov, RejectsIndefiniteMatrix) {
  Mat p(2, 2);
  p << 1, 2, 2, 1;
  EXPECT_THROW(QuadraticIncrementalForm(p, 1.0, 1.0), ContractViolation);
  EXPECT_THROW(QuadraticIncrementalForm(paper_p(), 0.0, 1.0), ContractViolation);
}

TEST(Lyapunov, SubsystemDecayCertificate) {
  const auto r = verify_condition_iii(sc::eta_subsystem(), sc::v1(), box1(2), box1(10), opts(20000));
  EXPECT_TRUE(r.pass) << r.max_violation;
}

TEST(Lyapunov, ClosedLoopDecayCertificate) {
  const auto r = verify_condition_iii(sc::closed_loop(), sc::composed_form(), box2(2), box1(10), opts(20000));
  EXPECT_TRUE(r.pass) << r.max_violation;
}

TEST(Lyapunov, OpenLoopRejected) {
  const QuadraticIncrementalForm p = sc::composed_form();
  for (double kappa : {0.1, 1.0, 5.0}) {
    const auto r = verify_condition_iii(sc::open_loop(), p, kappa, InputGain::quadratic(1.0), box2(2), box1(10),
                                        opts(5000));
    EXPECT_FALSE(r.pass) << kappa;
  }
}

TEST(Lyapunov, GainBelowThresholdCanFail) {
  // lambda = 4 is far below 15.5; the quadratic certificate no longer holds.
  const auto r = verify_condition_iii(sc::closed_loop(4.0), sc::composed_form(), box2(2), box1(10), opts(5000));
  EXPECT_FALSE(r.pass);
}

TEST(Lyapunov, VerifierDeterministicAcrossThreads) {
  DecayCheckOptions a = opts(8000), b = opts(8000);
  b.threads = 3;
  const auto ra = verify_condition_iii(sc::closed_loop(), sc::composed_form(), box2(2), box1(10), a);
  const auto rb = verify_condition_iii(sc::closed_loop(), sc::composed_form(), box2(2), box1(10), b);
  EXPECT_EQ(ra.to_json(), rb.to_json());
}

TEST(SqrtForm, SandwichBounds) {
  const SqrtForm v(QuadraticIncrementalForm(paper_p(), 5.0, 1.0));
  EXPECT_NEAR(v.lower_coefficient(), std::sqrt((3.0 - std::sqrt(5.0)) / 2.0), 1e-14);
  EXPECT_NEAR(v.upper_coefficient(), std::sqrt((3.0 + std::sqrt(5.0)) / 2.0), 1e-14);
  EXPECT_TRUE(verify_condition_i(v, std::nullopt, box2(2), 5000).pass);
}

TEST(SqrtForm, DecayWithLinearInputGain) {
  // d/dt sqrt(V) <= -2.5 sqrt(V) + |u - u'| / lambda_min(P)
  const QuadraticIncrementalForm q = sc::composed_form();
  const SqrtForm v(q);
  const auto r = verify_condition_iii(sc::closed_loop(), v, 2.5, InputGain::linear(1.0 / q.lambda_min()), box2(2),
                                      box1(10), opts(20000));
  EXPECT_TRUE(r.pass) << r.max_violation;
}

TEST(SqrtForm, LipschitzInSecondArgument) {
  const SqrtForm v(QuadraticIncrementalForm(paper_p(), 5.0, 1.0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    Vec x(2), y(2), z(2);
    x << d(rng), d(rng);
    y << d(rng), d(rng);
    z << d(rng), d(rng);
    EXPECT_LE(std::abs(v.value(x, y) - v.value(x, z)), v.lipschitz_constant() * (y - z).norm() + 1e-12);
  }
}

TEST(Gradients, AnalyticMatchesFiniteDifferences) {
  // Nonlinear psi exercises the general composed gradient.
  const Polynomial y = Polynomial::variable(1, 0);
  const StabilizingFunction psi = StabilizingFunction::polynomial(PolynomialMap(1, {-y - y * y * y * 0.5}));
  const ComposedForm c = compose_lyapunov(sc::v1(), psi);
  const SqrtForm s(sc::composed_form());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  const IncrementalFunction* fns[] = {&c, &s};
  for (const IncrementalFunction* f : fns) {
    for (int i = 0; i < 200; ++i) {
      Vec x(2), xp(2), gx(2), gxp(2);
      x << d(rng), d(rng);
      xp << d(rng), d(rng);
      if ((x - xp).norm() < 1e-2) continue;
      f->gradient(x, xp, gx, gxp);
      const double h = 1e-6;
      for (int k = 0; k < 2; ++k) {
        Vec a = x, b = x;
        a(k) += h;
        b(k) -= h;
        const double fd = (f->value(a, xp) - f->value(b, xp)) / (2 * h);
        EXPECT_NEAR(fd, gx(k), 1e-5 * std::max(1.0, std::abs(gx(k))));
        Vec ap = xp, bp = xp;
        ap(k) += h;
        bp(k) -= h;
        const double fdp = (f->value(x, ap) - f->value(x, bp)) / (2 * h);
        EXPECT_NEAR(fdp, gxp(k), 1e-5 * std::max(1.0, std::abs(gxp(k))));
      }
    }
  }
}
