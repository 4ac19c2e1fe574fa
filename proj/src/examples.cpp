#include "incstab/examples.hpp"

#include <cmath>

#include "incstab/errors.hpp"

namespace incstab::examples {

namespace saturated_cascade {

namespace {

double sat_slope(double x) { return std::abs(x) < 1.0 ? 1.0 : 0.0; }

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

}  // namespace

VectorField eta_field() {
  VectorField f(
      1, 1,
      [](std::span<const double> x, std::span<const double> z, std::span<double> dx) {
        dx[0] = saturation(x[0]) + x[0] + 5.0 * z[0];
      },
      kName);
  f.with_jacobians([](const Vec& x, const Vec&) { return scalar(sat_slope(x(0)) + 1.0); },
                   [](const Vec&, const Vec&) { return scalar(5.0); });
  return f;
}

VectorField eta_subsystem() {
  VectorField f(
      1, 1,
      [](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
        dx[0] = saturation(x[0]) - 4.0 * x[0] + 5.0 * u[0];
      },
      std::string(kName) + "/eta-subsystem");
  f.with_jacobians([](const Vec& x, const Vec&) { return scalar(sat_slope(x(0)) - 4.0); },
                   [](const Vec&, const Vec&) { return scalar(5.0); });
  return f;
}

CascadeSystem transformed_system() { return CascadeSystem(eta_field(), 1); }

InputTransform pre_transform() {
  // eta^2 + zeta^2 over (eta, zeta)
  Polynomial p(2);
  p.add_term({2, 0}, 1.0);
  p.add_term({0, 2}, 1.0);
  return InputTransform::from_polynomial(PolynomialMap(2, {p}));
}

CascadeSystem plant() {
  CascadeSystem sys(eta_field(), 1);
  InputTransform g = pre_transform();
  sys.with_drift(g.eval, g.polynomial);
  return sys;
}

StabilizingFunction psi() { return StabilizingFunction::affine(scalar(-1.0), Vec::Zero(1), "psi(eta) = -eta"); }

QuadraticIncrementalForm v1() { return QuadraticIncrementalForm(scalar(1.0), kKappa, kKappaHat); }

std::vector<GainCertificate> certificates() {
  return {GainCertificate::lyapunov(kKappa, kKappaHat, "V1 = (y - y')^2"),
          GainCertificate::metric(kSubsystemRate, kSubsystemAlpha, "unit metric on the eta-subsystem")};
}

FeedbackLaw law(double lambda) {
  const auto certs = certificates();
  return apply_input_transform(synthesize_law(transformed_system(), psi(), lambda, certs), pre_transform());
}

VectorField closed_loop(double lambda) { return closed_loop_field(plant(), law(lambda)); }

VectorField closed_loop_expanded(double lambda) {
  VectorField f(
      2, 1,
      [lambda](std::span<const double> x, std::span<const double> v, std::span<double> dx) {
        const double eta = x[0], zeta = x[1];
        const double eta_dot = saturation(eta) + eta + 5.0 * zeta;
        dx[0] = eta_dot;
        // zeta' = zeta^2 + eta^2 + u with u = k - eta^2 - zeta^2
        dx[1] = -lambda * (zeta + eta) - eta_dot + v[0];
      },
      std::string(kName) + "/closed-loop");
  f.with_jacobians(
      [lambda](const Vec& x, const Vec&) {
        const double s = sat_slope(x(0));
        Mat j(2, 2);
        j << s + 1.0, 5.0, -lambda - s - 1.0, -lambda - 5.0;
        return j;
      },
      [](const Vec&, const Vec&) {
        Mat j(2, 1);
        j << 0.0, 1.0;
        return j;
      });
  return f;
}

VectorField open_loop() { return plant().open_loop_field(); }

QuadraticIncrementalForm composed_form() { return *compose_lyapunov(v1(), psi()).as_quadratic(); }

}  // namespace saturated_cascade

std::vector<std::string> builtin_names() { return {saturated_cascade::kName}; }

}  // namespace incstab::examples
