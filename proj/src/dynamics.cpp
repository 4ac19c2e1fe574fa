#include "incstab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "incstab/errors.hpp"
#include "incstab/sampling.hpp"

namespace incstab {

namespace {

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double fd_step(double x, double h) { return h * std::max(1.0, std::abs(x)); }

}  // namespace

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(std::size_t state_dim, std::size_t input_dim, EvalFn eval, std::string name)
    : state_dim_(state_dim), input_dim_(input_dim), eval_(std::move(eval)), name_(std::move(name)) {
  if (state_dim_ == 0) throw DimensionError("VectorField: state dimension must be positive");
  if (!eval_) throw ContractViolation("VectorField: empty evaluation function");
}

VectorField VectorField::from_polynomial(std::size_t state_dim, std::size_t input_dim, PolynomialMap map,
                                         std::string name) {
  if (map.n_vars() != state_dim + input_dim || map.n_out() != state_dim)
    throw DimensionError("VectorField::from_polynomial: map must be R^(n+m) -> R^n");
  auto poly = std::make_shared<const PolynomialMap>(std::move(map));
  VectorField f(
      state_dim, input_dim,
      [poly, state_dim, input_dim](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
        double buf[64];
        std::vector<double> heap;
        double* z = buf;
        if (state_dim + input_dim > 64) {
          heap.resize(state_dim + input_dim);
          z = heap.data();
        }
        std::copy(x.begin(), x.end(), z);
        std::copy(u.begin(), u.end(), z + state_dim);
        poly->eval(std::span<const double>(z, state_dim + input_dim), dx);
      },
      std::move(name));
  auto jac = [poly, state_dim, input_dim](const Vec& x, const Vec& u) {
    Vec z(static_cast<Eigen::Index>(state_dim + input_dim));
    z << x, u;
    return poly->jacobian(z);
  };
  f.jac_x_ = [jac, state_dim](const Vec& x, const Vec& u) -> Mat {
    return jac(x, u).leftCols(static_cast<Eigen::Index>(state_dim));
  };
  f.jac_u_ = [jac, input_dim](const Vec& x, const Vec& u) -> Mat {
    return jac(x, u).rightCols(static_cast<Eigen::Index>(input_dim));
  };
  f.polynomial_ = std::move(poly);
  return f;
}

VectorField& VectorField::with_jacobians(JacobianFn jac_x, JacobianFn jac_u) {
  jac_x_ = std::move(jac_x);
  jac_u_ = std::move(jac_u);
  return *this;
}

void VectorField::eval(std::span<const double> x, std::span<const double> u, std::span<double> dx) const {
  eval_(x, u, dx);
}

Vec VectorField::operator()(const Vec& x, const Vec& u) const {
  if (static_cast<std::size_t>(x.size()) != state_dim_ || static_cast<std::size_t>(u.size()) != input_dim_)
    throw DimensionError("VectorField: argument dimension mismatch in '" + name_ + "'");
  Vec dx(static_cast<Eigen::Index>(state_dim_));
  eval_(span_of(x), span_of(u), std::span<double>(dx.data(), state_dim_));
  return dx;
}

Mat VectorField::jacobian_x(const Vec& x, const Vec& u) const {
  return jac_x_ ? jac_x_(x, u) : fd_jacobian_x(x, u);
}

Mat VectorField::jacobian_u(const Vec& x, const Vec& u) const {
  return jac_u_ ? jac_u_(x, u) : fd_jacobian_u(x, u);
}

Mat VectorField::fd_jacobian_x(const Vec& x, const Vec& u, double h) const {
  Mat j(static_cast<Eigen::Index>(state_dim_), static_cast<Eigen::Index>(state_dim_));
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double hk = fd_step(x(k), h);
    Vec xp = x, xm = x;
    xp(k) += hk;
    xm(k) -= hk;
    j.col(k) = ((*this)(xp, u) - (*this)(xm, u)) / (2.0 * hk);
  }
  return j;
}

Mat VectorField::fd_jacobian_u(const Vec& x, const Vec& u, double h) const {
  Mat j(static_cast<Eigen::Index>(state_dim_), static_cast<Eigen::Index>(input_dim_));
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double hk = fd_step(u(k), h);
    Vec up = u, um = u;
    up(k) += hk;
    um(k) -= hk;
    j.col(k) = ((*this)(x, up) - (*this)(x, um)) / (2.0 * hk);
  }
  return j;
}

// ---------------------------------------------------------------------------
// InputSignal

InputSignal InputSignal::zero(std::size_t input_dim) {
  InputSignal s;
  s.kind_ = Kind::kZero;
  s.input_dim_ = input_dim;
  s.values_ = {Vec::Zero(static_cast<Eigen::Index>(input_dim))};
  return s;
}

InputSignal InputSignal::constant(Vec value) {
  InputSignal s;
  s.kind_ = Kind::kConstant;
  s.input_dim_ = static_cast<std::size_t>(value.size());
  s.values_ = {std::move(value)};
  return s;
}

InputSignal InputSignal::piecewise(std::vector<Vec> values, double segment_duration) {
  if (values.empty()) throw ContractViolation("InputSignal::piecewise: no segments");
  if (!(segment_duration > 0.0)) throw ContractViolation("InputSignal::piecewise: segment duration must be > 0");
  const auto m = values.front().size();
  for (const auto& v : values)
    if (v.size() != m) throw DimensionError("InputSignal::piecewise: segments differ in dimension");
  InputSignal s;
  s.kind_ = Kind::kPiecewiseConstant;
  s.input_dim_ = static_cast<std::size_t>(m);
  s.values_ = std::move(values);
  s.segment_duration_ = segment_duration;
  return s;
}

std::size_t InputSignal::segment_index(double t) const {
  if (kind_ != Kind::kPiecewiseConstant || t <= 0.0) return 0;
  // Small slack so t = k*d computed in floating point lands in segment k.
  const auto k = static_cast<std::size_t>(std::floor(t / segment_duration_ + 1e-9));
  return std::min(k, values_.size() - 1);
}

Vec InputSignal::value_at(double t) const { return values_[segment_index(t)]; }

// ---------------------------------------------------------------------------
// Integration

Rk4Stepper::Rk4Stepper(const VectorField& field)
    : field_(field),
      k1_(field.state_dim()),
      k2_(field.state_dim()),
      k3_(field.state_dim()),
      k4_(field.state_dim()),
      tmp_(field.state_dim()) {}

void Rk4Stepper::step(std::span<double> x, std::span<const double> u, double h) {
  const std::size_t n = x.size();
  field_.eval(x, u, k1_);
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
  field_.eval(tmp_, u, k2_);
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
  field_.eval(tmp_, u, k3_);
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
  field_.eval(tmp_, u, k4_);
  for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
}

namespace {

bool diverged(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v) || std::abs(v) > kDivergenceThreshold) return true;
  return false;
}

}  // namespace

bool Rk4Stepper::try_advance(std::span<double> x, std::span<const double> u, std::size_t n_steps, double h) {
  for (std::size_t s = 0; s < n_steps; ++s) {
    step(x, u, h);
    if (diverged(x)) return false;
  }
  return true;
}

void Rk4Stepper::advance(std::span<double> x, std::span<const double> u, std::size_t n_steps, double h,
                         double t0) {
  for (std::size_t s = 0; s < n_steps; ++s) {
    step(x, u, h);
    if (diverged(x)) {
      const double t = t0 + static_cast<double>(s + 1) * h;
      throw DivergenceError("integration diverged at t = " + std::to_string(t), t);
    }
  }
}

std::size_t steps_in(double duration, double step) {
  if (!(step > 0.0)) throw ContractViolation("step must be positive");
  if (!(duration >= 0.0)) throw ContractViolation("duration must be nonnegative");
  const double ratio = duration / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ContractViolation("duration " + std::to_string(duration) + " is not a multiple of step " +
                            std::to_string(step));
  return static_cast<std::size_t>(rounded);
}

Trajectory integrate(const VectorField& field, const Vec& x0, const InputSignal& u, double horizon, double step) {
  if (static_cast<std::size_t>(x0.size()) != field.state_dim())
    throw DimensionError("integrate: initial state dimension mismatch");
  if (u.input_dim() != field.input_dim()) throw DimensionError("integrate: input dimension mismatch");
  const std::size_t n_steps = steps_in(horizon, step);
  if (u.kind() == InputSignal::Kind::kPiecewiseConstant) steps_in(u.segment_duration(), step);

  Trajectory traj;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  if (diverged(span_of(x0))) throw DivergenceError("integration diverged at t = 0", 0.0);

  Rk4Stepper stepper(field);
  Vec x = x0;
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = static_cast<double>(i) * step;
    const Vec ui = u.value_at(t);
    stepper.advance(std::span<double>(x.data(), static_cast<std::size_t>(x.size())), span_of(ui), 1, step, t);
    traj.times.push_back(static_cast<double>(i + 1) * step);
    traj.states.push_back(x);
  }
  return traj;
}

double saturation(double x) { return std::clamp(x, -1.0, 1.0); }

Vec project_box(const Vec& u, const Vec& lo, const Vec& hi) {
  Box{lo, hi}.validate();
  if (u.size() != lo.size()) throw DimensionError("project_box: point and box differ in dimension");
  return u.cwiseMax(lo).cwiseMin(hi);
}

// ---------------------------------------------------------------------------
// Empirical incremental ISS check

double ExponentialBound::distance(const Vec& a, const Vec& b) const {
  const Vec d = a - b;
  if (metric) return std::sqrt(std::max(0.0, d.dot(*metric * d)));
  return d.norm();
}

double input_sup_distance(const InputSignal& a, const InputSignal& b, double horizon, double step) {
  const std::size_t n = steps_in(horizon, step);
  double sup = (a.value_at(0.0) - b.value_at(0.0)).norm();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * step;
    sup = std::max(sup, (a.value_at(t) - b.value_at(t)).norm());
  }
  return sup;
}

VerificationReport check_delta_iss_empirical(const VectorField& field, std::span<const TrajectoryPair> pairs,
                                             const ExponentialBound& bound, double horizon, double step,
                                             double tol) {
  VerificationReport report;
  report.label = "delta-iss-empirical";
  report.max_violation = -1.0;
  double worst_ratio = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs[p];
    const Trajectory a = integrate(field, pr.x, pr.u, horizon, step);
    const Trajectory b = integrate(field, pr.x_prime, pr.u_prime, horizon, step);
    const double d0 = bound.distance(pr.x, pr.x_prime);
    const double du = input_sup_distance(pr.u, pr.u_prime, horizon, step);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double t = a.times[i];
      const double lhs = bound.distance(a.states[i], b.states[i]);
      const double rhs = bound.C * std::exp(-bound.lambda_decay * t) * d0 + bound.gamma * du;
      double ratio = 0.0;
      if (lhs > 1e-12) ratio = rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
      ++report.n_samples;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        report.max_violation = ratio - 1.0;
        report.worst_index = p;
        report.worst_point = {static_cast<double>(p), t};
      }
    }
  }
  report.values["worst_ratio"] = worst_ratio;
  report.pass = worst_ratio <= 1.0 + tol;
  return report;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t n = traj.states.empty() ? 0 : static_cast<std::size_t>(traj.states.front().size());
  os << 't';
  for (std::size_t i = 0; i < n; ++i) os << ",x" << (i + 1);
  os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < traj.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[r]);
    os << buf;
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", traj.states[r](static_cast<Eigen::Index>(i)));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace incstab
