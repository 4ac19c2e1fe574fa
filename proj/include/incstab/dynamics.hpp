#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "incstab/linalg.hpp"
#include "incstab/polynomial.hpp"
#include "incstab/report.hpp"

namespace incstab {

/// Right-hand side f(x, u) of a control system x' = f(x, u).
class VectorField {
 public:
  using EvalFn =
      std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> dx)>;
  using JacobianFn = std::function<Mat(const Vec& x, const Vec& u)>;

  VectorField() = default;
  VectorField(std::size_t state_dim, std::size_t input_dim, EvalFn eval, std::string name = {});

  /// Field given by a polynomial map over the stacked variables (x, u).
  /// Jacobians are exact and the symbolic form stays available.
  static VectorField from_polynomial(std::size_t state_dim, std::size_t input_dim, PolynomialMap map,
                                     std::string name = {});

  VectorField& with_jacobians(JacobianFn jac_x, JacobianFn jac_u);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  const std::string& name() const { return name_; }
  bool has_analytic_jacobians() const { return static_cast<bool>(jac_x_) && static_cast<bool>(jac_u_); }
  const PolynomialMap* polynomial() const { return polynomial_.get(); }

  void eval(std::span<const double> x, std::span<const double> u, std::span<double> dx) const;
  Vec operator()(const Vec& x, const Vec& u) const;

  /// Analytic when supplied, otherwise central differences.
  Mat jacobian_x(const Vec& x, const Vec& u) const;
  Mat jacobian_u(const Vec& x, const Vec& u) const;
  Mat fd_jacobian_x(const Vec& x, const Vec& u, double h = 1e-6) const;
  Mat fd_jacobian_u(const Vec& x, const Vec& u, double h = 1e-6) const;

 private:
  std::size_t state_dim_ = 0;
  std::size_t input_dim_ = 0;
  EvalFn eval_;
  JacobianFn jac_x_;
  JacobianFn jac_u_;
  std::shared_ptr<const PolynomialMap> polynomial_;
  std::string name_;
};

/// Piecewise-constant input curve. Segments are right-continuous:
/// value(t) is the value of the segment [k d, (k+1) d) containing t. Past the
/// last segment the last value is held.
class InputSignal {
 public:
  enum class Kind { kZero, kConstant, kPiecewiseConstant };

  static InputSignal zero(std::size_t input_dim);
  static InputSignal constant(Vec value);
  static InputSignal piecewise(std::vector<Vec> values, double segment_duration);

  Kind kind() const { return kind_; }
  std::size_t input_dim() const { return input_dim_; }
  const std::vector<Vec>& values() const { return values_; }
  double segment_duration() const { return segment_duration_; }

  Vec value_at(double t) const;
  std::size_t segment_index(double t) const;

 private:
  Kind kind_ = Kind::kZero;
  std::size_t input_dim_ = 0;
  std::vector<Vec> values_;
  double segment_duration_ = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;

  std::size_t size() const { return times.size(); }
  const Vec& final_state() const { return states.back(); }
};

/// Any state component above this magnitude aborts integration.
inline constexpr double kDivergenceThreshold = 1e9;

/// Reusable RK4 workspace; `step` advances x in place under a constant input.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(const VectorField& field);
  void step(std::span<double> x, std::span<const double> u, double h);
  /// n steps of size h under constant u. Throws DivergenceError; `t0` only
  /// labels the error.
  void advance(std::span<double> x, std::span<const double> u, std::size_t n_steps, double h,
               double t0 = 0.0);
  /// Same as advance but reports divergence through the return value.
  bool try_advance(std::span<double> x, std::span<const double> u, std::size_t n_steps, double h);

 private:
  const VectorField& field_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/// Number of whole steps of size `step` in `duration`; throws ContractViolation
/// when `duration` is not an integer multiple within 1e-9 relative.
std::size_t steps_in(double duration, double step);

/// Fixed-step RK4 trajectory on [0, horizon].
Trajectory integrate(const VectorField& field, const Vec& x0, const InputSignal& u, double horizon,
                     double step);

/// Clamp to [-1, 1].
double saturation(double x);

/// Euclidean projection onto the box [lo, hi]. Throws InvalidSetError.
Vec project_box(const Vec& u, const Vec& lo, const Vec& hi);

/// beta(r, t) = C e^{-lambda t} r and gamma(r) = gamma r, measured in the
/// Euclidean norm or the norm weighted by a constant G.
struct ExponentialBound {
  double C = 1.0;
  double lambda_decay = 1.0;
  double gamma = 0.0;
  std::optional<Mat> metric;

  double distance(const Vec& a, const Vec& b) const;
};

struct TrajectoryPair {
  Vec x;
  Vec x_prime;
  InputSignal u;
  InputSignal u_prime;
};

/// Worst LHS/RHS ratio of d(xi(t), xi'(t)) <= C e^{-lambda t} d(x,x') + gamma ||u-u'||_inf
/// over all pairs and grid times. `max_violation` holds worst_ratio - 1.
VerificationReport check_delta_iss_empirical(const VectorField& field, std::span<const TrajectoryPair> pairs,
                                             const ExponentialBound& bound, double horizon, double step,
                                             double tol = 1e-6);

/// sup over the integration grid of ||u(t) - u'(t)||.
double input_sup_distance(const InputSignal& a, const InputSignal& b, double horizon, double step);

/// Header `t,x1,...,xn`, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace incstab
