#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "incstab/dynamics.hpp"
#include "incstab/stabilizer.hpp"

namespace incstab {

/// eta' = f(eta, zeta_1), zeta_i' = zeta_{i+1}, zeta_k' = g(x) + u.
/// The drift g is zero for the pure integrator chain; a nonzero drift is
/// removed by an input pre-transformation u = u^ - g(x).
class CascadeSystem {
 public:
  using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;

  CascadeSystem(VectorField eta_field, std::size_t layers = 1);

  CascadeSystem& with_drift(DriftFn drift, std::optional<PolynomialMap> polynomial = std::nullopt);

  const VectorField& eta_field() const { return eta_field_; }
  std::size_t layers() const { return layers_; }
  std::size_t n_eta() const { return eta_field_.state_dim(); }
  std::size_t n_zeta() const { return eta_field_.input_dim(); }
  std::size_t state_dim() const { return n_eta() + layers_ * n_zeta(); }
  bool has_drift() const { return static_cast<bool>(drift_); }
  const DriftFn& drift() const { return drift_; }
  const std::optional<PolynomialMap>& drift_polynomial() const { return drift_poly_; }

  /// The plant with u as input.
  VectorField open_loop_field() const;

 private:
  VectorField eta_field_;
  std::size_t layers_;
  DriftFn drift_;
  std::optional<PolynomialMap> drift_poly_;
};

/// Lyapunov pair (kappa, kappa_hat) or metric pair (lambda_hat, alpha)
/// certifying the eta-subsystem; used for the gain warnings.
struct GainCertificate {
  enum class Kind { kLyapunov, kMetric };
  Kind kind;
  double first;
  double second;
  std::string label;

  static GainCertificate lyapunov(double kappa, double kappa_hat, std::string label = {}) {
    return {Kind::kLyapunov, kappa, kappa_hat, std::move(label)};
  }
  static GainCertificate metric(double lambda_hat, double alpha, std::string label = {}) {
    return {Kind::kMetric, lambda_hat, alpha, std::move(label)};
  }
};

/// Warning strings for every certificate whose gain threshold `lambda` misses.
std::vector<std::string> gain_warnings(double lambda, std::span<const GainCertificate> certificates);

/// u = k(x, v) for the full cascade state x; affine in v with unit coefficient.
class FeedbackLaw {
 public:
  using EvalFn = std::function<void(std::span<const double> x, std::span<const double> v, std::span<double> out)>;

  FeedbackLaw(std::size_t state_dim, std::size_t input_dim, EvalFn eval, std::vector<double> lambdas,
              std::string provenance);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  double lambda() const { return lambdas_.front(); }
  const std::vector<double>& lambdas() const { return lambdas_; }
  const std::string& provenance() const { return provenance_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::optional<PolynomialMap>& polynomial() const { return poly_; }

  void eval(std::span<const double> x, std::span<const double> v, std::span<double> out) const { eval_(x, v, out); }
  Vec operator()(const Vec& x, const Vec& v) const;

  /// {construction, lambda, psi, pre_transform}.
  nlohmann::json describe() const { return description_; }

  FeedbackLaw& add_warnings(std::vector<std::string> w);
  FeedbackLaw& set_description(nlohmann::json d) {
    description_ = std::move(d);
    return *this;
  }
  /// State-feedback part k(x, 0) as a polynomial over x, when exact.
  FeedbackLaw& set_polynomial(PolynomialMap p) {
    poly_ = std::move(p);
    return *this;
  }

 private:
  std::size_t state_dim_;
  std::size_t input_dim_;
  EvalFn eval_;
  std::vector<double> lambdas_;
  std::string provenance_;
  std::vector<std::string> warnings_;
  nlohmann::json description_;
  std::optional<PolynomialMap> poly_;
};

/// k(eta, zeta, v) = -lambda (zeta - psi(eta)) + dpsi/deta(eta) f(eta, zeta) + v.
FeedbackLaw synthesize_law(const CascadeSystem& sys, const StabilizingFunction& psi, double lambda,
                           std::span<const GainCertificate> certificates = {});

/// Layer-by-layer construction for k > 1 integrators. Requires polynomial f
/// and psi; anything else raises UnsupportedConfiguration.
FeedbackLaw synthesize_recursive(const CascadeSystem& sys, const StabilizingFunction& psi,
                                 std::span<const double> lambdas, std::span<const GainCertificate> certificates = {});

/// Pre-transformation map x -> R^m with an optional polynomial description.
struct InputTransform {
  std::function<void(std::span<const double> x, std::span<double> out)> eval;
  std::optional<PolynomialMap> polynomial;

  static InputTransform from_polynomial(PolynomialMap p);
};

/// u = k(x, v) - pre(x).
FeedbackLaw apply_input_transform(const FeedbackLaw& law, const InputTransform& pre);

/// x' = (f(eta, zeta_1), zeta_2, ..., g(x) + k(x, v)) with v the exogenous input.
VectorField closed_loop_field(const CascadeSystem& sys, const FeedbackLaw& law);

/// (y, z) -> (y, z - psi(y)) on a single-layer cascade state.
Vec transform_coordinates(const Vec& x, const StabilizingFunction& psi);
Vec inverse_transform_coordinates(const Vec& chi, const StabilizingFunction& psi);

nlohmann::json polynomial_map_to_json(const PolynomialMap& p);
PolynomialMap polynomial_map_from_json(const nlohmann::json& j, std::size_t n_vars);
nlohmann::json psi_to_json(const StabilizingFunction& psi);

}  // namespace incstab
