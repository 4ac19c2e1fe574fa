#pragma once

#include <functional>
#include <span>

#include "incstab/dynamics.hpp"
#include "incstab/report.hpp"
#include "incstab/sampling.hpp"
#include "incstab/stabilizer.hpp"

namespace incstab {

/// State-dependent symmetric positive definite metric G(x).
class MetricField {
 public:
  using EvalFn = std::function<Mat(const Vec&)>;
  /// Directional derivative sum_k dG/dx_k v_k.
  using DirectionalFn = std::function<Mat(const Vec& x, const Vec& v)>;

  MetricField() = default;
  MetricField(std::size_t dim, EvalFn eval, DirectionalFn directional = {});
  static MetricField constant(Mat G);

  std::size_t dim() const { return dim_; }
  bool is_constant() const { return constant_.has_value(); }
  const std::optional<Mat>& constant_value() const { return constant_; }

  Mat operator()(const Vec& x) const { return eval_(x); }
  /// (dG/dx) v; zero for constant metrics, central differences when no
  /// analytic form was supplied.
  Mat directional_derivative(const Vec& x, const Vec& v) const;

 private:
  std::size_t dim_ = 0;
  EvalFn eval_;
  DirectionalFn directional_;
  std::optional<Mat> constant_;
};

/// Constant metric with contraction rate lambda_hat and input coefficient alpha.
struct ConstantMetric {
  ConstantMetric(Mat G, double lambda_hat, double alpha);

  Mat G;
  double lambda_hat;
  double alpha;

  double distance(const Vec& a, const Vec& b) const;
  MetricField field() const { return MetricField::constant(G); }
};

struct Curvature {
  Mat F;
  /// Forward and backward difference Jacobians disagree by more than 1e-2.
  bool nonsmooth = false;
};

/// F(x,u) = (df/dx)^T G + G df/dx + (dG/dx) f, symmetrized.
Curvature curvature_matrix(const VectorField& field, const MetricField& metric, const Vec& x, const Vec& u);

struct ContractionCheckOptions {
  std::size_t n_samples = 20000;
  double tol = 1e-9;
  SamplingScheme scheme = SamplingScheme::kSobol;
  std::uint64_t seed = 0;
};

/// F + lambda_hat G <= 0 at every sample. Nonsmooth samples are skipped and
/// counted. values["fitted_rate"] is the largest rate the samples support.
VerificationReport check_contraction_states(const VectorField& field, const MetricField& metric, double lambda_hat,
                                            const Box& state_box, const Box& input_box,
                                            const ContractionCheckOptions& options = {});

/// Adds 2 sigma_max(G^{1/2} df/du) <= alpha to the states-only condition.
/// values["fitted_alpha"] is the smallest alpha the samples support.
VerificationReport check_contraction_states_inputs(const VectorField& field, const MetricField& metric,
                                                   double lambda_hat, double alpha, const Box& state_box,
                                                   const Box& input_box, const ContractionCheckOptions& options = {});

/// G~ = [[G^ + J^T J, -J^T], [-J, I]] with J = dpsi/dy.
MetricField build_block_metric(const MetricField& g_hat, const StabilizingFunction& psi);

/// alpha^2 / (8 lambda_hat).
double required_gain_contraction(double lambda_hat, double alpha);

/// d_G(xi, xi') <= e^{-lambda_hat t / 2} d_G(x, x') + (alpha / lambda_hat) ||u - u'||_inf
/// at every integration step, for a constant metric.
VerificationReport check_trajectory_bound(const VectorField& field, const ConstantMetric& metric,
                                          std::span<const TrajectoryPair> pairs, double horizon, double step,
                                          double tol = 1e-6);

}  // namespace incstab
