#include "incstab/contraction.hpp"

#include <algorithm>
#include <cmath>

#include "incstab/errors.hpp"

namespace incstab {

MetricField::MetricField(std::size_t dim, EvalFn eval, DirectionalFn directional)
    : dim_(dim), eval_(std::move(eval)), directional_(std::move(directional)) {
  if (!eval_) throw ContractViolation("MetricField: empty evaluation function");
}

MetricField MetricField::constant(Mat G) {
  if (!is_symmetric(G)) throw ContractViolation("metric: G is not symmetric");
  if (!(lambda_min(G) > 0.0)) throw ContractViolation("metric: G is not positive definite");
  const auto n = static_cast<std::size_t>(G.rows());
  MetricField m(
      n, [G](const Vec&) { return G; },
      [n](const Vec&, const Vec&) -> Mat { return Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)); });
  m.constant_ = std::move(G);
  return m;
}

Mat MetricField::directional_derivative(const Vec& x, const Vec& v) const {
  if (directional_) return directional_(x, v);
  const double norm = v.norm();
  if (norm == 0.0) return Mat::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  const double h = 1e-6 * std::max(1.0, x.norm()) / norm;
  return (eval_(x + h * v) - eval_(x - h * v)) / (2.0 * h);
}

ConstantMetric::ConstantMetric(Mat g, double lambda_hat_, double alpha_)
    : G(std::move(g)), lambda_hat(lambda_hat_), alpha(alpha_) {
  if (!is_symmetric(G)) throw ContractViolation("constant metric: G is not symmetric");
  if (!(lambda_min(G) > 0.0)) throw ContractViolation("constant metric: G is not positive definite");
  if (!(lambda_hat > 0.0)) throw ContractViolation("constant metric: lambda_hat must be positive");
  if (!(alpha >= 0.0)) throw ContractViolation("constant metric: alpha must be nonnegative");
}

double ConstantMetric::distance(const Vec& a, const Vec& b) const {
  const Vec d = a - b;
  return std::sqrt(std::max(0.0, d.dot(G * d)));
}

namespace {

constexpr double kKinkThreshold = 1e-2;

bool jacobian_discrepancy(const VectorField& field, const Vec& x, const Vec& u) {
  const Vec f0 = field(x, u);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    const Vec fwd = (field(xp, u) - f0) / h;
    const Vec bwd = (f0 - field(xm, u)) / h;
    if ((fwd - bwd).cwiseAbs().maxCoeff() > kKinkThreshold) return true;
  }
  return false;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Curvature curvature_matrix(const VectorField& field, const MetricField& metric, const Vec& x, const Vec& u) {
  if (metric.dim() != field.state_dim()) throw DimensionError("curvature_matrix: metric/field dimension mismatch");
  Curvature c;
  c.nonsmooth = jacobian_discrepancy(field, x, u);
  const Mat A = field.jacobian_x(x, u);
  const Mat G = metric(x);
  Mat F = A.transpose() * G + G * A;
  if (!metric.is_constant()) F += metric.directional_derivative(x, field(x, u));
  c.F = symmetrize(F);
  return c;
}

namespace {

struct PointwiseContraction {
  double states_violation;  // lambda_max(F + lambda_hat G)
  double rate;              // largest admissible lambda_hat at this point
  double input_gain;        // 2 sigma_max(G^{1/2} df/du)
  bool nonsmooth;
};

PointwiseContraction evaluate_point(const VectorField& field, const MetricField& metric, double lambda_hat,
                                    const Vec& x, const Vec& u, bool with_inputs) {
  const Curvature c = curvature_matrix(field, metric, x, u);
  const Mat G = metric(x);
  PointwiseContraction p{};
  p.nonsmooth = c.nonsmooth;
  p.states_violation = lambda_max(symmetrize(c.F + lambda_hat * G));
  const Mat root = sqrt_psd(G);
  const Mat inv_root = root.inverse();
  p.rate = -lambda_max(symmetrize(inv_root * c.F * inv_root));
  if (with_inputs) p.input_gain = 2.0 * sigma_max(root * field.jacobian_u(x, u));
  return p;
}

VerificationReport contraction_check(const VectorField& field, const MetricField& metric, double lambda_hat,
                                     std::optional<double> alpha, const Box& state_box, const Box& input_box,
                                     const ContractionCheckOptions& options) {
  state_box.validate();
  input_box.validate();
  if (static_cast<std::size_t>(state_box.dim()) != field.state_dim() ||
      static_cast<std::size_t>(input_box.dim()) != field.input_dim())
    throw DimensionError("contraction check: box dimensions do not match the field");
  const auto n = state_box.dim();
  const Box full = Box::product(state_box, input_box);
  const Mat unit = unit_samples(static_cast<std::size_t>(full.dim()), options.n_samples, options.scheme, options.seed);

  VerificationReport r;
  r.label = alpha ? "contraction-states-inputs" : "contraction-states";
  double fitted_rate = std::numeric_limits<double>::infinity();
  double fitted_alpha = 0.0;
  for (std::size_t i = 0; i < options.n_samples; ++i) {
    const Vec s = full.from_unit(unit.row(static_cast<Eigen::Index>(i)).transpose());
    const Vec x = s.head(n), u = s.tail(full.dim() - n);
    const PointwiseContraction p = evaluate_point(field, metric, lambda_hat, x, u, alpha.has_value());
    if (p.nonsmooth) {
      ++r.skipped;
      continue;
    }
    ++r.n_samples;
    fitted_rate = std::min(fitted_rate, p.rate);
    double viol = p.states_violation;
    if (alpha) {
      viol = std::max(viol, p.input_gain - *alpha);
      fitted_alpha = std::max(fitted_alpha, p.input_gain);
    }
    std::vector<double> point(s.data(), s.data() + s.size());
    r.absorb(viol, i, std::move(point));
  }
  if (r.skipped > 0)
    r.warnings.push_back(std::to_string(r.skipped) + " samples excluded at nondifferentiable points");
  r.pass = r.n_samples > 0 && r.max_violation <= options.tol;
  r.values["lambda_hat"] = lambda_hat;
  r.values["fitted_rate"] = fitted_rate;
  if (alpha) {
    r.values["alpha"] = *alpha;
    r.values["fitted_alpha"] = fitted_alpha;
  }
  return r;
}

}  // namespace

VerificationReport check_contraction_states(const VectorField& field, const MetricField& metric, double lambda_hat,
                                            const Box& state_box, const Box& input_box,
                                            const ContractionCheckOptions& options) {
  return contraction_check(field, metric, lambda_hat, std::nullopt, state_box, input_box, options);
}

VerificationReport check_contraction_states_inputs(const VectorField& field, const MetricField& metric,
                                                   double lambda_hat, double alpha, const Box& state_box,
                                                   const Box& input_box, const ContractionCheckOptions& options) {
  return contraction_check(field, metric, lambda_hat, alpha, state_box, input_box, options);
}

MetricField build_block_metric(const MetricField& g_hat, const StabilizingFunction& psi) {
  if (psi.in_dim() != g_hat.dim())
    throw DimensionError("build_block_metric: psi domain does not match the metric dimension");
  const auto ny = static_cast<Eigen::Index>(psi.in_dim());
  const auto nz = static_cast<Eigen::Index>(psi.out_dim());
  auto assemble = [g_hat, psi, ny, nz](const Vec& x) -> Mat {
    if (x.size() != ny + nz) throw DimensionError("block metric: argument dimension mismatch");
    const Vec y = x.head(ny);
    const Mat J = psi.jacobian(y);
    Mat G(ny + nz, ny + nz);
    G.topLeftCorner(ny, ny) = g_hat(y) + J.transpose() * J;
    G.topRightCorner(ny, nz) = -J.transpose();
    G.bottomLeftCorner(nz, ny) = -J;
    G.bottomRightCorner(nz, nz) = Mat::Identity(nz, nz);
    return G;
  };
  if (g_hat.is_constant() && psi.is_affine()) return MetricField::constant(assemble(Vec::Zero(ny + nz)));
  return MetricField(static_cast<std::size_t>(ny + nz), assemble);
}

double required_gain_contraction(double lambda_hat, double alpha) {
  if (!(lambda_hat > 0.0)) throw ContractViolation("required_gain_contraction: lambda_hat must be positive");
  return alpha * alpha / (8.0 * lambda_hat);
}

VerificationReport check_trajectory_bound(const VectorField& field, const ConstantMetric& metric,
                                          std::span<const TrajectoryPair> pairs, double horizon, double step,
                                          double tol) {
  ExponentialBound bound;
  bound.C = 1.0;
  bound.lambda_decay = metric.lambda_hat / 2.0;
  bound.gamma = metric.alpha / metric.lambda_hat;
  bound.metric = metric.G;
  VerificationReport r = check_delta_iss_empirical(field, pairs, bound, horizon, step, tol);
  r.label = "contraction-trajectory-bound";
  return r;
}

}  // namespace incstab
