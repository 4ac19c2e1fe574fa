#include "incstab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "incstab/errors.hpp"

namespace incstab {

namespace {

std::vector<double> concat(std::initializer_list<const Vec*> parts) {
  std::vector<double> out;
  for (const Vec* p : parts) out.insert(out.end(), p->data(), p->data() + p->size());
  return out;
}

}  // namespace

QuadraticIncrementalForm::QuadraticIncrementalForm(Mat P, double kappa, double kappa_hat)
    : P_(std::move(P)), kappa_(kappa), kappa_hat_(kappa_hat) {
  if (!is_symmetric(P_)) throw ContractViolation("quadratic form: P is not symmetric");
  const Vec ev = eigen_symmetric(P_);
  lambda_min_ = ev(0);
  lambda_max_ = ev(ev.size() - 1);
  if (!(lambda_min_ > 0.0)) throw ContractViolation("quadratic form: P is not positive definite");
  if (!(kappa_ > 0.0)) throw ContractViolation("quadratic form: kappa must be positive");
  if (!(kappa_hat_ >= 0.0)) throw ContractViolation("quadratic form: kappa_hat must be nonnegative");
}

double QuadraticIncrementalForm::value(const Vec& x, const Vec& xp) const {
  const Vec d = x - xp;
  return d.dot(P_ * d);
}

void QuadraticIncrementalForm::gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const {
  gx = 2.0 * (P_ * (x - xp));
  gxp = -gx;
}

SqrtForm::SqrtForm(QuadraticIncrementalForm base) : base_(std::move(base)) {}

double SqrtForm::value(const Vec& x, const Vec& xp) const { return std::sqrt(base_.value(x, xp)); }

void SqrtForm::gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const {
  const double v = value(x, xp);
  gx = (base_.P() * (x - xp)) / v;
  gxp = -gx;
}

ComposedForm::ComposedForm(QuadraticIncrementalForm inner, StabilizingFunction psi)
    : inner_(std::move(inner)), psi_(std::move(psi)) {
  if (psi_.in_dim() != inner_.dim())
    throw DimensionError("compose_lyapunov: psi domain dimension " + std::to_string(psi_.in_dim()) +
                         " does not match V^ dimension " + std::to_string(inner_.dim()));
}

double ComposedForm::value(const Vec& x, const Vec& xp) const {
  const auto ny = static_cast<Eigen::Index>(inner_.dim());
  const auto nz = static_cast<Eigen::Index>(psi_.out_dim());
  const Vec y = x.head(ny), yp = xp.head(ny);
  const Vec e = (x.tail(nz) - psi_(y)) - (xp.tail(nz) - psi_(yp));
  return inner_.value(y, yp) + e.squaredNorm();
}

void ComposedForm::gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const {
  const auto ny = static_cast<Eigen::Index>(inner_.dim());
  const auto nz = static_cast<Eigen::Index>(psi_.out_dim());
  const Vec y = x.head(ny), yp = xp.head(ny);
  const Vec e = (x.tail(nz) - psi_(y)) - (xp.tail(nz) - psi_(yp));
  Vec gy, gyp;
  inner_.gradient(y, yp, gy, gyp);
  gx.resize(ny + nz);
  gxp.resize(ny + nz);
  gx.head(ny) = gy - 2.0 * psi_.jacobian(y).transpose() * e;
  gx.tail(nz) = 2.0 * e;
  gxp.head(ny) = gyp + 2.0 * psi_.jacobian(yp).transpose() * e;
  gxp.tail(nz) = -2.0 * e;
}

std::optional<Mat> ComposedForm::matrix() const {
  if (!psi_.is_affine()) return std::nullopt;
  const Mat& A = psi_.affine_data()->first;
  const auto ny = static_cast<Eigen::Index>(inner_.dim());
  const auto nz = static_cast<Eigen::Index>(psi_.out_dim());
  Mat P(ny + nz, ny + nz);
  P.topLeftCorner(ny, ny) = inner_.P() + A.transpose() * A;
  P.topRightCorner(ny, nz) = -A.transpose();
  P.bottomLeftCorner(nz, ny) = -A;
  P.bottomRightCorner(nz, nz) = Mat::Identity(nz, nz);
  return P;
}

std::optional<QuadraticIncrementalForm> ComposedForm::as_quadratic() const {
  auto P = matrix();
  if (!P) return std::nullopt;
  return QuadraticIncrementalForm(std::move(*P), inner_.kappa(), 1.0);
}

ComposedForm compose_lyapunov(const QuadraticIncrementalForm& v_hat, const StabilizingFunction& psi) {
  return ComposedForm(v_hat, psi);
}

double required_gain(double kappa, double kappa_hat) {
  if (!(kappa > 0.0)) throw ContractViolation("required_gain: kappa must be positive");
  if (!(kappa_hat >= 0.0)) throw ContractViolation("required_gain: kappa_hat must be nonnegative");
  return (kappa + kappa_hat + 1.0) / 2.0;
}

double condition_iii_residual(const VectorField& field, const IncrementalFunction& v, double kappa,
                              const InputGain& sigma, const Vec& x, const Vec& xp, const Vec& u, const Vec& up) {
  Vec gx, gxp;
  v.gradient(x, xp, gx, gxp);
  const double lhs = gx.dot(field(x, u)) + gxp.dot(field(xp, up));
  return lhs - (-kappa * v.value(x, xp) + sigma((u - up).norm()));
}

VerificationReport verify_condition_iii(const VectorField& field, const IncrementalFunction& v, double kappa,
                                        const InputGain& sigma, const Box& state_box, const Box& input_box,
                                        const DecayCheckOptions& options) {
  state_box.validate();
  input_box.validate();
  const auto n = static_cast<Eigen::Index>(field.state_dim());
  const auto m = static_cast<Eigen::Index>(field.input_dim());
  if (state_box.dim() != n || input_box.dim() != m || v.dim() != field.state_dim())
    throw DimensionError("verify_condition_iii: box, form and field dimensions disagree");

  const Box full = Box::product(Box::product(state_box, state_box), Box::product(input_box, input_box));
  const Mat unit = unit_samples(static_cast<std::size_t>(full.dim()), options.n_samples, options.scheme, options.seed);

  const unsigned threads = options.threads == 0 ? default_threads() : options.threads;
  std::vector<VerificationReport> partial(threads);
  const std::size_t chunk = (options.n_samples + threads - 1) / std::max(1u, threads);
  parallel_for(threads, threads, [&](std::size_t wb, std::size_t we) {
    for (std::size_t w = wb; w < we; ++w) {
      VerificationReport& r = partial[w];
      const std::size_t begin = std::min(options.n_samples, w * chunk);
      const std::size_t end = std::min(options.n_samples, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) {
        const Vec s = full.from_unit(unit.row(static_cast<Eigen::Index>(i)).transpose());
        const Vec x = s.segment(0, n), xp = s.segment(n, n);
        const Vec u = s.segment(2 * n, m), up = s.segment(2 * n + m, m);
        if (v.value(x, xp) < v.singular_below()) {
          ++r.skipped;
          continue;
        }
        ++r.n_samples;
        r.absorb(condition_iii_residual(field, v, kappa, sigma, x, xp, u, up), i, concat({&x, &xp, &u, &up}));
      }
    }
  });

  VerificationReport report;
  report.label = "condition-iii";
  for (const auto& p : partial) report.merge(p);
  report.pass = report.max_violation <= options.tol;
  report.values["kappa"] = kappa;
  report.values["sigma_coefficient"] = sigma.coefficient;
  return report;
}

VerificationReport verify_condition_iii(const VectorField& field, const QuadraticIncrementalForm& v,
                                        const Box& state_box, const Box& input_box,
                                        const DecayCheckOptions& options) {
  return verify_condition_iii(field, v, v.kappa(), InputGain::quadratic(v.kappa_hat()), state_box, input_box,
                              options);
}

namespace {

/// Extreme generalized eigenvalues of (P, G): bounds of V / d_G^2.
std::pair<double, double> sandwich_constants(const Mat& P, const std::optional<Mat>& metric) {
  if (!metric) {
    const Vec ev = eigen_symmetric(P);
    return {ev(0), ev(ev.size() - 1)};
  }
  if (metric->rows() != P.rows()) throw DimensionError("verify_condition_i: metric dimension mismatch");
  const Mat root = sqrt_psd(*metric);
  const Mat inv_root = root.inverse();
  Mat m = inv_root * P * inv_root;
  m = 0.5 * (m + m.transpose());
  const Vec ev = eigen_symmetric(m);
  return {ev(0), ev(ev.size() - 1)};
}

VerificationReport sandwich_check(const std::function<double(const Vec&, const Vec&)>& value, double lo_coef,
                                  double hi_coef, bool square_root, const std::optional<Mat>& metric,
                                  const Box& box, std::size_t n_pairs, double tol, std::uint64_t seed) {
  box.validate();
  const auto n = box.dim();
  const Box pair_box = Box::product(box, box);
  const Mat unit = unit_samples(static_cast<std::size_t>(2 * n), n_pairs, SamplingScheme::kUniform, seed);
  ExponentialBound dist;
  dist.metric = metric;
  VerificationReport r;
  r.label = "condition-i";
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Vec s = pair_box.from_unit(unit.row(static_cast<Eigen::Index>(i)).transpose());
    const Vec x = s.head(n), xp = s.tail(n);
    const double d = dist.distance(x, xp);
    const double scale = square_root ? d : d * d;
    const double v = value(x, xp);
    const double lower = lo_coef * scale, upper = hi_coef * scale;
    const double viol = std::max(lower - v, v - upper) / std::max(1.0, upper);
    ++r.n_samples;
    r.absorb(viol, i, concat({&x, &xp}));
  }
  r.pass = r.max_violation <= tol;
  r.values["lower_coefficient"] = lo_coef;
  r.values["upper_coefficient"] = hi_coef;
  return r;
}

}  // namespace

VerificationReport verify_condition_i(const QuadraticIncrementalForm& v, const std::optional<Mat>& metric,
                                      const Box& state_box, std::size_t n_pairs, double tol, std::uint64_t seed) {
  const auto [lo, hi] = sandwich_constants(v.P(), metric);
  return sandwich_check([&](const Vec& a, const Vec& b) { return v.value(a, b); }, lo, hi, false, metric, state_box,
                        n_pairs, tol, seed);
}

VerificationReport verify_condition_i(const SqrtForm& v, const std::optional<Mat>& metric, const Box& state_box,
                                      std::size_t n_pairs, double tol, std::uint64_t seed) {
  const auto [lo, hi] = sandwich_constants(v.base().P(), metric);
  return sandwich_check([&](const Vec& a, const Vec& b) { return v.value(a, b); }, std::sqrt(lo), std::sqrt(hi),
                        true, metric, state_box, n_pairs, tol, seed);
}

VerificationReport verify_sqrt_decay(const VectorField& field, const SqrtForm& v, const Box& state_box,
                                     const Box& input_box, const DecayCheckOptions& options) {
  state_box.validate();
  input_box.validate();
  const auto n = state_box.dim();
  const auto m = input_box.dim();
  const Box full = Box::product(Box::product(state_box, state_box), input_box);
  const Mat unit = unit_samples(static_cast<std::size_t>(full.dim()), options.n_samples, options.scheme, options.seed);
  VerificationReport r;
  r.label = "sqrt-decay";
  const double rate = 0.5 * v.base().kappa();
  for (std::size_t i = 0; i < options.n_samples; ++i) {
    const Vec s = full.from_unit(unit.row(static_cast<Eigen::Index>(i)).transpose());
    const Vec x = s.head(n), xp = s.segment(n, n), u = s.tail(m);
    if (v.base().value(x, xp) < v.singular_below()) {
      ++r.skipped;
      continue;
    }
    ++r.n_samples;
    const double res = condition_iii_residual(field, v, rate, InputGain::linear(0.0), x, xp, u, u);
    // Relative to V^ so the 1e-9 tolerance is meaningful near the diagonal.
    r.absorb(res / std::max(1.0, v.value(x, xp)), i, concat({&x, &xp, &u}));
  }
  r.pass = r.max_violation <= options.tol;
  r.values["rate"] = rate;
  return r;
}

}  // namespace incstab
