#pragma once

#include <cmath>
#include <optional>

#include "incstab/dynamics.hpp"
#include "incstab/report.hpp"
#include "incstab/sampling.hpp"
#include "incstab/stabilizer.hpp"

namespace incstab {

/// V(x, x') together with its partial gradients.
class IncrementalFunction {
 public:
  virtual ~IncrementalFunction() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(const Vec& x, const Vec& xp) const = 0;
  /// Writes dV/dx into gx and dV/dx' into gxp.
  virtual void gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const = 0;
  /// Samples with V below this are skipped by the decay verifier.
  virtual double singular_below() const { return -1.0; }
};

/// V(x, x') = (x - x')^T P (x - x') with decay rate kappa and input gain
/// sigma(r) = kappa_hat r^2.
class QuadraticIncrementalForm final : public IncrementalFunction {
 public:
  /// Throws ContractViolation unless P is symmetric and positive definite.
  QuadraticIncrementalForm(Mat P, double kappa, double kappa_hat);

  const Mat& P() const { return P_; }
  double kappa() const { return kappa_; }
  double kappa_hat() const { return kappa_hat_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

  std::size_t dim() const override { return static_cast<std::size_t>(P_.rows()); }
  double value(const Vec& x, const Vec& xp) const override;
  void gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const override;

 private:
  Mat P_;
  double kappa_;
  double kappa_hat_;
  double lambda_min_;
  double lambda_max_;
};

/// sqrt(V) of a quadratic form; gradient undefined on the diagonal x = x'.
class SqrtForm final : public IncrementalFunction {
 public:
  explicit SqrtForm(QuadraticIncrementalForm base);

  const QuadraticIncrementalForm& base() const { return base_; }
  /// sqrt(lambda_min(P)) ||x - x'|| <= V <= sqrt(lambda_max(P)) ||x - x'||.
  double lower_coefficient() const { return std::sqrt(base_.lambda_min()); }
  double upper_coefficient() const { return std::sqrt(base_.lambda_max()); }
  /// |V(x,y) - V(x,z)| <= L ||y - z|| with L = lambda_max / sqrt(lambda_min).
  double lipschitz_constant() const { return base_.lambda_max() / std::sqrt(base_.lambda_min()); }

  std::size_t dim() const override { return base_.dim(); }
  double value(const Vec& x, const Vec& xp) const override;
  void gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const override;
  double singular_below() const override { return 1e-12; }

 private:
  QuadraticIncrementalForm base_;
};

/// V~(x, x') = V^(y, y') + ||(z - psi(y)) - (z' - psi(y'))||^2 on x = (y, z).
class ComposedForm final : public IncrementalFunction {
 public:
  ComposedForm(QuadraticIncrementalForm inner, StabilizingFunction psi);

  std::size_t dim() const override { return inner_.dim() + psi_.out_dim(); }
  double value(const Vec& x, const Vec& xp) const override;
  void gradient(const Vec& x, const Vec& xp, Vec& gx, Vec& gxp) const override;

  bool is_quadratic() const { return psi_.is_affine(); }
  /// Block matrix [[P^ + A^T A, -A^T], [-A, I]] for affine psi = A y + b.
  std::optional<Mat> matrix() const;
  /// The composed certificate: decay kappa of the inner form, sigma(r) = r^2.
  std::optional<QuadraticIncrementalForm> as_quadratic() const;

  const QuadraticIncrementalForm& inner() const { return inner_; }
  const StabilizingFunction& psi() const { return psi_; }

 private:
  QuadraticIncrementalForm inner_;
  StabilizingFunction psi_;
};

ComposedForm compose_lyapunov(const QuadraticIncrementalForm& v_hat, const StabilizingFunction& psi);

/// Smallest backstepping gain (kappa + kappa_hat + 1) / 2 for which the
/// composed function is a certificate.
double required_gain(double kappa, double kappa_hat);

/// sigma(r) = coefficient * r^exponent.
struct InputGain {
  double coefficient = 0.0;
  int exponent = 2;

  double operator()(double r) const { return exponent == 1 ? coefficient * r : coefficient * r * r; }
  static InputGain quadratic(double c) { return {c, 2}; }
  static InputGain linear(double c) { return {c, 1}; }
};

struct DecayCheckOptions {
  std::size_t n_samples = 100000;
  double tol = 1e-9;
  SamplingScheme scheme = SamplingScheme::kSobol;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// dV/dx f(x,u) + dV/dx' f(x',u') - (-kappa V + sigma(||u - u'||)).
double condition_iii_residual(const VectorField& field, const IncrementalFunction& v, double kappa,
                              const InputGain& sigma, const Vec& x, const Vec& xp, const Vec& u, const Vec& up);

/// Samples (x, x', u, u') from state_box^2 x input_box^2; pass iff the worst
/// residual is <= tol.
VerificationReport verify_condition_iii(const VectorField& field, const IncrementalFunction& v, double kappa,
                                        const InputGain& sigma, const Box& state_box, const Box& input_box,
                                        const DecayCheckOptions& options = {});

/// Quadratic certificate shortcut: sigma(r) = kappa_hat r^2 from the form.
VerificationReport verify_condition_iii(const VectorField& field, const QuadraticIncrementalForm& v,
                                        const Box& state_box, const Box& input_box,
                                        const DecayCheckOptions& options = {});

/// Sandwich check alpha_lo(d) <= V <= alpha_hi(d) with eigenvalue-based
/// comparison functions; `metric` weights d when given.
VerificationReport verify_condition_i(const QuadraticIncrementalForm& v, const std::optional<Mat>& metric,
                                      const Box& state_box, std::size_t n_pairs, double tol = 1e-12,
                                      std::uint64_t seed = 0);
VerificationReport verify_condition_i(const SqrtForm& v, const std::optional<Mat>& metric, const Box& state_box,
                                      std::size_t n_pairs, double tol = 1e-12, std::uint64_t seed = 0);

/// Decay of sqrt(V) implied by the quadratic form: with u = u',
/// d/dt sqrt(V) <= -(kappa/2) sqrt(V). Samples with V < 1e-12 are skipped.
VerificationReport verify_sqrt_decay(const VectorField& field, const SqrtForm& v, const Box& state_box,
                                     const Box& input_box, const DecayCheckOptions& options = {});

}  // namespace incstab
