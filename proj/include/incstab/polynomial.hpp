#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "incstab/linalg.hpp"

namespace incstab {

/// Sparse multivariate polynomial with real coefficients over a fixed number
/// of variables. Exact partial derivatives make it the carrier for the
/// recursive backstepping construction.
class Polynomial {
 public:
  using Exponents = std::vector<std::uint32_t>;

  explicit Polynomial(std::size_t n_vars = 0) : n_vars_(n_vars) {}

  static Polynomial constant(std::size_t n_vars, double c);
  static Polynomial variable(std::size_t n_vars, std::size_t index);

  std::size_t n_vars() const { return n_vars_; }
  const std::map<Exponents, double>& terms() const { return terms_; }

  /// Adds `coef * prod x_i^{e_i}`; zero coefficients are dropped.
  void add_term(const Exponents& exponents, double coef);

  double eval(std::span<const double> x) const;
  Polynomial derivative(std::size_t var) const;
  std::size_t degree() const;
  bool is_zero() const { return terms_.empty(); }

  /// Re-embeds into `n_vars` variables; variable i maps to `target[i]`.
  Polynomial embed(std::size_t n_vars, std::span<const std::size_t> target) const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return *this * -1.0; }

  std::string to_string() const;

 private:
  std::size_t n_vars_;
  std::map<Exponents, double> terms_;
};

/// Vector-valued polynomial map R^n -> R^m with an exact Jacobian.
class PolynomialMap {
 public:
  PolynomialMap() = default;
  PolynomialMap(std::size_t n_vars, std::vector<Polynomial> components);

  std::size_t n_vars() const { return n_vars_; }
  std::size_t n_out() const { return components_.size(); }
  const std::vector<Polynomial>& components() const { return components_; }
  const Polynomial& operator[](std::size_t i) const { return components_[i]; }

  void eval(std::span<const double> x, std::span<double> out) const;
  Vec eval(const Vec& x) const;
  Mat jacobian(const Vec& x) const;
  /// Symbolic Jacobian, row i column j = d(component i)/d(x_j).
  const std::vector<std::vector<Polynomial>>& jacobian_symbolic() const { return jac_; }

 private:
  std::size_t n_vars_ = 0;
  std::vector<Polynomial> components_;
  std::vector<std::vector<Polynomial>> jac_;
};

}  // namespace incstab
