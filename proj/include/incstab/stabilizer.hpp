#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "incstab/linalg.hpp"
#include "incstab/polynomial.hpp"

namespace incstab {

/// Virtual control psi: R^{n_eta} -> R^{n_zeta} together with its Jacobian.
class StabilizingFunction {
 public:
  using EvalFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Mat(const Vec&)>;

  StabilizingFunction() = default;
  StabilizingFunction(std::size_t in_dim, std::size_t out_dim, EvalFn eval, JacobianFn jac, std::string name = {});

  /// psi(y) = A y + b.
  static StabilizingFunction affine(Mat A, Vec b, std::string name = {});
  static StabilizingFunction zero(std::size_t in_dim, std::size_t out_dim);
  /// Polynomial psi with exact Jacobian; the symbolic form is kept for
  /// recursive synthesis.
  static StabilizingFunction polynomial(PolynomialMap map, std::string name = {});

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const std::string& name() const { return name_; }

  Vec operator()(const Vec& y) const { return eval_(y); }
  Mat jacobian(const Vec& y) const { return jac_(y); }
  Mat fd_jacobian(const Vec& y, double h = 1e-6) const;

  bool is_affine() const { return affine_.has_value(); }
  /// (A, b) when affine.
  const std::optional<std::pair<Mat, Vec>>& affine_data() const { return affine_; }
  const PolynomialMap* polynomial_form() const { return poly_.get(); }

 private:
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  EvalFn eval_;
  JacobianFn jac_;
  std::optional<std::pair<Mat, Vec>> affine_;
  std::shared_ptr<const PolynomialMap> poly_;
  std::string name_;
};

}  // namespace incstab
