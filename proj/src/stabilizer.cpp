#include "incstab/stabilizer.hpp"

#include <algorithm>
#include <cmath>

#include "incstab/errors.hpp"

namespace incstab {

StabilizingFunction::StabilizingFunction(std::size_t in_dim, std::size_t out_dim, EvalFn eval, JacobianFn jac,
                                         std::string name)
    : in_dim_(in_dim), out_dim_(out_dim), eval_(std::move(eval)), jac_(std::move(jac)), name_(std::move(name)) {
  if (!eval_ || !jac_) throw ContractViolation("StabilizingFunction: evaluation and Jacobian are required");
}

StabilizingFunction StabilizingFunction::affine(Mat A, Vec b, std::string name) {
  if (A.rows() != b.size()) throw DimensionError("StabilizingFunction::affine: A and b disagree");
  const auto in = static_cast<std::size_t>(A.cols());
  const auto out = static_cast<std::size_t>(A.rows());
  StabilizingFunction psi(
      in, out,
      [A, b](const Vec& y) -> Vec {
        if (y.size() != A.cols()) throw DimensionError("psi: argument dimension mismatch");
        return A * y + b;
      },
      [A](const Vec&) -> Mat { return A; }, std::move(name));
  psi.affine_ = std::make_pair(std::move(A), std::move(b));
  // The polynomial form lets affine psi take part in recursive synthesis.
  std::vector<Polynomial> comps;
  const auto& [pa, pb] = *psi.affine_;
  for (Eigen::Index r = 0; r < pa.rows(); ++r) {
    Polynomial p = Polynomial::constant(in, pb(r));
    for (Eigen::Index c = 0; c < pa.cols(); ++c)
      p = p + Polynomial::variable(in, static_cast<std::size_t>(c)) * pa(r, c);
    comps.push_back(std::move(p));
  }
  psi.poly_ = std::make_shared<const PolynomialMap>(in, std::move(comps));
  return psi;
}

StabilizingFunction StabilizingFunction::zero(std::size_t in_dim, std::size_t out_dim) {
  return affine(Mat::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim)),
                Vec::Zero(static_cast<Eigen::Index>(out_dim)), "zero");
}

StabilizingFunction StabilizingFunction::polynomial(PolynomialMap map, std::string name) {
  auto poly = std::make_shared<const PolynomialMap>(std::move(map));
  StabilizingFunction psi(
      poly->n_vars(), poly->n_out(), [poly](const Vec& y) { return poly->eval(y); },
      [poly](const Vec& y) { return poly->jacobian(y); }, std::move(name));
  psi.poly_ = std::move(poly);
  return psi;
}

Mat StabilizingFunction::fd_jacobian(const Vec& y, double h) const {
  Mat j(static_cast<Eigen::Index>(out_dim_), static_cast<Eigen::Index>(in_dim_));
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double hk = h * std::max(1.0, std::abs(y(k)));
    Vec yp = y, ym = y;
    yp(k) += hk;
    ym(k) -= hk;
    j.col(k) = (eval_(yp) - eval_(ym)) / (2.0 * hk);
  }
  return j;
}

}  // namespace incstab
