#include "incstab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "incstab/errors.hpp"

namespace incstab {

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

namespace {

double off_diagonal_norm(const Mat& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen eigen_symmetric_decompose(const Mat& m, double off_tol) {
  if (!is_symmetric(m)) throw ContractViolation("eigen_symmetric: matrix is not symmetric");
  const Eigen::Index n = m.rows();
  Mat a = 0.5 * (m + m.transpose());
  Mat v = Mat::Identity(n, n);

  // Relative stopping keeps large-entry matrices from iterating on rounding noise.
  const double scale = std::max(1.0, a.norm());
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(a) > off_tol * scale; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

Vec eigen_symmetric(const Mat& m) { return eigen_symmetric_decompose(m).values; }

double lambda_min(const Mat& m) { return eigen_symmetric(m)(0); }

double lambda_max(const Mat& m) {
  const Vec ev = eigen_symmetric(m);
  return ev(ev.size() - 1);
}

Mat sqrt_psd(const Mat& m) {
  const SymmetricEigen e = eigen_symmetric_decompose(m);
  if (e.values(0) < -1e-12) throw ContractViolation("sqrt_psd: matrix is not positive semidefinite");
  const Vec root = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * root.asDiagonal() * e.vectors.transpose();
}

double sigma_max(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return std::sqrt(std::max(0.0, lambda_max(a.transpose() * a)));
}

}  // namespace incstab
