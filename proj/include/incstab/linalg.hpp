#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace incstab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tolerance on |M - M^T| used by every symmetry precondition.
inline constexpr double kSymmetryTol = 1e-12;

bool is_symmetric(const Mat& m, double tol = kSymmetryTol);

struct SymmetricEigen {
  Vec values;   // ascending
  Mat vectors;  // columns are the matching unit eigenvectors
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `off_tol`. Throws ContractViolation on non-symmetric input.
SymmetricEigen eigen_symmetric_decompose(const Mat& m, double off_tol = 1e-12);

/// Eigenvalues only, ascending.
Vec eigen_symmetric(const Mat& m);

double lambda_min(const Mat& m);
double lambda_max(const Mat& m);

/// Symmetric square root through the Jacobi decomposition. Requires m >= 0.
Mat sqrt_psd(const Mat& m);

/// Largest singular value, computed as sqrt(lambda_max(A^T A)).
double sigma_max(const Mat& a);

inline Vec to_vec(std::span<const double> s) {
  return Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size()));
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace incstab
