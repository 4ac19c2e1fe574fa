#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "incstab/errors.hpp"
#include "incstab/linalg.hpp"

using namespace incstab;

namespace {

Mat random_symmetric(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> d;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = d(rng);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST(Linalg, JacobiMatchesEigenSolver) {
  std::mt19937_64 rng(7);
  for (int n : {1, 2, 3, 5, 8}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Mat m = random_symmetric(rng, n);
      const Vec ours = eigen_symmetric(m);
      Eigen::SelfAdjointEigenSolver<Mat> ref(m);
      EXPECT_LT((ours - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, m.norm()));
    }
  }
}

TEST(Linalg, DecompositionReconstructs) {
  std::mt19937_64 rng(3);
  const Mat m = random_symmetric(rng, 4);
  const SymmetricEigen e = eigen_symmetric_decompose(m);
  const Mat back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT((back - m).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index i = 1; i < e.values.size(); ++i) EXPECT_LE(e.values(i - 1), e.values(i));
}

TEST(Linalg, KnownSpectrum) {
  Mat p(2, 2);
  p << 2, 1, 1, 1;
  EXPECT_NEAR(lambda_min(p), (3.0 - std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_NEAR(lambda_max(p), (3.0 + std::sqrt(5.0)) / 2.0, 1e-15);
}

TEST(Linalg, NonSymmetricRejected) {
  Mat m(2, 2);
  m << 1, 2, 0, 1;
  EXPECT_THROW(eigen_symmetric(m), ContractViolation);
}

TEST(Linalg, SqrtPsdSquaresBack) {
  Mat p(2, 2);
  p << 2, 1, 1, 1;
  const Mat r = sqrt_psd(p);
  EXPECT_LT((r * r - p).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Linalg, SigmaMax) {
  Mat a(2, 1);
  a << 3, 4;
  EXPECT_NEAR(sigma_max(a), 5.0, 1e-14);
}
