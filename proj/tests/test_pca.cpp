#include <gtest/gtest.h>

#include "mimlnd/pca.hpp"
#include "test_util.hpp"

using namespace mimlnd;

TEST(Jacobi, TwoByTwo) {
  Matrix a{{2.0, 1.0}, {1.0, 2.0}};
  const auto e = jacobi_eigen(a);
  EXPECT_NEAR(e.values[0], 3.0, 1e-14);
  EXPECT_NEAR(e.values[1], 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors(0, 0)), std::sqrt(0.5), 1e-14);
}

TEST(Jacobi, AgreesWithDenseSolver) {
  Rng rng = make_rng(3);
  const Matrix b = tutil::random_table(12, 12, rng);
  const Matrix a = b + b.transpose();
  const auto mine = jacobi_eigen(a);
  Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
  for (Index i = 0; i < 12; ++i) EXPECT_NEAR(mine.values[i], ref.eigenvalues()[11 - i], 1e-10);
  const Matrix recon = mine.vectors * mine.values.asDiagonal() * mine.vectors.transpose();
  EXPECT_LT((recon - a).norm(), 1e-10);
}

TEST(Pca, ExactSubspaceReconstruction) {
  Rng rng = make_rng(9);
  const RowMatrix basis = Matrix(tutil::random_table(2, 5, rng)).transpose().householderQr()
                              .householderQ() * Matrix::Identity(5, 2);
  const RowMatrix coeffs = tutil::random_table(40, 2, rng, 3.0);
  const Eigen::RowVectorXd offset = tutil::random_table(1, 5, rng);
  RowMatrix data = coeffs * basis.transpose();
  data.rowwise() += offset;
  const auto p = pca_fit(data, 2);
  const RowMatrix z = pca_transform_rows(p, data);
  RowMatrix back = z * p.components;
  back.rowwise() += p.mean.transpose();
  EXPECT_LT((back - data).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, FullRankKeepsTotalVariance) {
  Rng rng = make_rng(10);
  const RowMatrix data = tutil::random_table(30, 4, rng);
  const auto p = pca_fit(data, 4);
  EXPECT_NEAR(p.explained_variance.sum(), p.total_variance, 1e-10);
}

TEST(Pca, ExplainedVarianceMatchesDenseEigensolver) {
  Rng rng = make_rng(12);
  const RowMatrix data = tutil::random_table(50, 5, rng);
  const auto p = pca_fit(data, 2);

  // Independent route: covariance by explicit sums, Eigen's dense solver.
  const Eigen::RowVectorXd mean = data.colwise().mean();
  Matrix cov = Matrix::Zero(5, 5);
  for (Index i = 0; i < 50; ++i)
    for (Index a = 0; a < 5; ++a)
      for (Index b = 0; b < 5; ++b) cov(a, b) += (data(i, a) - mean[a]) * (data(i, b) - mean[b]) / 49.0;
  Eigen::SelfAdjointEigenSolver<Matrix> ref(cov);
  EXPECT_NEAR(p.explained_variance[0], ref.eigenvalues()[4], 1e-6);
  EXPECT_NEAR(p.explained_variance[1], ref.eigenvalues()[3], 1e-6);
}

TEST(Pca, ComponentsOrthonormalAndSorted) {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const RowMatrix data = tutil::random_table(25, 8, rng) * tutil::random_table(8, 8, rng);
    const auto p = pca_fit(data, 5);
    const Matrix gram = p.components * p.components.transpose();
    EXPECT_LT((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
    for (Index i = 0; i + 1 < 5; ++i) EXPECT_GE(p.explained_variance[i], p.explained_variance[i + 1]);
  }
}

TEST(Pca, TransformContract) {
  Rng rng = make_rng(14);
  const RowMatrix data = tutil::random_table(20, 4, rng);
  const auto p = pca_fit(data, 3);
  EXPECT_LT(pca_transform(p, p.mean).norm(), 1e-14);
  const Vector e1 = pca_transform(p, p.mean + p.components.row(0).transpose());
  EXPECT_NEAR(e1[0], 1.0, 1e-12);
  EXPECT_NEAR(e1[1], 0.0, 1e-12);
  EXPECT_NEAR(e1[2], 0.0, 1e-12);

  const Vector x = tutil::random_table(4, 1, rng);
  const Vector got = pca_transform(p, x);
  for (Index r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (Index c = 0; c < 4; ++c) acc += p.components(r, c) * (x[c] - p.mean[c]);
    EXPECT_NEAR(got[r], acc, 1e-12);
  }
}

TEST(Pca, ParameterErrors) {
  Rng rng = make_rng(15);
  const RowMatrix data = tutil::random_table(10, 3, rng);
  EXPECT_THROW(pca_fit(data, 4), ParameterError);
  EXPECT_THROW(pca_fit(data, 0), ParameterError);
  EXPECT_THROW(pca_fit(data.topRows(1), 1), ParameterError);
  const auto p = pca_fit(data, 2);
  EXPECT_THROW(pca_transform(p, Vector::Zero(2)), ParameterError);
}
