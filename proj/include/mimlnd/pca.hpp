#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mimlnd/error.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

struct SymmetricEigen {
  Vector values;   // non-increasing
  Matrix vectors;  // column i pairs with values[i]
  int sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric matrix. Only the upper triangle is
// read. Eigenvectors are sign-normalized so their largest-magnitude entry is
// positive.
inline SymmetricEigen jacobi_eigen(const Matrix& input, int max_sweeps = 100) {
  if (input.rows() != input.cols())
    throw ParameterError("jacobi_eigen: matrix must be square");
  const Index n = input.rows();
  Matrix a = input.selfadjointView<Eigen::Upper>();
  Matrix v = Matrix::Identity(n, n);

  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index q = 1; q < n; ++q)
      for (Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;

    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J, touching rows/columns p and q only.
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == max_sweeps)
    throw ConvergenceError("jacobi_eigen: no convergence within sweep limit");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.sweeps = sweep;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    out.values[i] = a(src, src);
    Vector col = v.col(src);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0) col = -col;
    out.vectors.col(i) = col;
  }
  return out;
}

struct PcaProjection {
  Vector mean;                // length d
  RowMatrix components;       // k x d, orthonormal rows
  Vector explained_variance;  // length k, non-increasing
  double total_variance = 0.0;

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return components.rows(); }
};

// Top-k principal axes of the sample covariance (n - 1 denominator).
inline PcaProjection pca_fit(const RowMatrix& data, Index k) {
  const Index n = data.rows(), d = data.cols();
  if (n < 2) throw ParameterError("pca_fit: need at least two rows");
  if (k < 1 || k > d) throw ParameterError("pca_fit: k must lie in [1, d]");
  if (!data.allFinite()) throw ParameterError("pca_fit: data must be finite");

  PcaProjection proj;
  proj.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - proj.mean.transpose();
  Matrix cov = Matrix::Zero(d, d);
  cov.selfadjointView<Eigen::Upper>().rankUpdate(centered.transpose());
  cov /= static_cast<double>(n - 1);

  const SymmetricEigen eig = jacobi_eigen(cov);
  proj.components = eig.vectors.leftCols(k).transpose();
  proj.explained_variance = eig.values.head(k).cwiseMax(0.0);
  proj.total_variance = cov.diagonal().sum();
  return proj;
}

inline Vector pca_transform(const PcaProjection& proj, const VectorRef& x) {
  if (x.size() != proj.input_dim())
    throw ParameterError("pca_transform: dimension mismatch");
  return proj.components * (x - proj.mean);
}

inline RowMatrix pca_transform_rows(const PcaProjection& proj, const RowMatrix& rows) {
  if (rows.cols() != proj.input_dim())
    throw ParameterError("pca_transform: dimension mismatch");
  return (rows.rowwise() - proj.mean.transpose()) * proj.components.transpose();
}

}  // namespace mimlnd
