#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mimlnd/error.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

// Gaussian kernel k(x, y) = exp(-gamma * ||x - y||^2).
struct KernelConfig {
  double gamma = 1.0;

  // gamma == 0 is accepted here (degenerate all-ones kernel); training
  // rejects it separately.
  void validate() const {
    if (!(gamma >= 0) || !std::isfinite(gamma))
      throw ParameterError("kernel: gamma must be finite and >= 0");
  }
};

inline double squared_distance(const VectorRef& x, const VectorRef& y) {
  if (x.size() != y.size())
    throw ParameterError("kernel: dimension mismatch");
  return (x - y).squaredNorm();
}

inline double gaussian(const VectorRef& x, const VectorRef& y,
                       const KernelConfig& cfg) {
  return std::exp(-cfg.gamma * squared_distance(x, y));
}

// k(x) = (k(x, x_1), ..., k(x, x_L)).
inline Vector kernel_vector(const VectorRef& x, const InstanceTable& training,
                            const KernelConfig& cfg) {
  if (training.rows() == 0)
    throw ParameterError("kernel_vector: empty training set");
  if (x.size() != training.cols())
    throw ParameterError("kernel_vector: dimension mismatch");
  Vector out(training.rows());
  for (Index l = 0; l < training.rows(); ++l)
    out[l] = std::exp(-cfg.gamma * (training.row(l).transpose() - x).squaredNorm());
  return out;
}

// Kernel rows for every instance in `queries` against `training`:
// result(i, l) = k(query_i, training_l).
inline Matrix cross_kernel(const InstanceTable& queries,
                           const InstanceTable& training,
                           const KernelConfig& cfg) {
  if (queries.cols() != training.cols())
    throw ParameterError("cross_kernel: dimension mismatch");
  Matrix out(queries.rows(), training.rows());
  for (Index l = 0; l < training.rows(); ++l)
    for (Index i = 0; i < queries.rows(); ++i)
      out(i, l) = std::exp(
          -cfg.gamma * (queries.row(i) - training.row(l)).squaredNorm());
  return out;
}

struct GramMatrix {
  Matrix entries;  // dense, symmetric, unit diagonal

  Index instance_count() const { return entries.rows(); }
};

// Each unordered pair is evaluated once, so the result is exactly symmetric.
inline GramMatrix gram(const InstanceTable& training, const KernelConfig& cfg) {
  const Index n = training.rows();
  if (n < 1) throw ParameterError("gram: need at least one instance");
  GramMatrix g;
  g.entries.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    g.entries(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v =
          std::exp(-cfg.gamma * (training.row(i) - training.row(j)).squaredNorm());
      g.entries(i, j) = v;
      g.entries(j, i) = v;
    }
  }
  return g;
}

// Median of the squared pairwise distances. At most `max_rows` rows (taken at
// a fixed stride) participate, which keeps the cost bounded on large tables.
inline double median_squared_distance(const InstanceTable& rows,
                                      Index max_rows = 1000) {
  const Index n = rows.rows();
  if (n < 2) throw ParameterError("median_squared_distance: need two rows");
  const Index stride = std::max<Index>(1, (n + max_rows - 1) / max_rows);
  std::vector<double> d2;
  for (Index i = 0; i < n; i += stride)
    for (Index j = i + stride; j < n; j += stride)
      d2.push_back((rows.row(i) - rows.row(j)).squaredNorm());
  if (d2.empty()) d2.push_back((rows.row(0) - rows.row(1)).squaredNorm());
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  return *mid;
}

}  // namespace mimlnd
