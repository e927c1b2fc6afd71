#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "mimlnd/dataset.hpp"
#include "mimlnd/detector.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/kernel.hpp"
#include "mimlnd/parallel.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

struct OcsvmModel {
  KernelConfig kernel;
  double nu = 0.5;
  InstanceTable training;
  Vector weights;  // dual variables, in [0, 1/(nu L)], summing to 1
  double rho = 0.0;
  double dual_objective = 0.0;
  long iterations = 0;
};

struct OcsvmSolverConfig {
  double tol = 1e-5;  // maximal KKT violation
  long max_iters = 0;  // 0 selects max(10^7, 100 L)
};

// Dual of the one-class SVM: minimize 1/2 a^T K a subject to
// 0 <= a_i <= 1/(nu L) and sum a = 1. SMO over maximal-violating pairs with
// second-order working-set selection.
inline OcsvmModel ocsvm_train(const InstanceTable& normal, const Matrix& kernel_matrix,
                              double nu, const KernelConfig& kernel,
                              const OcsvmSolverConfig& solver = {}) {
  if (!(nu > 0 && nu <= 1)) throw ParameterError("ocsvm: nu must lie in (0, 1]");
  const Index n = normal.rows();
  if (n < 2) throw ParameterError("ocsvm: need at least two training instances");
  if (kernel_matrix.rows() != n || kernel_matrix.cols() != n)
    throw ParameterError("ocsvm: kernel matrix shape mismatch");
  const Matrix& K = kernel_matrix;
  const double upper = 1.0 / (nu * static_cast<double>(n));

  // Uniform start: feasible for every nu and symmetric in the instances.
  Vector a = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Vector grad = K * a;

  const long max_iters = solver.max_iters > 0 ? solver.max_iters
                                              : std::max<long>(10'000'000L, 100L * n);
  const double tau = 1e-12;
  long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    // i: most negative gradient among variables that can increase.
    Index i = -1;
    double g_up = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t)
      if (a[t] < upper && grad[t] < g_up) { g_up = grad[t]; i = t; }
    // j: second-order choice among variables that can decrease.
    Index j = -1;
    double g_low = -std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (!(a[t] > 0)) continue;
      g_low = std::max(g_low, grad[t]);
      const double b = grad[t] - g_up;
      if (i >= 0 && b > 0) {
        double curv = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (curv <= 0) curv = tau;
        const double gain = -(b * b) / curv;
        if (gain < best_gain) { best_gain = gain; j = t; }
      }
    }
    gap = g_low - g_up;
    if (i < 0 || j < 0 || gap <= solver.tol) break;
    if (iter >= max_iters) {
      std::ostringstream msg;
      msg << "ocsvm: no convergence after " << iter << " iterations (KKT residual " << gap << ")";
      throw ConvergenceError(msg.str());
    }
    double curv = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (curv <= 0) curv = tau;
    double delta = (grad[j] - grad[i]) / curv;
    delta = std::min({delta, upper - a[i], a[j]});
    if (delta == upper - a[i]) {
      a[j] -= delta;
      a[i] = upper;
    } else if (delta == a[j]) {
      a[i] += delta;
      a[j] = 0.0;
    } else {
      a[i] += delta;
      a[j] -= delta;
    }
    grad.noalias() += delta * (K.col(i) - K.col(j));
  }

  a = a.cwiseMax(0.0).cwiseMin(upper);

  // rho: mean gradient over free variables, else midpoint of the KKT bracket.
  double free_sum = 0.0;
  long free_count = 0;
  double at_upper_max = -std::numeric_limits<double>::infinity();
  double at_zero_min = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < n; ++t) {
    if (a[t] > 0 && a[t] < upper) {
      free_sum += grad[t];
      ++free_count;
    } else if (a[t] >= upper) {
      at_upper_max = std::max(at_upper_max, grad[t]);
    } else {
      at_zero_min = std::min(at_zero_min, grad[t]);
    }
  }
  OcsvmModel model;
  if (free_count > 0) model.rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(at_upper_max) && std::isfinite(at_zero_min))
    model.rho = 0.5 * (at_upper_max + at_zero_min);
  else model.rho = std::isfinite(at_upper_max) ? at_upper_max : at_zero_min;

  model.kernel = kernel;
  model.nu = nu;
  model.training = normal;
  model.weights = std::move(a);
  model.dual_objective = 0.5 * model.weights.dot(K * model.weights);
  model.iterations = iter;
  return model;
}

inline OcsvmModel ocsvm_train(const InstanceTable& normal, double nu, const KernelConfig& kernel,
                              const OcsvmSolverConfig& solver = {}) {
  if (!(nu > 0 && nu <= 1)) throw ParameterError("ocsvm: nu must lie in (0, 1]");
  if (normal.rows() < 2) throw ParameterError("ocsvm: need at least two training instances");
  return ocsvm_train(normal, gram(normal, kernel).entries, nu, kernel, solver);
}

// sum_i w_i k(x, x_i) - rho; non-negative means normal.
inline double ocsvm_decision(const OcsvmModel& model, const VectorRef& x) {
  return model.weights.dot(kernel_vector(x, model.training, model.kernel)) - model.rho;
}

inline Vector ocsvm_decisions(const OcsvmModel& model, const InstanceTable& rows) {
  return cross_kernel(rows, model.training, model.kernel) * model.weights -
         Vector::Constant(rows.rows(), model.rho);
}

// nu = 0.02, 0.04, ..., 1.00.
struct NuSweep {
  std::vector<double> values;

  static NuSweep standard() {
    NuSweep s;
    for (int k = 1; k <= 50; ++k) s.values.push_back(k / 50.0);
    return s;
  }
};

struct OcsvmRocResult {
  RocCurve curve;
  double gamma = 0.0;
  std::vector<double> auc_by_gamma;
};

// One operating point per nu (novel = decision < 0), endpoints (0,0) and
// (1,1) appended, trapezoid AUC over the fpr-sorted points.
inline RocCurve ocsvm_sweep_roc(const InstanceTable& normal, const Matrix& kernel_matrix,
                                const Matrix& eval_kernel, const std::vector<bool>& novel,
                                const NuSweep& sweep, const KernelConfig& kernel) {
  std::size_t n_novel = 0;
  for (bool b : novel) n_novel += b ? 1 : 0;
  const std::size_t n_known = novel.size() - n_novel;
  if (n_novel == 0 || n_known == 0)
    throw EvaluationError("ocsvm roc: evaluation set needs both novel and known instances");
  RocCurve curve;
  curve.points.push_back({0.0, 0.0, 0.0});
  for (double nu : sweep.values) {
    const OcsvmModel m = ocsvm_train(normal, kernel_matrix, nu, kernel);
    const Vector dec = eval_kernel * m.weights - Vector::Constant(eval_kernel.rows(), m.rho);
    std::size_t fp = 0, tp = 0;
    for (std::size_t i = 0; i < novel.size(); ++i)
      if (dec[static_cast<Index>(i)] < 0) (novel[i] ? tp : fp)++;
    curve.points.push_back({nu, static_cast<double>(fp) / static_cast<double>(n_known),
                            static_cast<double>(tp) / static_cast<double>(n_novel)});
  }
  curve.points.push_back({1.0, 1.0, 1.0});
  std::stable_sort(curve.points.begin(), curve.points.end(), [](const RocPoint& p, const RocPoint& q) {
    return p.fpr < q.fpr || (p.fpr == q.fpr && p.tpr < q.tpr);
  });
  curve.auc = trapezoid_auc(curve.points);
  curve.rank_auc = std::numeric_limits<double>::quiet_NaN();
  return curve;
}

// Trains the nu sweep for every gamma and keeps the gamma with the best AUC
// on the evaluation set itself (post-hoc selection, an advantage the primary
// method does not get).
inline OcsvmRocResult ocsvm_roc(const InstanceTable& normal, const LabeledDataset& eval,
                                const std::vector<Label>& known_labels, const NuSweep& sweep,
                                const std::vector<double>& gamma_grid, unsigned threads = 1) {
  if (gamma_grid.empty()) throw ParameterError("ocsvm roc: empty gamma grid");
  const std::vector<bool> novel = novelty_truth(eval, known_labels);
  const InstanceTable eval_rows = eval.flatten();
  std::vector<RocCurve> curves(gamma_grid.size());
  parallel_for(gamma_grid.size(), threads, [&](std::size_t g) {
    const KernelConfig k{gamma_grid[g]};
    curves[g] = ocsvm_sweep_roc(normal, gram(normal, k).entries, cross_kernel(eval_rows, normal, k),
                                novel, sweep, k);
  });
  OcsvmRocResult out;
  std::size_t best = 0;
  for (std::size_t g = 0; g < curves.size(); ++g) {
    out.auc_by_gamma.push_back(curves[g].auc);
    if (curves[g].auc > curves[best].auc) best = g;
  }
  out.curve = std::move(curves[best]);
  out.gamma = gamma_grid[best];
  return out;
}

}  // namespace mimlnd
