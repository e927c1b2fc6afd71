#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mimlnd/dataset.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/kernel.hpp"
#include "mimlnd/lbfgs.hpp"
#include "mimlnd/random.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

// Per-class kernel expansions f_c(x) = alpha_c^T k(x) over every training
// instance, including instances that no bag label accounts for.
struct ScoreModel {
  KernelConfig kernel;
  double lambda = 0.0;
  InstanceTable training;  // L x d
  Matrix alphas;           // L x |Y|, column c is alpha_c
  std::vector<Label> labels;

  Index class_count() const { return alphas.cols(); }
  Index instance_count() const { return training.rows(); }
  Index dimension() const { return training.cols(); }

  void validate() const {
    if (training.rows() < 1) throw ParameterError("model: no training instances");
    if (alphas.rows() != training.rows())
      throw ParameterError("model: alpha length does not match instance count");
    if (alphas.cols() != static_cast<Index>(labels.size()) || labels.empty())
      throw ParameterError("model: alpha count does not match label count");
    if (!alphas.allFinite()) throw ParameterError("model: non-finite alpha");
  }
};

// Support offsets, bag-relative: supports(i, c) indexes into bag i.
using SupportTable = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

inline void check_class(const ScoreModel& m, Index c) {
  if (c < 0 || c >= m.class_count())
    throw ParameterError("model: class index out of range");
}

inline void check_dim(const ScoreModel& m, Index d) {
  if (d != m.dimension()) throw ParameterError("model: dimension mismatch");
}

}  // namespace detail

inline double score(const ScoreModel& model, const VectorRef& x, Index c) {
  detail::check_class(model, c);
  detail::check_dim(model, x.size());
  return model.alphas.col(c).dot(kernel_vector(x, model.training, model.kernel));
}

// All |Y| scores of x.
inline Vector class_scores(const ScoreModel& model, const VectorRef& x) {
  detail::check_dim(model, x.size());
  return model.alphas.transpose() * kernel_vector(x, model.training, model.kernel);
}

// Scores of many instances at once: result(i, c) = f_c(row i).
inline Matrix class_scores(const ScoreModel& model, const InstanceTable& rows) {
  detail::check_dim(model, rows.cols());
  return cross_kernel(rows, model.training, model.kernel) * model.alphas;
}

struct BagHinge {
  double loss = 0.0;
  Index support = 0;  // argmax_j f_c(x_ij), smallest offset on ties
};

inline BagHinge bag_hinge(const ScoreModel& model, const Bag& bag, Index c) {
  detail::check_class(model, c);
  if (bag.size() < 1) throw ParameterError("bag_hinge: empty bag");
  const Vector f = class_scores(model, bag.instances).col(c);
  BagHinge out;
  for (Index j = 1; j < f.size(); ++j)
    if (f[j] > f[out.support]) out.support = j;
  const double y = bag.has_label(model.labels[static_cast<std::size_t>(c)]) ? 1.0 : -1.0;
  out.loss = std::max(0.0, 1.0 - y * f[out.support]);
  return out;
}

inline SupportTable support_instances(const ScoreModel& model,
                                      const LabeledDataset& data) {
  detail::check_dim(model, data.dimension());
  SupportTable s(static_cast<Index>(data.bag_count()), model.class_count());
  for (std::size_t i = 0; i < data.bag_count(); ++i) {
    const Matrix f = class_scores(model, data.bag(i).instances);
    for (Index c = 0; c < f.cols(); ++c) {
      Index best = 0;
      for (Index j = 1; j < f.rows(); ++j)
        if (f(j, c) > f(best, c)) best = j;
      s(static_cast<Index>(i), c) = best;
    }
  }
  return s;
}

// (lambda/2) sum_c alpha_c^T K alpha_c + 1/(N|Y|) sum_i sum_c F_c(X_i).
inline double objective(const ScoreModel& model, const LabeledDataset& data) {
  model.validate();
  detail::check_dim(model, data.dimension());
  const GramMatrix k = gram(model.training, model.kernel);
  const double reg = (model.alphas.transpose() * k.entries * model.alphas).trace();
  double hinge = 0.0;
  for (const Bag& bag : data.bags())
    for (Index c = 0; c < model.class_count(); ++c) hinge += bag_hinge(model, bag, c).loss;
  const double norm = static_cast<double>(data.bag_count()) *
                      static_cast<double>(model.class_count());
  return 0.5 * model.lambda * reg + hinge / norm;
}

// Gradient of the fixed-support surrogate with respect to alpha_c:
// lambda K alpha_c - 1/(N|Y|) sum_i y_ic k(x_ic) 1{1 - y_ic f_c(x_ic) > 0}.
inline Vector subgradient(const ScoreModel& model, const LabeledDataset& data,
                          Index c, const SupportTable& supports) {
  detail::check_class(model, c);
  detail::check_dim(model, data.dimension());
  if (supports.rows() != static_cast<Index>(data.bag_count()) ||
      supports.cols() != model.class_count())
    throw ParameterError("subgradient: support table shape mismatch");
  const GramMatrix k = gram(model.training, model.kernel);
  Vector grad = model.lambda * (k.entries * model.alphas.col(c));
  const double norm = static_cast<double>(data.bag_count()) *
                      static_cast<double>(model.class_count());
  const Label& label = model.labels[static_cast<std::size_t>(c)];
  for (std::size_t i = 0; i < data.bag_count(); ++i) {
    const Bag& bag = data.bag(i);
    const Index s = supports(static_cast<Index>(i), c);
    if (s < 0 || s >= bag.size())
      throw ParameterError("subgradient: support offset out of bag range");
    const Vector kx = kernel_vector(bag.instances.row(s).transpose(), model.training, model.kernel);
    const double y = bag.has_label(label) ? 1.0 : -1.0;
    if (1.0 - y * model.alphas.col(c).dot(kx) > 0) grad -= (y / norm) * kx;
  }
  return grad;
}

// The training-set view used by the descent loop: Gram matrix, bag layout and
// label signs, shared across every lambda for a given gamma.
class SurrogateProblem {
 public:
  // Global instance index of each (bag, class) support.
  using Supports = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

  SurrogateProblem(const LabeledDataset& data, const KernelConfig& kernel)
      : kernel_(kernel),
        training_(data.flatten()),
        gram_(gram(training_, kernel)),
        offsets_(data.offsets()),
        signs_(data.bag_signs()),
        labels_(data.known_labels()) {}

  Index instance_count() const { return training_.rows(); }
  Index bag_count() const { return signs_.rows(); }
  Index class_count() const { return signs_.cols(); }
  const Matrix& gram_matrix() const { return gram_.entries; }
  const InstanceTable& training() const { return training_; }
  const std::vector<Label>& labels() const { return labels_; }
  const KernelConfig& kernel() const { return kernel_; }
  double normalizer() const {
    return static_cast<double>(bag_count()) * static_cast<double>(class_count());
  }

  // Argmax of f_c over each bag given scores = K A; smallest offset wins ties.
  Supports supports(const Matrix& scores) const {
    Supports s(bag_count(), class_count());
    for (Index i = 0; i < bag_count(); ++i) {
      const Index begin = offsets_[static_cast<std::size_t>(i)];
      const Index end = offsets_[static_cast<std::size_t>(i) + 1];
      for (Index c = 0; c < class_count(); ++c) {
        Index best = begin;
        for (Index l = begin + 1; l < end; ++l)
          if (scores(l, c) > scores(best, c)) best = l;
        s(i, c) = best;
      }
    }
    return s;
  }

  // Surrogate objective with frozen supports. If `grad` is non-null it
  // receives the gradient (same shape as alphas).
  double evaluate(const Matrix& alphas, double lambda, const Supports& supports,
                  Matrix* grad) const {
    const Matrix scores = gram_.entries * alphas;
    return evaluate(alphas, scores, lambda, supports, grad);
  }

  double evaluate(const Matrix& alphas, const Matrix& scores, double lambda,
                  const Supports& supports, Matrix* grad) const {
    const double norm = normalizer();
    double reg = 0.0;
    for (Index c = 0; c < class_count(); ++c) reg += alphas.col(c).dot(scores.col(c));
    double hinge = 0.0;
    if (grad) *grad = lambda * scores;
    for (Index i = 0; i < bag_count(); ++i) {
      for (Index c = 0; c < class_count(); ++c) {
        const Index s = supports(i, c);
        const double y = signs_(i, c);
        const double margin = 1.0 - y * scores(s, c);
        if (margin > 0) {
          hinge += margin;
          if (grad) grad->col(c).noalias() -= (y / norm) * gram_.entries.col(s);
        }
      }
    }
    return 0.5 * lambda * reg + hinge / norm;
  }

  // True objective: supports recomputed at `alphas`.
  double objective(const Matrix& alphas, double lambda) const {
    const Matrix scores = gram_.entries * alphas;
    return evaluate(alphas, scores, lambda, supports(scores), nullptr);
  }

 private:
  KernelConfig kernel_;
  InstanceTable training_;
  GramMatrix gram_;
  std::vector<Index> offsets_;
  Eigen::MatrixXi signs_;
  std::vector<Label> labels_;
};

struct TrainConfig {
  int outer_iters = 30;  // T
  int restarts = 5;
  std::uint64_t seed = 0;
  LbfgsConfig lbfgs;

  void validate() const {
    if (outer_iters < 1) throw ParameterError("train: outer_iters must be >= 1");
    if (restarts < 1) throw ParameterError("train: restarts must be >= 1");
    lbfgs.validate();
  }
};

struct OuterStep {
  double surrogate_start = 0.0;  // equals the true objective at alpha^t
  double surrogate_end = 0.0;
  int lbfgs_iterations = 0;
  LbfgsStatus lbfgs_status = LbfgsStatus::MaxIterations;
  std::vector<double> lbfgs_history;  // surrogate value at each accepted iterate
};

struct TrainResult {
  ScoreModel model;
  double final_objective = 0.0;
  std::vector<double> trace;     // T + 1 true objective values
  std::vector<OuterStep> steps;  // T entries
  int restart = 0;               // index of the adopted restart
  std::vector<std::string> diagnostics;
};

namespace detail {

struct RestartOutcome {
  Matrix alphas;
  std::vector<double> trace;
  std::vector<OuterStep> steps;
};

inline RestartOutcome run_descent(const SurrogateProblem& problem, double lambda,
                                  const TrainConfig& cfg, std::uint64_t stream) {
  const Index L = problem.instance_count();
  const Index C = problem.class_count();
  Rng rng = make_rng(stream);
  std::normal_distribution<double> normal;
  Matrix alphas(L, C);
  for (Index c = 0; c < C; ++c) {
    for (Index l = 0; l < L; ++l) alphas(l, c) = normal(rng);
    alphas.col(c).normalize();
  }

  RestartOutcome out;
  for (int t = 0; t < cfg.outer_iters; ++t) {
    const Matrix scores = problem.gram_matrix() * alphas;
    const SurrogateProblem::Supports supports = problem.supports(scores);
    OuterStep step;
    step.surrogate_start = problem.evaluate(alphas, scores, lambda, supports, nullptr);
    if (!std::isfinite(step.surrogate_start))
      throw ConvergenceError("train: non-finite objective at outer iteration " +
                             std::to_string(t));
    out.trace.push_back(step.surrogate_start);

    // Scores are linear in alpha: trial points along a search line reuse K d.
    Matrix grad(L, C);
    Matrix last_scores = scores;
    Matrix base_scores, dir_scores, trial(L, C);
    Vector base;
    const Vector* direction = nullptr;
    auto oracle = [&](const Vector& x, Vector& g) {
      const Eigen::Map<const Matrix> a(x.data(), L, C);
      last_scores.noalias() = problem.gram_matrix() * a;
      const double v = problem.evaluate(a, last_scores, lambda, supports, &grad);
      g = Eigen::Map<const Vector>(grad.data(), L * C);
      return v;
    };
    LineOracle line;
    line.start = [&](const Vector& x, const Vector& d) {
      base = x;
      direction = &d;
      base_scores = last_scores;
      dir_scores.noalias() = problem.gram_matrix() * Eigen::Map<const Matrix>(d.data(), L, C);
    };
    line.along = [&](double step, Vector& g) {
      trial = Eigen::Map<const Matrix>(base.data(), L, C) +
              step * Eigen::Map<const Matrix>(direction->data(), L, C);
      last_scores = base_scores + step * dir_scores;
      const double v = problem.evaluate(trial, last_scores, lambda, supports, &grad);
      g = Eigen::Map<const Vector>(grad.data(), L * C);
      return v;
    };
    LbfgsResult r = lbfgs_minimize(
        oracle, Eigen::Map<const Vector>(alphas.data(), L * C), cfg.lbfgs, line);
    alphas = Eigen::Map<const Matrix>(r.x.data(), L, C);
    step.surrogate_end = r.value;
    step.lbfgs_iterations = r.iterations;
    step.lbfgs_status = r.status;
    step.lbfgs_history = std::move(r.history);
    out.steps.push_back(step);
  }
  const double final_value = problem.objective(alphas, lambda);
  if (!std::isfinite(final_value))
    throw ConvergenceError("train: non-finite final objective");
  out.trace.push_back(final_value);
  out.alphas = std::move(alphas);
  return out;
}

}  // namespace detail

// Alternating descent: fix supports at the current argmax, minimize the
// convex surrogate jointly over all alpha_c with L-BFGS, repeat T times.
// Each restart draws alpha_c uniformly on the unit sphere from its own
// stream derived from (seed, restart); the restart with the smallest final
// objective is adopted (lowest index on ties).
inline TrainResult train(const SurrogateProblem& problem, double lambda,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw ParameterError("train: lambda must be positive");
  if (!(problem.kernel().gamma > 0))
    throw ParameterError("train: gamma must be positive");

  TrainResult best;
  bool have_best = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    try {
      detail::RestartOutcome o = detail::run_descent(
          problem, lambda, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
      if (!have_best || o.trace.back() < best.final_objective) {
        best.final_objective = o.trace.back();
        best.model.alphas = std::move(o.alphas);
        best.trace = std::move(o.trace);
        best.steps = std::move(o.steps);
        best.restart = r;
        have_best = true;
      }
    } catch (const ConvergenceError& e) {
      best.diagnostics.push_back("restart " + std::to_string(r) + ": " + e.what());
    }
  }
  if (!have_best) {
    std::ostringstream msg;
    msg << "train: all " << cfg.restarts << " restarts failed";
    for (const auto& d : best.diagnostics) msg << "; " << d;
    throw ConvergenceError(msg.str());
  }
  best.model.kernel = problem.kernel();
  best.model.lambda = lambda;
  best.model.training = problem.training();
  best.model.labels = problem.labels();
  return best;
}

inline TrainResult train(const LabeledDataset& data, double lambda,
                         const KernelConfig& kernel, const TrainConfig& cfg) {
  kernel.validate();
  if (!(kernel.gamma > 0)) throw ParameterError("train: gamma must be positive");
  return train(SurrogateProblem(data, kernel), lambda, cfg);
}

}  // namespace mimlnd
