#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mimlnd/dataset.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/model.hpp"

namespace mimlnd {

enum class Verdict { Known, Novel };

inline const char* to_string(Verdict v) { return v == Verdict::Novel ? "novel" : "known"; }

struct MaxScore {
  double score = 0.0;
  Index best_class = 0;
};

struct Detection {
  double max_score = 0.0;
  Index best_class = 0;
  Verdict verdict = Verdict::Known;
};

inline MaxScore max_score_of(const Eigen::Ref<const Eigen::RowVectorXd>& scores) {
  MaxScore m{scores[0], 0};
  for (Index c = 1; c < scores.size(); ++c)
    if (scores[c] > m.score) m = {scores[c], c};
  return m;
}

inline MaxScore max_score(const ScoreModel& model, const VectorRef& x) {
  return max_score_of(class_scores(model, x).transpose());
}

// max_c f_c of every row; rows are scored in one kernel block.
inline std::vector<MaxScore> max_scores(const ScoreModel& model, const InstanceTable& rows) {
  const Matrix s = class_scores(model, rows);
  std::vector<MaxScore> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Index i = 0; i < s.rows(); ++i) out.push_back(max_score_of(s.row(i)));
  return out;
}

// Novel iff max score < epsilon; a score equal to epsilon is Known.
inline Detection detect(const MaxScore& m, double epsilon) {
  return {m.score, m.best_class, m.score < epsilon ? Verdict::Novel : Verdict::Known};
}

inline Detection detect(const ScoreModel& model, const VectorRef& x, double epsilon) {
  return detect(max_score(model, x), epsilon);
}

// Sorted unique values plus -inf and +inf sentinels.
inline std::vector<double> thresholds_from_scores(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> out;
  out.reserve(scores.size() + 2);
  out.push_back(-std::numeric_limits<double>::infinity());
  out.insert(out.end(), scores.begin(), scores.end());
  out.push_back(std::numeric_limits<double>::infinity());
  return out;
}

// Threshold grid from the max scores of every instance in `data`.
inline std::vector<double> threshold_grid(const ScoreModel& model, const LabeledDataset& data) {
  std::vector<double> scores;
  for (const MaxScore& m : max_scores(model, data.flatten())) scores.push_back(m.score);
  return thresholds_from_scores(std::move(scores));
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// Novel instances are the positive class. Points are ordered by increasing
// threshold, so fpr and tpr are both non-decreasing along the list.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  double rank_auc = 0.0;  // Mann-Whitney estimate with ties counted 1/2
};

// Trapezoidal area of an (fpr, tpr) path ordered by fpr.
inline double trapezoid_auc(std::span<const RocPoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
  return area;
}

// P(novel score < known score) + 1/2 P(tie).
inline double rank_auc(std::span<const double> scores, const std::vector<bool>& novel) {
  if (scores.size() != novel.size()) throw ParameterError("roc: length mismatch");
  std::vector<std::pair<double, bool>> v;
  v.reserve(scores.size());
  std::size_t n_novel = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    v.emplace_back(scores[i], novel[i]);
    n_novel += novel[i] ? 1 : 0;
  }
  const std::size_t n_known = v.size() - n_novel;
  if (n_novel == 0 || n_known == 0)
    throw EvaluationError("roc: evaluation set needs both novel and known instances");
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double wins = 0.0;
  std::size_t known_below = 0;  // known instances with strictly smaller score
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i, tie_novel = 0, tie_known = 0;
    for (; j < v.size() && v[j].first == v[i].first; ++j) (v[j].second ? tie_novel : tie_known)++;
    // Novel in this tie group beat every known above the group.
    const std::size_t known_above = n_known - known_below - tie_known;
    wins += static_cast<double>(tie_novel) *
            (static_cast<double>(known_above) + 0.5 * static_cast<double>(tie_known));
    known_below += tie_known;
    i = j;
  }
  return wins / (static_cast<double>(n_novel) * static_cast<double>(n_known));
}

// TPR(eps) = fraction of novel with score < eps, FPR(eps) likewise for known.
inline RocCurve roc_from_scores(std::span<const double> scores, const std::vector<bool>& novel,
                                std::span<const double> thresholds) {
  if (scores.size() != novel.size()) throw ParameterError("roc: length mismatch");
  std::vector<double> novel_scores, known_scores;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (novel[i] ? novel_scores : known_scores).push_back(scores[i]);
  if (novel_scores.empty() || known_scores.empty())
    throw EvaluationError("roc: evaluation set needs both novel and known instances");
  std::sort(novel_scores.begin(), novel_scores.end());
  std::sort(known_scores.begin(), known_scores.end());

  std::vector<double> ts(thresholds.begin(), thresholds.end());
  std::sort(ts.begin(), ts.end());
  RocCurve curve;
  curve.points.reserve(ts.size());
  auto rate = [](const std::vector<double>& sorted, double eps) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), eps) - sorted.begin();
    return static_cast<double>(below) / static_cast<double>(sorted.size());
  };
  for (double eps : ts) curve.points.push_back({eps, rate(known_scores, eps), rate(novel_scores, eps)});
  curve.auc = trapezoid_auc(curve.points);
  curve.rank_auc = rank_auc(scores, novel);
  return curve;
}

// Ground truth: an instance is novel iff its true class is outside the
// model's label set. All evaluation instances are pooled.
inline std::vector<bool> novelty_truth(const LabeledDataset& eval,
                                       const std::vector<Label>& known) {
  if (!eval.has_true_classes())
    throw EvaluationError("roc: evaluation bags lack ground-truth instance classes");
  std::vector<bool> novel;
  for (const Bag& bag : eval.bags())
    for (const Label& t : *bag.true_classes)
      novel.push_back(std::find(known.begin(), known.end(), t) == known.end());
  return novel;
}

inline RocCurve roc(const ScoreModel& model, const LabeledDataset& eval,
                    std::span<const double> thresholds) {
  const std::vector<bool> truth = novelty_truth(eval, model.labels);
  std::vector<double> scores;
  for (const MaxScore& m : max_scores(model, eval.flatten())) scores.push_back(m.score);
  return roc_from_scores(scores, truth, thresholds);
}

}  // namespace mimlnd
