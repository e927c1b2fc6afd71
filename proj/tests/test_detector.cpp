#include <gtest/gtest.h>

#include <limits>

#include "mimlnd/detector.hpp"
#include "test_util.hpp"

using namespace mimlnd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ScoreModel random_model(Index L, Index d, Index classes, Rng& rng) {
  ScoreModel m;
  m.kernel = {0.5};
  m.lambda = 0.1;
  m.training = tutil::random_table(L, d, rng);
  m.alphas = tutil::random_table(L, classes, rng);
  for (Index c = 0; c < classes; ++c) m.labels.push_back("c" + std::to_string(c));
  return m;
}

// Pairwise count with ties as 1/2: probability a novel score sits below a
// known score.
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& novel) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (novel[i] && !novel[j]) {
        pairs += 1;
        wins += s[i] < s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST(MaxScore, SingleClassAndZeroModel) {
  Rng rng = make_rng(1);
  auto m = random_model(6, 2, 1, rng);
  const Vector x = tutil::random_table(2, 1, rng);
  const auto ms = max_score(m, x);
  EXPECT_EQ(ms.best_class, 0);
  EXPECT_DOUBLE_EQ(ms.score, score(m, x, 0));
  m.alphas = Matrix::Zero(6, 3);
  m.labels = {"a", "b", "c"};
  const auto z = max_score(m, x);
  EXPECT_EQ(z.score, 0.0);
  EXPECT_EQ(z.best_class, 0);
}

TEST(MaxScore, ExhaustiveOverClasses) {
  Rng rng = make_rng(2);
  const auto m = random_model(10, 3, 4, rng);
  for (int t = 0; t < 30; ++t) {
    const Vector x = tutil::random_table(3, 1, rng);
    double best = -kInf;
    Index arg = 0;
    for (Index c = 0; c < 4; ++c)
      if (score(m, x, c) > best) best = score(m, x, c), arg = c;
    const auto ms = max_score(m, x);
    EXPECT_NEAR(ms.score, best, 1e-12);
    EXPECT_EQ(ms.best_class, arg);
  }
}

TEST(Detect, ThresholdSemantics) {
  const MaxScore s{0.25, 1};
  EXPECT_EQ(detect(s, -kInf).verdict, Verdict::Known);
  EXPECT_EQ(detect(s, kInf).verdict, Verdict::Novel);
  EXPECT_EQ(detect(s, 0.25).verdict, Verdict::Known);
  EXPECT_EQ(detect(s, std::nextafter(0.25, 1.0)).verdict, Verdict::Novel);
  EXPECT_EQ(detect(s, 0.0).best_class, 1);
}

TEST(Detect, MonotoneInEpsilonAndScaleInvariant) {
  Rng rng = make_rng(3);
  const auto m = random_model(8, 2, 3, rng);
  auto scaled = m;
  scaled.alphas *= 3.0;
  for (int t = 0; t < 50; ++t) {
    const Vector x = tutil::random_table(2, 1, rng);
    bool was_novel = false;
    for (double eps = -2.0; eps <= 2.0; eps += 0.1) {
      const bool novel = detect(m, x, eps).verdict == Verdict::Novel;
      EXPECT_FALSE(was_novel && !novel);
      was_novel = novel;
      EXPECT_EQ(novel, detect(scaled, x, 3.0 * eps).verdict == Verdict::Novel);
    }
  }
}

TEST(Thresholds, SentinelsAndDeduplication) {
  const auto t = thresholds_from_scores({0.3, -0.1, 0.7});
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.front(), -kInf);
  EXPECT_EQ(t.back(), kInf);
  EXPECT_EQ(t[1], -0.1);
  EXPECT_EQ(t[3], 0.7);
  EXPECT_EQ(thresholds_from_scores({0.2, 0.2, 0.2}).size(), 3u);

  Rng rng = make_rng(4);
  const auto data = tutil::random_dataset(5, 4, 2, 2, rng);
  ScoreModel m;
  m.kernel = {1.0};
  m.training = data.flatten();
  m.alphas = tutil::random_table(data.instance_count(), 2, rng);
  m.labels = data.known_labels();
  const auto g = threshold_grid(m, data);
  EXPECT_LE(static_cast<Index>(g.size()), data.instance_count() + 2);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
}

TEST(Roc, PerfectAndUninformative) {
  const std::vector<double> sep{-3, -2, -1, 1, 2, 3};
  const std::vector<bool> novel{true, true, true, false, false, false};
  const auto perfect = roc_from_scores(sep, novel, thresholds_from_scores(sep));
  EXPECT_DOUBLE_EQ(perfect.auc, 1.0);
  EXPECT_DOUBLE_EQ(perfect.rank_auc, 1.0);
  EXPECT_EQ(perfect.points.front().fpr, 0.0);
  EXPECT_EQ(perfect.points.front().tpr, 0.0);
  EXPECT_EQ(perfect.points.back().fpr, 1.0);
  EXPECT_EQ(perfect.points.back().tpr, 1.0);

  const std::vector<double> same(6, 0.4);
  const auto flat = roc_from_scores(same, novel, thresholds_from_scores(same));
  EXPECT_DOUBLE_EQ(flat.auc, 0.5);
  EXPECT_DOUBLE_EQ(flat.rank_auc, 0.5);
}

TEST(Roc, TrapezoidMatchesPairwiseRankAuc) {
  Rng rng = make_rng(5);
  std::normal_distribution<double> n;
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s;
    std::vector<bool> novel;
    for (int i = 0; i < 20; ++i) {
      const bool nv = i < 2 ? i == 0 : coin(rng);
      novel.push_back(nv);
      // Coarse rounding produces ties.
      s.push_back(std::round((n(rng) + (nv ? -0.5 : 0.5)) * 4.0) / 4.0);
    }
    const auto c = roc_from_scores(s, novel, thresholds_from_scores(s));
    const double oracle = pairwise_auc(s, novel);
    EXPECT_NEAR(c.auc, oracle, 1e-9);
    EXPECT_NEAR(c.rank_auc, oracle, 1e-9);
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      EXPECT_GE(c.points[k].fpr, c.points[k - 1].fpr);
      EXPECT_GE(c.points[k].tpr, c.points[k - 1].tpr);
    }
  }
}

TEST(Roc, NeedsBothClasses) {
  const std::vector<double> s{0.1, 0.2};
  EXPECT_THROW(roc_from_scores(s, {true, true}, thresholds_from_scores(s)), EvaluationError);
  EXPECT_THROW(roc_from_scores(s, {false, false}, thresholds_from_scores(s)), EvaluationError);
}

TEST(Roc, NoveltyTruthUsesTrueClasses) {
  const LabeledDataset eval({tutil::make_bag("x", {{0.0}, {1.0}, {2.0}}, {"a"}, {"a", "q", "b"})},
                            {"a", "b"});
  EXPECT_EQ(novelty_truth(eval, {"a", "b"}), (std::vector<bool>{false, true, false}));
  EXPECT_EQ(novelty_truth(eval, {"a"}), (std::vector<bool>{false, true, true}));
  const LabeledDataset bare({tutil::make_bag("x", {{0.0}}, {"a"})}, {"a"});
  EXPECT_THROW(novelty_truth(bare, {"a"}), EvaluationError);
}
