#include <gtest/gtest.h>

#include "mimlnd/ocsvm.hpp"
#include "test_util.hpp"

using namespace mimlnd;

namespace {

double dual_value(const Matrix& K, const Vector& a) { return 0.5 * a.dot(K * a); }

// Euclidean projection onto {0 <= a <= u, sum a = 1} by bisection on the shift.
Vector project(const Vector& v, double u) {
  double lo = v.minCoeff() - u - 1.0, hi = v.maxCoeff() + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = (v.array() - mid).cwiseMax(0.0).cwiseMin(u).sum();
    (s > 1.0 ? lo : hi) = mid;
  }
  return (v.array() - 0.5 * (lo + hi)).cwiseMax(0.0).cwiseMin(u);
}

// Accelerated projected gradient on the dual.
double projected_gradient_min(const Matrix& K, double nu) {
  const Index n = K.rows();
  const double u = 1.0 / (nu * static_cast<double>(n));
  const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(K).eigenvalues().maxCoeff();
  Vector a = Vector::Constant(n, 1.0 / static_cast<double>(n)), y = a;
  double t = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const Vector next = project(y - step * (K * y), u);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - a);
    a = next;
    t = t_next;
  }
  return dual_value(K, a);
}

InstanceTable cluster(Index n, double cx, double cy, Rng& rng) {
  InstanceTable t = tutil::random_table(n, 2, rng, 0.5);
  t.col(0).array() += cx;
  t.col(1).array() += cy;
  return t;
}

}  // namespace

TEST(Ocsvm, NuOneGivesUniformWeights) {
  Rng rng = make_rng(1);
  const auto m = ocsvm_train(tutil::random_table(7, 2, rng), 1.0, {0.5});
  for (Index i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(m.weights[i], 1.0 / 7.0);
}

TEST(Ocsvm, IdenticalPair) {
  const InstanceTable t = InstanceTable::Constant(2, 2, 0.3);
  for (double nu : {0.5, 0.8, 1.0}) {
    const auto m = ocsvm_train(t, nu, {1.0});
    EXPECT_NEAR(m.weights[0], 0.5, 1e-12);
    EXPECT_NEAR(m.weights[1], 0.5, 1e-12);
    EXPECT_NEAR(m.rho, 1.0, 1e-12);
  }
}

TEST(Ocsvm, NuProperty) {
  Rng rng = make_rng(2);
  const InstanceTable t = tutil::random_table(30, 2, rng);
  const double nu = 0.2;
  const auto m = ocsvm_train(t, nu, {0.5});
  const Vector dec = ocsvm_decisions(m, t);
  const double margin = OcsvmSolverConfig{}.tol;
  int outliers = 0, svs = 0;
  for (Index i = 0; i < 30; ++i) {
    outliers += dec[i] < -margin;  // beyond the solver's KKT tolerance
    svs += m.weights[i] > 1e-12;
  }
  EXPECT_LE(outliers / 30.0, nu + 0.05);
  EXPECT_GE(svs / 30.0, nu - 0.05);
}

TEST(Ocsvm, MatchesProjectedGradientOracle) {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> pick(0.05, 0.95);
  for (int trial = 0; trial < 10; ++trial) {
    const InstanceTable t = tutil::random_table(20, 2, rng);
    const double nu = pick(rng);
    const Matrix K = gram(t, {0.5}).entries;
    const auto m = ocsvm_train(t, K, nu, {0.5});
    const double u = 1.0 / (nu * 20.0);
    EXPECT_NEAR(m.weights.sum(), 1.0, 1e-8);
    EXPECT_GE(m.weights.minCoeff(), 0.0);
    EXPECT_LE(m.weights.maxCoeff(), u);
    const double oracle = projected_gradient_min(K, nu);
    EXPECT_NEAR(m.dual_objective, dual_value(K, m.weights), 1e-12);
    EXPECT_LE(std::abs(m.dual_objective - oracle), 1e-4 * std::abs(oracle)) << "nu=" << nu;
  }
}

TEST(Ocsvm, DecisionFunction) {
  Rng rng = make_rng(4);
  const auto m = ocsvm_train(cluster(25, 0, 0, rng), 0.3, {0.5});
  EXPECT_LT(ocsvm_decision(m, Vector{{40.0, 40.0}}), 0.0);
  EXPECT_NEAR(ocsvm_decision(m, Vector{{40.0, 40.0}}), -m.rho, 1e-12);

  OcsvmModel one;
  one.kernel = {1.0};
  one.training = InstanceTable::Constant(1, 2, 1.5);
  one.weights = Vector::Ones(1);
  one.rho = 0.5;
  EXPECT_DOUBLE_EQ(ocsvm_decision(one, Vector::Constant(2, 1.5)), 0.5);
  EXPECT_GT(ocsvm_decision(one, Vector::Constant(2, 1.5)), 0.0);
}

TEST(Ocsvm, ParameterAndConvergenceErrors) {
  Rng rng = make_rng(5);
  const InstanceTable t = tutil::random_table(10, 2, rng);
  EXPECT_THROW(ocsvm_train(t, 0.0, {1.0}), ParameterError);
  EXPECT_THROW(ocsvm_train(t, 1.5, {1.0}), ParameterError);
  EXPECT_THROW(ocsvm_train(t.topRows(1), 0.5, {1.0}), ParameterError);
  OcsvmSolverConfig tight;
  tight.max_iters = 1;
  tight.tol = 1e-15;
  EXPECT_THROW(ocsvm_train(t, 0.25, {1.0}, tight), ConvergenceError);
}

TEST(NuSweep, StandardValues) {
  const auto s = NuSweep::standard();
  ASSERT_EQ(s.values.size(), 50u);
  EXPECT_DOUBLE_EQ(s.values.front(), 0.02);
  EXPECT_EQ(s.values.back(), 1.0);
}

TEST(OcsvmRoc, IndistinguishableNoveltyIsChance) {
  Rng rng = make_rng(6);
  const InstanceTable normal = cluster(30, 0, 0, rng);
  const InstanceTable eval = cluster(20, 0, 0, rng);
  std::vector<Bag> bags;
  std::vector<std::vector<double>> rows;
  for (Index i = 0; i < eval.rows(); ++i) rows.push_back({eval(i, 0), eval(i, 1)});
  bags.push_back(tutil::make_bag("k", rows, {"a"}, std::vector<Label>(rows.size(), "a")));
  bags.push_back(tutil::make_bag("n", rows, {}, std::vector<Label>(rows.size(), "z")));
  const LabeledDataset data(bags, {"a"});
  const auto r = ocsvm_roc(normal, data, {"a"}, NuSweep::standard(), {0.1, 1.0});
  EXPECT_NEAR(r.curve.auc, 0.5, 1e-12);
}

TEST(OcsvmRoc, SeparatedClusters) {
  Rng rng = make_rng(7);
  const InstanceTable normal = cluster(40, 0, 0, rng);
  std::vector<std::vector<double>> rows;
  std::vector<Label> tags;
  const InstanceTable k = cluster(20, 0, 0, rng), n = cluster(20, 8, 8, rng);
  for (Index i = 0; i < 20; ++i) {
    rows.push_back({k(i, 0), k(i, 1)});
    tags.push_back("a");
    rows.push_back({n(i, 0), n(i, 1)});
    tags.push_back("z");
  }
  const LabeledDataset data({tutil::make_bag("e", rows, {"a"}, tags)}, {"a"});
  const auto r = ocsvm_roc(normal, data, {"a"}, NuSweep::standard(), {0.05, 0.5, 2.0}, 2);
  EXPECT_GE(r.curve.auc, 0.95);
  EXPECT_EQ(r.auc_by_gamma.size(), 3u);
  EXPECT_EQ(r.curve.points.front().fpr, 0.0);
  EXPECT_EQ(r.curve.points.back().tpr, 1.0);
}
