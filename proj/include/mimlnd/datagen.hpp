#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mimlnd/dataset.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/random.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

// log of a Gamma(shape, 1) variate. Marsaglia-Tsang squeeze for shape >= 1;
// shape < 1 uses Gamma(shape) = Gamma(shape + 1) * U^(1/shape), kept in log
// space so tiny shapes do not underflow to zero.
inline double log_gamma_variate(double shape, Rng& rng) {
  if (!(shape > 0) || !std::isfinite(shape))
    throw ParameterError("gamma variate: shape must be positive");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double boost = 0.0;
  if (shape < 1.0) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    boost = std::log(u) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  std::normal_distribution<double> normal;
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = unif(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v) + boost;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return std::log(d * v) + boost;
  }
}

inline std::vector<double> dirichlet_sample(const std::vector<double>& beta, Rng& rng) {
  if (beta.empty()) throw ParameterError("dirichlet: empty concentration vector");
  for (double b : beta)
    if (!(b > 0) || !std::isfinite(b))
      throw ParameterError("dirichlet: concentration values must be positive");
  std::vector<double> logs(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) logs[i] = log_gamma_variate(beta[i], rng);
  const double top = *std::max_element(logs.begin(), logs.end());
  double sum = 0.0;
  for (double& l : logs) sum += (l = std::exp(l - top));
  for (double& l : logs) l /= sum;
  return logs;
}

// M counts drawn from Multinomial(M, p) via sequential conditional binomials.
inline std::vector<int> multinomial_counts(int total, const std::vector<double>& p, Rng& rng) {
  std::vector<int> counts(p.size(), 0);
  int left = total;
  double mass = 1.0;
  for (std::size_t i = 0; i + 1 < p.size() && left > 0; ++i) {
    const double q = mass > 0 ? std::clamp(p[i] / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<int> bin(left, q);
    counts[i] = bin(rng);
    left -= counts[i];
    mass -= p[i];
  }
  counts.back() += left;
  return counts;
}

// Deterministic rounding of M * p that preserves the total.
inline std::vector<int> largest_remainder_counts(int total, const std::vector<double>& p) {
  std::vector<int> counts(p.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double exact = p[i] * total;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[rem[k % rem.size()].second];
  return counts;
}

// Per-class instance lists; classes[i] tags every row of instances[i].
struct InstancePool {
  std::vector<Label> classes;
  std::vector<InstanceTable> instances;

  Index dimension() const { return instances.empty() ? 0 : instances.front().cols(); }

  void validate() const {
    if (classes.empty() || classes.size() != instances.size())
      throw ParameterError("pool: class list and instance lists disagree");
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (instances[i].rows() < 1)
        throw ParameterError("pool: class '" + classes[i] + "' has no instances");
      if (instances[i].cols() != dimension())
        throw ParameterError("pool: inconsistent dimension");
    }
  }

  // Rows of every class in `keep`, stacked in pool order.
  InstanceTable rows_of(const std::vector<Label>& keep) const {
    Index n = 0;
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (std::find(keep.begin(), keep.end(), classes[i]) != keep.end()) n += instances[i].rows();
    InstanceTable out(n, dimension());
    Index at = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (std::find(keep.begin(), keep.end(), classes[i]) == keep.end()) continue;
      out.middleRows(at, instances[i].rows()) = instances[i];
      at += instances[i].rows();
    }
    return out;
  }
};

enum class Allocation { Multinomial, LargestRemainder };

struct BagGenConfig {
  int n_bags = 100;
  int bag_size = 20;
  std::vector<Label> known_labels;
  std::vector<double> beta;  // one entry per pool class
  std::uint64_t seed = 0;
  bool filter_empty = false;
  Allocation allocation = Allocation::Multinomial;
  int max_redraws = 10000;
};

// Per bag: proportions ~ Dirichlet(beta), M class counts from those
// proportions, instances drawn with replacement from each class pool, and
// Y_i = Y intersected with the classes present. With filter_empty the bag is
// redrawn until Y_i is non-empty.
inline LabeledDataset generate_bags(const InstancePool& pool, const BagGenConfig& cfg) {
  pool.validate();
  if (cfg.n_bags < 1 || cfg.bag_size < 1)
    throw ParameterError("generate_bags: bag count and size must be positive");
  if (cfg.beta.size() != pool.classes.size())
    throw ParameterError("generate_bags: beta length must equal the number of pool classes");
  if (cfg.known_labels.empty()) throw ParameterError("generate_bags: empty known label set");
  std::vector<char> is_known(pool.classes.size(), 0);
  for (const Label& y : cfg.known_labels) {
    auto it = std::find(pool.classes.begin(), pool.classes.end(), y);
    if (it == pool.classes.end())
      throw ParameterError("generate_bags: known label '" + y + "' is not a pool class");
    is_known[static_cast<std::size_t>(it - pool.classes.begin())] = 1;
  }

  std::vector<Bag> bags;
  bags.reserve(static_cast<std::size_t>(cfg.n_bags));
  for (int b = 0; b < cfg.n_bags; ++b) {
    Rng rng = make_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
    Bag bag;
    bag.id = "b" + std::to_string(b);
    for (int attempt = 0;; ++attempt) {
      if (attempt >= cfg.max_redraws)
        throw ParameterError("generate_bags: redraw cap reached while filtering empty label sets");
      const std::vector<double> p = dirichlet_sample(cfg.beta, rng);
      const std::vector<int> counts = cfg.allocation == Allocation::Multinomial
                                          ? multinomial_counts(cfg.bag_size, p, rng)
                                          : largest_remainder_counts(cfg.bag_size, p);
      bag.instances.resize(cfg.bag_size, pool.dimension());
      bag.true_classes.emplace();
      bag.labels.clear();
      Index row = 0;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) continue;
        std::uniform_int_distribution<Index> pick(0, pool.instances[k].rows() - 1);
        for (int j = 0; j < counts[k]; ++j) {
          bag.instances.row(row++) = pool.instances[k].row(pick(rng));
          bag.true_classes->push_back(pool.classes[k]);
        }
        if (is_known[k]) bag.labels.push_back(pool.classes[k]);
      }
      if (!cfg.filter_empty || !bag.labels.empty()) break;
    }
    bags.push_back(std::move(bag));
  }
  return LabeledDataset(std::move(bags), cfg.known_labels);
}

struct Fraction {
  long numerator = 0;
  long denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.numerator * b.denominator == b.numerator * a.denominator;
  }
};

// Fraction of bags in which "instance type present" and "label present"
// agree (both present or both absent). Types are read from true_classes.
inline Fraction co_occurrence(const LabeledDataset& data, const Label& instance_type,
                              const Label& label) {
  if (!data.has_true_classes())
    throw ParameterError("co_occurrence: bags carry no instance type tags");
  if (!data.label_index(label)) throw ParameterError("co_occurrence: unknown label '" + label + "'");
  bool type_seen = false;
  long agree = 0;
  for (const Bag& bag : data.bags()) {
    const auto& types = *bag.true_classes;
    const bool has_type = std::find(types.begin(), types.end(), instance_type) != types.end();
    type_seen |= has_type;
    if (has_type == bag.has_label(label)) ++agree;
  }
  if (!type_seen) throw ParameterError("co_occurrence: unknown instance type '" + instance_type + "'");
  const long n = static_cast<long>(data.bag_count());
  const long g = std::gcd(agree, n);
  return {agree / g, n / g};
}

// Isotropic Gaussian classes with centers evenly spaced on a circle in the
// first two coordinates. Class names are "0", "1", ...
struct SyntheticGaussianConfig {
  int classes = 10;
  int per_class = 400;
  double radius = 6.0;
  double stddev = 1.0;
  int dimension = 2;
};

inline InstancePool synthetic_gaussian_pool(const SyntheticGaussianConfig& cfg, std::uint64_t seed) {
  if (cfg.classes < 1 || cfg.per_class < 1 || cfg.dimension < 2)
    throw ParameterError("synthetic pool: invalid configuration");
  InstancePool pool;
  for (int k = 0; k < cfg.classes; ++k) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> normal(0.0, cfg.stddev);
    const double angle = 2.0 * std::numbers::pi * k / cfg.classes;
    InstanceTable rows(cfg.per_class, cfg.dimension);
    for (Index i = 0; i < rows.rows(); ++i)
      for (Index j = 0; j < rows.cols(); ++j) rows(i, j) = normal(rng);
    rows.col(0).array() += cfg.radius * std::cos(angle);
    rows.col(1).array() += cfg.radius * std::sin(angle);
    pool.classes.push_back(std::to_string(k));
    pool.instances.push_back(std::move(rows));
  }
  return pool;
}

// Disjoint halves of every class list, shuffled by seed. The first half gets
// ceil(n/2) rows.
inline std::pair<InstancePool, InstancePool> split_pool(const InstancePool& pool, std::uint64_t seed) {
  pool.validate();
  InstancePool a, b;
  for (std::size_t k = 0; k < pool.classes.size(); ++k) {
    const Index n = pool.instances[k].rows();
    if (n < 2) throw ParameterError("split_pool: class '" + pool.classes[k] + "' has fewer than 2 instances");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::shuffle(order.begin(), order.end(), rng);
    const Index half = (n + 1) / 2;
    InstanceTable first(half, pool.dimension()), second(n - half, pool.dimension());
    for (Index i = 0; i < n; ++i) {
      const auto src = pool.instances[k].row(order[static_cast<std::size_t>(i)]);
      if (i < half) first.row(i) = src;
      else second.row(i - half) = src;
    }
    a.classes.push_back(pool.classes[k]);
    a.instances.push_back(std::move(first));
    b.classes.push_back(pool.classes[k]);
    b.instances.push_back(std::move(second));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace mimlnd
