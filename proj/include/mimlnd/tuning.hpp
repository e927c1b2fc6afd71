#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mimlnd/dataset.hpp"
#include "mimlnd/kernel.hpp"
#include "mimlnd/model.hpp"
#include "mimlnd/parallel.hpp"
#include "mimlnd/random.hpp"

namespace mimlnd {

struct GridSpec {
  std::vector<double> lambda_grid;
  std::vector<double> gamma_grid;

  void validate() const {
    auto check = [](const std::vector<double>& g, const char* name) {
      if (g.empty()) throw ParameterError(std::string("grid: empty ") + name + " grid");
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] > 0) || !std::isfinite(g[i]))
          throw ParameterError(std::string("grid: ") + name + " values must be positive");
        if (i > 0 && !(g[i] > g[i - 1]))
          throw ParameterError(std::string("grid: ") + name + " grid must be strictly ascending");
      }
    };
    check(lambda_grid, "lambda");
    check(gamma_grid, "gamma");
  }
};

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> g{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  return g;
}

// Multipliers of 1 / median squared pairwise distance.
inline const std::vector<double>& default_gamma_factors() {
  static const std::vector<double> g{0.015625, 0.0625, 0.25, 1.0, 4.0, 16.0};
  return g;
}

inline std::vector<double> scaled_gamma_grid(const InstanceTable& instances,
                                             const std::vector<double>& factors) {
  const double med = median_squared_distance(instances);
  if (!(med > 0)) throw ParameterError("grid: all instances coincide");
  std::vector<double> out;
  for (double f : factors) out.push_back(f / med);
  return out;
}

inline GridSpec default_grid(const LabeledDataset& data) {
  return {default_lambda_grid(), scaled_gamma_grid(data.flatten(), default_gamma_factors())};
}

// Number of (bag, class) pairs with y_ic * max_j f_c(x_ij) < 0 (strict).
inline long zero_one_bag_loss(const ScoreModel& model, const LabeledDataset& data) {
  if (model.dimension() != data.dimension())
    throw ParameterError("zero_one_bag_loss: dimension mismatch");
  long loss = 0;
  for (const Bag& bag : data.bags()) {
    const Eigen::RowVectorXd best = class_scores(model, bag.instances).colwise().maxCoeff();
    for (Index c = 0; c < model.class_count(); ++c) {
      const double y = bag.has_label(model.labels[static_cast<std::size_t>(c)]) ? 1.0 : -1.0;
      if (y * best[c] < 0) ++loss;
    }
  }
  return loss;
}

struct GridCell {
  double lambda = 0.0;
  double gamma = 0.0;
  long zero_one_loss = 0;
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string message;
};

struct TuningReport {
  double best_lambda = 0.0;
  double best_gamma = 0.0;
  TrainResult best;
  std::vector<GridCell> table;  // gamma-major, lambda-minor
};

namespace detail {

// Total order: loss, then final objective, then lambda, then gamma.
inline bool cell_less(const GridCell& a, const GridCell& b) {
  return std::tie(a.zero_one_loss, a.final_objective, a.lambda, a.gamma) <
         std::tie(b.zero_one_loss, b.final_objective, b.lambda, b.gamma);
}

}  // namespace detail

// Trains one model per (lambda, gamma) cell and keeps the cell minimizing the
// bag-level zero-one loss. The loss is measured on `selection` when given,
// otherwise on the training bags. Each cell's restarts use a stream keyed by
// the cell's (lambda, gamma) values, so the result does not depend on grid
// enumeration order.
inline TuningReport grid_search(const LabeledDataset& data, const GridSpec& grid,
                                const TrainConfig& cfg, unsigned threads = 1,
                                const LabeledDataset* selection = nullptr) {
  grid.validate();
  cfg.validate();
  const LabeledDataset& judge = selection ? *selection : data;

  const std::size_t n_lambda = grid.lambda_grid.size();
  std::vector<GridCell> table(grid.gamma_grid.size() * n_lambda);
  std::vector<std::optional<TrainResult>> results(table.size());

  // One job per gamma so the Gram matrix is shared across the lambda column.
  parallel_for(grid.gamma_grid.size(), threads, [&](std::size_t gi) {
    const double gamma = grid.gamma_grid[gi];
    const SurrogateProblem problem(data, KernelConfig{gamma});
    for (std::size_t li = 0; li < n_lambda; ++li) {
      const std::size_t idx = gi * n_lambda + li;
      GridCell& cell = table[idx];
      cell.lambda = grid.lambda_grid[li];
      cell.gamma = gamma;
      TrainConfig cell_cfg = cfg;
      cell_cfg.seed = derive_seed(cfg.seed, cell.lambda, cell.gamma);
      try {
        TrainResult r = train(problem, cell.lambda, cell_cfg);
        cell.final_objective = r.final_objective;
        cell.zero_one_loss = zero_one_bag_loss(r.model, judge);
        results[idx] = std::move(r);
      } catch (const ConvergenceError& e) {
        cell.failed = true;
        cell.message = e.what();
      }
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].failed) continue;
    if (!best || detail::cell_less(table[i], table[*best])) best = i;
  }
  if (!best) throw ConvergenceError("grid_search: every grid cell failed to train");

  TuningReport report;
  report.best_lambda = table[*best].lambda;
  report.best_gamma = table[*best].gamma;
  report.best = std::move(*results[*best]);
  report.table = std::move(table);
  return report;
}

}  // namespace mimlnd
