#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimlnd/datagen.hpp"
#include "mimlnd/detector.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/idx.hpp"
#include "mimlnd/io.hpp"
#include "mimlnd/ocsvm.hpp"
#include "mimlnd/parallel.hpp"
#include "mimlnd/pca.hpp"
#include "mimlnd/tuning.hpp"

namespace mimlnd {

enum class DataSource { SyntheticGaussian, MnistIdx, Csv };

inline const char* to_string(DataSource s) {
  switch (s) {
    case DataSource::SyntheticGaussian: return "synthetic-gaussian";
    case DataSource::MnistIdx: return "mnist-idx";
    case DataSource::Csv: return "csv";
  }
  return "unknown";
}

inline DataSource parse_source(const std::string& s) {
  if (s == "synthetic-gaussian") return DataSource::SyntheticGaussian;
  if (s == "mnist-idx") return DataSource::MnistIdx;
  if (s == "csv") return DataSource::Csv;
  throw ParameterError("unknown data source '" + s + "'");
}

// Settings used by the tools when none are given. The descent stops an
// L-BFGS call once a step improves the surrogate by less than 1e-6
// (relative), which keeps desk-scale grids tractable.
inline TrainConfig default_tool_train_config() {
  TrainConfig t;
  t.lbfgs.rel_tol = 1e-6;
  return t;
}

struct ExperimentConfig {
  DataSource source = DataSource::SyntheticGaussian;
  std::vector<Label> known_labels{"0", "1", "3", "7"};

  int n_train_bags = 100;
  int n_test_bags = 100;
  int bag_size = 20;
  double beta = 0.1;               // used for every class unless beta_vector is set
  std::vector<double> beta_vector;
  bool train_filter_empty = false;  // true: rejection of empty label sets
  bool test_filter_empty = false;
  Allocation allocation = Allocation::Multinomial;

  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> gamma_factors = default_gamma_factors();  // x 1/median d^2
  std::vector<double> gamma_grid;  // absolute values; overrides gamma_factors
  TrainConfig train = default_tool_train_config();

  int replications = 10;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output_dir;

  bool baseline = false;
  std::vector<double> baseline_gamma_factors = default_gamma_factors();

  SyntheticGaussianConfig synthetic;

  std::string mnist_images;
  std::string mnist_labels;
  int pca_dim = 20;
  int pca_fit_rows = 5000;

  std::string train_instances, train_labels, test_instances, test_labels;

  void validate() const {
    if (replications < 1) throw ParameterError("experiment: replications must be >= 1");
    if (known_labels.empty()) throw ParameterError("experiment: empty known label set");
    if (n_train_bags < 1 || n_test_bags < 1 || bag_size < 1)
      throw ParameterError("experiment: bag counts and size must be positive");
    if (beta_vector.empty() && !(beta > 0)) throw ParameterError("experiment: beta must be positive");
    if (gamma_grid.empty() && gamma_factors.empty())
      throw ParameterError("experiment: empty gamma grid");
    train.validate();
    if (source == DataSource::MnistIdx && (mnist_images.empty() || mnist_labels.empty()))
      throw ParameterError("experiment: mnist-idx source needs image and label paths");
    if (source == DataSource::Csv &&
        (train_instances.empty() || train_labels.empty() || test_instances.empty() || test_labels.empty()))
      throw ParameterError("experiment: csv source needs train/test instance and label paths");
    if (pca_dim < 1) throw ParameterError("experiment: pca_dim must be positive");
  }
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["source"] = to_string(c.source);
  j["known_labels"] = c.known_labels;
  j["n_train_bags"] = c.n_train_bags;
  j["n_test_bags"] = c.n_test_bags;
  j["bag_size"] = c.bag_size;
  j["beta"] = c.beta;
  j["beta_vector"] = c.beta_vector;
  j["train_filter_empty"] = c.train_filter_empty;
  j["test_filter_empty"] = c.test_filter_empty;
  j["allocation"] = c.allocation == Allocation::Multinomial ? "multinomial" : "largest-remainder";
  j["lambda_grid"] = c.lambda_grid;
  j["gamma_factors"] = c.gamma_factors;
  j["gamma_grid"] = c.gamma_grid;
  j["train"] = {{"outer_iters", c.train.outer_iters},
                {"restarts", c.train.restarts},
                {"seed", c.train.seed},
                {"lbfgs",
                 {{"memory", c.train.lbfgs.memory},
                  {"max_iters", c.train.lbfgs.max_iters},
                  {"grad_tol", c.train.lbfgs.grad_tol},
                  {"armijo_c1", c.train.lbfgs.armijo_c1},
                  {"backtrack", c.train.lbfgs.backtrack},
                  {"rel_tol", c.train.lbfgs.rel_tol}}}};
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["baseline"] = c.baseline;
  j["baseline_gamma_factors"] = c.baseline_gamma_factors;
  j["synthetic"] = {{"classes", c.synthetic.classes},
                    {"per_class", c.synthetic.per_class},
                    {"radius", c.synthetic.radius},
                    {"stddev", c.synthetic.stddev},
                    {"dimension", c.synthetic.dimension}};
  j["mnist"] = {{"images", c.mnist_images}, {"labels", c.mnist_labels},
                {"pca_dim", c.pca_dim}, {"pca_fit_rows", c.pca_fit_rows}};
  j["csv"] = {{"train_instances", c.train_instances}, {"train_labels", c.train_labels},
              {"test_instances", c.test_instances}, {"test_labels", c.test_labels}};
  return j;
}

// Missing keys keep their defaults.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                                    ExperimentConfig c = {}) {
  try {
    auto get = [&](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("source")) c.source = parse_source(j.at("source").get<std::string>());
    get(j, "known_labels", c.known_labels);
    get(j, "n_train_bags", c.n_train_bags);
    get(j, "n_test_bags", c.n_test_bags);
    get(j, "bag_size", c.bag_size);
    get(j, "beta", c.beta);
    get(j, "beta_vector", c.beta_vector);
    get(j, "train_filter_empty", c.train_filter_empty);
    get(j, "test_filter_empty", c.test_filter_empty);
    if (j.contains("allocation")) {
      const auto a = j.at("allocation").get<std::string>();
      if (a == "multinomial") c.allocation = Allocation::Multinomial;
      else if (a == "largest-remainder") c.allocation = Allocation::LargestRemainder;
      else throw ParameterError("experiment: unknown allocation '" + a + "'");
    }
    get(j, "lambda_grid", c.lambda_grid);
    get(j, "gamma_factors", c.gamma_factors);
    get(j, "gamma_grid", c.gamma_grid);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      get(t, "outer_iters", c.train.outer_iters);
      get(t, "restarts", c.train.restarts);
      get(t, "seed", c.train.seed);
      if (t.contains("lbfgs")) {
        const auto& l = t.at("lbfgs");
        get(l, "memory", c.train.lbfgs.memory);
        get(l, "max_iters", c.train.lbfgs.max_iters);
        get(l, "grad_tol", c.train.lbfgs.grad_tol);
        get(l, "armijo_c1", c.train.lbfgs.armijo_c1);
        get(l, "backtrack", c.train.lbfgs.backtrack);
        get(l, "rel_tol", c.train.lbfgs.rel_tol);
      }
    }
    get(j, "replications", c.replications);
    get(j, "seed", c.seed);
    get(j, "baseline", c.baseline);
    get(j, "baseline_gamma_factors", c.baseline_gamma_factors);
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      get(s, "classes", c.synthetic.classes);
      get(s, "per_class", c.synthetic.per_class);
      get(s, "radius", c.synthetic.radius);
      get(s, "stddev", c.synthetic.stddev);
      get(s, "dimension", c.synthetic.dimension);
    }
    if (j.contains("mnist")) {
      const auto& m = j.at("mnist");
      get(m, "images", c.mnist_images);
      get(m, "labels", c.mnist_labels);
      get(m, "pca_dim", c.pca_dim);
      get(m, "pca_fit_rows", c.pca_fit_rows);
    }
    if (j.contains("csv")) {
      const auto& s = j.at("csv");
      get(s, "train_instances", c.train_instances);
      get(s, "train_labels", c.train_labels);
      get(s, "test_instances", c.test_instances);
      get(s, "test_labels", c.test_labels);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("experiment config: ") + e.what());
  }
  return c;
}

struct ReplicationResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool skipped = false;
  std::string message;
  double auc = 0.0;
  double rank_auc = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  double final_objective = 0.0;
  long zero_one_loss = 0;
  long train_instances = 0;
  long test_instances = 0;
  long test_novel = 0;
  long empty_train_bags = 0;
  std::optional<double> baseline_auc;
  std::optional<double> baseline_gamma;
  RocCurve roc;
  std::optional<RocCurve> baseline_roc;
  std::vector<GridCell> tuning;
  double seconds = 0.0;           // whole replication, baseline included
  double baseline_seconds = 0.0;  // baseline alone
};

struct RunReport {
  std::vector<ReplicationResult> replications;
  int used = 0;
  double mean_auc = std::numeric_limits<double>::quiet_NaN();
  double std_auc = 0.0;
  std::optional<double> mean_baseline_auc;
  std::optional<double> std_baseline_auc;
  double seconds = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

struct SourceData {
  std::optional<InstancePool> pool;  // mnist: projected pool
  std::optional<LabeledDataset> train, test;  // csv
};

inline SourceData load_source(const ExperimentConfig& cfg) {
  SourceData s;
  if (cfg.source == DataSource::MnistIdx) {
    InstancePool raw = load_idx(cfg.mnist_images, cfg.mnist_labels);
    // PCA is fit once, on a seeded subsample of all loaded images.
    InstanceTable all = raw.rows_of(raw.classes);
    std::vector<Index> order(static_cast<std::size_t>(all.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(derive_seed(cfg.seed, 0xfca11ULL));
    std::shuffle(order.begin(), order.end(), rng);
    const Index n_fit = std::min<Index>(all.rows(), cfg.pca_fit_rows);
    InstanceTable fit(n_fit, all.cols());
    for (Index i = 0; i < n_fit; ++i) fit.row(i) = all.row(order[static_cast<std::size_t>(i)]);
    const PcaProjection proj = pca_fit(fit, std::min<Index>(cfg.pca_dim, all.cols()));
    for (auto& t : raw.instances) t = pca_transform_rows(proj, t);
    s.pool = std::move(raw);
  } else if (cfg.source == DataSource::Csv) {
    s.train = load_csv_dataset(cfg.train_instances, cfg.train_labels, cfg.known_labels);
    s.test = load_csv_dataset(cfg.test_instances, cfg.test_labels, cfg.known_labels);
  }
  return s;
}

inline std::pair<LabeledDataset, LabeledDataset> make_datasets(const ExperimentConfig& cfg,
                                                              const SourceData& src,
                                                              std::uint64_t rep_seed) {
  if (cfg.source == DataSource::Csv) return {*src.train, *src.test};
  const InstancePool pool = cfg.source == DataSource::SyntheticGaussian
                                ? synthetic_gaussian_pool(cfg.synthetic, derive_seed(rep_seed, 1))
                                : *src.pool;
  auto [train_pool, test_pool] = split_pool(pool, derive_seed(rep_seed, 2));
  BagGenConfig g;
  g.bag_size = cfg.bag_size;
  g.known_labels = cfg.known_labels;
  g.beta = cfg.beta_vector.empty() ? std::vector<double>(pool.classes.size(), cfg.beta) : cfg.beta_vector;
  g.allocation = cfg.allocation;
  g.n_bags = cfg.n_train_bags;
  g.filter_empty = cfg.train_filter_empty;
  g.seed = derive_seed(rep_seed, 3);
  LabeledDataset train = generate_bags(train_pool, g);
  g.n_bags = cfg.n_test_bags;
  g.filter_empty = cfg.test_filter_empty;
  g.seed = derive_seed(rep_seed, 4);
  return {std::move(train), generate_bags(test_pool, g)};
}

inline ReplicationResult run_replication(const ExperimentConfig& cfg, const SourceData& src, int r) {
  const auto start = std::chrono::steady_clock::now();
  ReplicationResult out;
  out.index = r;
  out.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));

  auto [train_data, test_data] = make_datasets(cfg, src, out.seed);
  const LabeledDataset* train = &train_data;
  const LabeledDataset* test = &test_data;
  for (const Bag& b : train->bags()) out.empty_train_bags += b.labels.empty() ? 1 : 0;
  out.train_instances = train->instance_count();
  out.test_instances = test->instance_count();

  GridSpec grid;
  grid.lambda_grid = cfg.lambda_grid;
  grid.gamma_grid = cfg.gamma_grid.empty() ? scaled_gamma_grid(train->flatten(), cfg.gamma_factors)
                                           : cfg.gamma_grid;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(out.seed, 5);
  TuningReport tuned = grid_search(*train, grid, tc);
  out.lambda = tuned.best_lambda;
  out.gamma = tuned.best_gamma;
  out.final_objective = tuned.best.final_objective;
  out.tuning = tuned.table;
  for (const GridCell& c : tuned.table)
    if (c.lambda == out.lambda && c.gamma == out.gamma) out.zero_one_loss = c.zero_one_loss;

  try {
    const auto truth = novelty_truth(*test, tuned.best.model.labels);
    for (bool b : truth) out.test_novel += b ? 1 : 0;
    const std::vector<double> thresholds = threshold_grid(tuned.best.model, *train);
    out.roc = roc(tuned.best.model, *test, thresholds);
    out.auc = out.roc.auc;
    out.rank_auc = out.roc.rank_auc;
    if (cfg.baseline) {
      const auto baseline_start = std::chrono::steady_clock::now();
      if (!train->has_true_classes())
        throw EvaluationError("baseline needs ground-truth classes on training instances");
      // Known-class training instances, selected with ground-truth tags.
      std::vector<Index> keep;
      const InstanceTable all = train->flatten();
      Index row = 0;
      for (const Bag& b : train->bags())
        for (const Label& t : *b.true_classes) {
          if (std::find(cfg.known_labels.begin(), cfg.known_labels.end(), t) != cfg.known_labels.end())
            keep.push_back(row);
          ++row;
        }
      InstanceTable normal(static_cast<Index>(keep.size()), all.cols());
      for (std::size_t i = 0; i < keep.size(); ++i) normal.row(static_cast<Index>(i)) = all.row(keep[i]);
      const auto gammas = scaled_gamma_grid(normal, cfg.baseline_gamma_factors);
      OcsvmRocResult b = ocsvm_roc(normal, *test, cfg.known_labels, NuSweep::standard(), gammas);
      out.baseline_auc = b.curve.auc;
      out.baseline_gamma = b.gamma;
      out.baseline_roc = std::move(b.curve);
      out.baseline_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - baseline_start).count();
    }
  } catch (const EvaluationError& e) {
    out.skipped = true;
    out.message = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline std::string rep_dir_name(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "rep_%03d", r);
  return buf;
}

}  // namespace detail

// Train/test bags exactly as replication `rep` of run_experiment builds them.
inline std::pair<LabeledDataset, LabeledDataset> experiment_datasets(const ExperimentConfig& cfg, int rep = 0) {
  cfg.validate();
  return detail::make_datasets(cfg, detail::load_source(cfg),
                               derive_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const RunReport& report) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  auto& reps = j["replications"] = nlohmann::json::array();
  for (const auto& r : report.replications) {
    nlohmann::json e{{"index", r.index},
                     {"seed", r.seed},
                     {"skipped", r.skipped},
                     {"lambda", r.lambda},
                     {"gamma", r.gamma},
                     {"final_objective", r.final_objective},
                     {"zero_one_loss", r.zero_one_loss},
                     {"train_instances", r.train_instances},
                     {"test_instances", r.test_instances},
                     {"test_novel", r.test_novel},
                     {"empty_train_bags", r.empty_train_bags}};
    if (r.skipped) {
      e["message"] = r.message;
    } else {
      e["auc"] = r.auc;
      e["rank_auc"] = r.rank_auc;
    }
    if (r.baseline_auc) {
      e["baseline_auc"] = *r.baseline_auc;
      e["baseline_gamma"] = *r.baseline_gamma;
    }
    reps.push_back(std::move(e));
  }
  j["used_replications"] = report.used;
  j["mean_auc"] = report.mean_auc;
  j["std_auc"] = report.std_auc;
  if (report.mean_baseline_auc) {
    j["mean_baseline_auc"] = *report.mean_baseline_auc;
    j["std_baseline_auc"] = *report.std_baseline_auc;
  }
  return j;
}

// Writes <out>/summary.json, <out>/timing.json and per-replication
// rep_NNN/{roc.csv,tuning.csv[,baseline_roc.csv]}. summary.json carries no
// timing, so identical configs produce identical bytes.
inline void write_report(const std::string& dir, const ExperimentConfig& cfg, const RunReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& r : report.replications) {
    const fs::path rd = fs::path(dir) / detail::rep_dir_name(r.index);
    fs::create_directories(rd);
    if (!r.skipped) write_roc_csv((rd / "roc.csv").string(), r.roc);
    if (r.baseline_roc) write_roc_csv((rd / "baseline_roc.csv").string(), *r.baseline_roc);
    auto t = detail::open_out((rd / "tuning.csv").string());
    t << "lambda,gamma,zero_one_loss,final_objective,failed\n";
    for (const auto& c : r.tuning)
      t << format_double(c.lambda) << ',' << format_double(c.gamma) << ',' << c.zero_one_loss << ','
        << format_double(c.final_objective) << ',' << (c.failed ? 1 : 0) << '\n';
  }
  {
    auto out = detail::open_out((fs::path(dir) / "summary.json").string());
    out << summary_json(cfg, report).dump(2) << '\n';
  }
  nlohmann::json timing;
  timing["total_seconds"] = report.seconds;
  for (const auto& r : report.replications) {
    timing["replication_seconds"].push_back(r.seconds);
    if (cfg.baseline) timing["baseline_seconds"].push_back(r.baseline_seconds);
  }
  auto out = detail::open_out((fs::path(dir) / "timing.json").string());
  out << timing.dump(2) << '\n';
}

// Replications run in parallel on cfg.threads workers; each derives its own
// seed from (cfg.seed, r). Replications whose evaluation set lacks novel or
// known instances are kept in the report, marked skipped, and excluded from
// the mean.
inline RunReport run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const ReplicationResult&)>& on_done = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const detail::SourceData src = detail::load_source(cfg);
  RunReport report;
  report.replications.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(report.replications.size(), cfg.threads, [&](std::size_t r) {
    report.replications[r] = detail::run_replication(cfg, src, static_cast<int>(r));
    if (on_done) on_done(report.replications[r]);
  });
  std::vector<double> aucs, base;
  for (const auto& r : report.replications) {
    if (r.skipped) continue;
    aucs.push_back(r.auc);
    if (r.baseline_auc) base.push_back(*r.baseline_auc);
  }
  report.used = static_cast<int>(aucs.size());
  std::tie(report.mean_auc, report.std_auc) = detail::mean_std(aucs);
  if (!base.empty()) {
    auto [m, s] = detail::mean_std(base);
    report.mean_baseline_auc = m;
    report.std_baseline_auc = s;
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!cfg.output_dir.empty()) write_report(cfg.output_dir, cfg, report);
  return report;
}

}  // namespace mimlnd
