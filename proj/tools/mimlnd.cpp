// mimlnd: multi-instance multi-label novelty detection from the command line.
//
// Exit codes: 0 success, 2 format or I/O error, 3 convergence error,
// 4 invalid configuration.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mimlnd/mimlnd.hpp"

namespace fs = std::filesystem;
using namespace mimlnd;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitConfig = 4;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
  std::string config;
};

ExperimentConfig base_config(const Globals& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw IoError("cannot open config '" + g.config + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(g.config + ": " + e.what());
    }
    cfg = experiment_config_from_json(j);
  }
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  cfg.threads = g.threads;
  return cfg;
}

std::optional<std::vector<Label>> known_or_none(const std::vector<std::string>& v) {
  if (v.empty()) return std::nullopt;
  return v;
}

std::ostream& pick_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw IoError("cannot write '" + path + "'");
  return file;
}

std::string out_or(const Globals& g, const std::string& fallback) {
  return g.out.empty() ? fallback : g.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel score-function novelty detection for multi-instance multi-label data"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed");
  app.add_option("--out", g.out, "Output path (file or directory, per subcommand)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "Experiment/training configuration JSON");

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize train/test bag CSVs");
  std::string gen_source = "synthetic-gaussian";
  std::vector<std::string> gen_known;
  std::optional<int> gen_train_bags, gen_test_bags, gen_bag_size;
  std::optional<double> gen_beta;
  bool gen_train_filter = false, gen_test_filter = false;
  std::string gen_images, gen_labels;
  gen->add_option("--source", gen_source, "synthetic-gaussian or mnist-idx");
  gen->add_option("--known", gen_known, "Known label set")->delimiter(',');
  gen->add_option("--train-bags", gen_train_bags);
  gen->add_option("--test-bags", gen_test_bags);
  gen->add_option("--bag-size", gen_bag_size);
  gen->add_option("--beta", gen_beta, "Dirichlet concentration for every class");
  gen->add_flag("--train-filter", gen_train_filter, "Reject training bags with empty label sets");
  gen->add_flag("--test-filter", gen_test_filter, "Reject test bags with empty label sets");
  gen->add_option("--mnist-images", gen_images);
  gen->add_option("--mnist-labels", gen_labels);

  // train
  auto* tr = app.add_subcommand("train", "Train a score model with fixed (lambda, gamma)");
  std::string tr_inst, tr_lab;
  std::vector<std::string> tr_known;
  double tr_lambda = 1e-3;
  std::optional<double> tr_gamma;
  double tr_gamma_factor = 1.0;
  std::optional<int> tr_outer, tr_restarts;
  tr->add_option("--instances", tr_inst)->required();
  tr->add_option("--labels", tr_lab)->required();
  tr->add_option("--known", tr_known, "Known label set (default: union of bag labels)")->delimiter(',');
  tr->add_option("--lambda", tr_lambda);
  tr->add_option("--gamma", tr_gamma, "Kernel gamma (absolute)");
  tr->add_option("--gamma-factor", tr_gamma_factor, "gamma = factor / median squared distance");
  tr->add_option("--outer-iters", tr_outer);
  tr->add_option("--restarts", tr_restarts);

  // tune
  auto* tu = app.add_subcommand("tune", "Grid-search (lambda, gamma) by bag zero-one loss");
  std::string tu_inst, tu_lab, tu_sel_inst, tu_sel_lab, tu_table;
  std::vector<std::string> tu_known;
  std::vector<double> tu_lambdas, tu_gammas, tu_factors;
  tu->add_option("--instances", tu_inst)->required();
  tu->add_option("--labels", tu_lab)->required();
  tu->add_option("--known", tu_known)->delimiter(',');
  tu->add_option("--lambda-grid", tu_lambdas)->delimiter(',');
  tu->add_option("--gamma-grid", tu_gammas, "Absolute gamma values")->delimiter(',');
  tu->add_option("--gamma-factors", tu_factors, "Multiples of 1/median squared distance")->delimiter(',');
  tu->add_option("--select-instances", tu_sel_inst, "Validation bags for selection instead of training bags");
  tu->add_option("--select-labels", tu_sel_lab);
  tu->add_option("--table", tu_table, "Write the per-cell table as CSV");

  // detect
  auto* de = app.add_subcommand("detect", "Flag novel instances");
  std::string de_model, de_inst;
  double de_eps = 0.0;
  de->add_option("--model", de_model)->required();
  de->add_option("--instances", de_inst)->required();
  de->add_option("--epsilon", de_eps, "Novel iff max score < epsilon")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "ROC/AUC of a model on labeled bags with ground truth");
  std::string ev_model, ev_inst, ev_lab;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--instances", ev_inst)->required();
  ev->add_option("--labels", ev_lab)->required();

  // baseline
  auto* ba = app.add_subcommand("baseline", "One-class SVM baseline ROC over the nu sweep");
  std::string ba_tr_inst, ba_tr_lab, ba_te_inst, ba_te_lab;
  std::vector<std::string> ba_known;
  std::vector<double> ba_factors;
  ba->add_option("--train-instances", ba_tr_inst)->required();
  ba->add_option("--train-labels", ba_tr_lab)->required();
  ba->add_option("--test-instances", ba_te_inst)->required();
  ba->add_option("--test-labels", ba_te_lab)->required();
  ba->add_option("--known", ba_known)->delimiter(',');
  ba->add_option("--gamma-factors", ba_factors)->delimiter(',');

  // experiment
  auto* ex = app.add_subcommand("experiment", "End-to-end replicated experiment");
  std::optional<int> ex_reps;
  std::optional<std::string> ex_source;
  std::vector<std::string> ex_known;
  bool ex_baseline = false, ex_train_filter = false;
  ex->add_option("--replications", ex_reps);
  ex->add_option("--source", ex_source);
  ex->add_option("--known", ex_known)->delimiter(',');
  ex->add_flag("--baseline", ex_baseline, "Also run the one-class SVM baseline");
  ex->add_flag("--train-filter", ex_train_filter, "Reject training bags with empty label sets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    ExperimentConfig cfg = base_config(g);

    if (*gen) {
      cfg.source = parse_source(gen_source);
      if (!gen_known.empty()) cfg.known_labels = gen_known;
      if (gen_train_bags) cfg.n_train_bags = *gen_train_bags;
      if (gen_test_bags) cfg.n_test_bags = *gen_test_bags;
      if (gen_bag_size) cfg.bag_size = *gen_bag_size;
      if (gen_beta) cfg.beta = *gen_beta;
      cfg.train_filter_empty |= gen_train_filter;
      cfg.test_filter_empty |= gen_test_filter;
      if (!gen_images.empty()) cfg.mnist_images = gen_images;
      if (!gen_labels.empty()) cfg.mnist_labels = gen_labels;
      if (cfg.source == DataSource::Csv) throw ParameterError("generate: csv is not a generator source");
      const fs::path dir = out_or(g, ".");
      fs::create_directories(dir);
      auto [train, test] = experiment_datasets(cfg, 0);
      write_dataset_csv(train, (dir / "train_instances.csv").string(), (dir / "train_labels.csv").string());
      write_dataset_csv(test, (dir / "test_instances.csv").string(), (dir / "test_labels.csv").string());
      std::cout << "wrote " << train.bag_count() << " training and " << test.bag_count()
                << " test bags to " << dir.string() << "\n";
      return 0;
    }

    if (*tr) {
      const LabeledDataset data = load_csv_dataset(tr_inst, tr_lab, known_or_none(tr_known));
      TrainConfig tc = cfg.train;
      if (tr_outer) tc.outer_iters = *tr_outer;
      if (tr_restarts) tc.restarts = *tr_restarts;
      const double gamma = tr_gamma ? *tr_gamma : tr_gamma_factor / median_squared_distance(data.flatten());
      const TrainResult r = train(data, tr_lambda, KernelConfig{gamma}, tc);
      const std::string path = out_or(g, "model.json");
      save_model(path, r.model, threshold_grid(r.model, data));
      std::cout << "lambda=" << format_double(tr_lambda) << " gamma=" << format_double(gamma)
                << " objective=" << format_double(r.final_objective) << " restart=" << r.restart
                << " zero_one_loss=" << zero_one_bag_loss(r.model, data) << "\nmodel: " << path << "\n";
      for (const auto& d : r.diagnostics) std::cerr << "warning: " << d << "\n";
      return 0;
    }

    if (*tu) {
      const LabeledDataset data = load_csv_dataset(tu_inst, tu_lab, known_or_none(tu_known));
      std::optional<LabeledDataset> select;
      if (!tu_sel_inst.empty() || !tu_sel_lab.empty()) {
        if (tu_sel_inst.empty() || tu_sel_lab.empty())
          throw ParameterError("tune: --select-instances and --select-labels go together");
        select = load_csv_dataset(tu_sel_inst, tu_sel_lab, data.known_labels());
      }
      GridSpec grid;
      grid.lambda_grid = tu_lambdas.empty() ? cfg.lambda_grid : tu_lambdas;
      if (!tu_gammas.empty()) grid.gamma_grid = tu_gammas;
      else if (!cfg.gamma_grid.empty() && tu_factors.empty()) grid.gamma_grid = cfg.gamma_grid;
      else grid.gamma_grid = scaled_gamma_grid(data.flatten(), tu_factors.empty() ? cfg.gamma_factors : tu_factors);
      const TuningReport rep = grid_search(data, grid, cfg.train, g.threads, select ? &*select : nullptr);
      const std::string path = out_or(g, "model.json");
      save_model(path, rep.best.model, threshold_grid(rep.best.model, data));
      std::ofstream table_file;
      if (!tu_table.empty()) {
        std::ostream& t = pick_out(tu_table, table_file);
        t << "lambda,gamma,zero_one_loss,final_objective,failed\n";
        for (const auto& c : rep.table)
          t << format_double(c.lambda) << ',' << format_double(c.gamma) << ',' << c.zero_one_loss << ','
            << format_double(c.final_objective) << ',' << (c.failed ? 1 : 0) << '\n';
      }
      std::cout << "best lambda=" << format_double(rep.best_lambda) << " gamma=" << format_double(rep.best_gamma)
                << " objective=" << format_double(rep.best.final_objective) << "\nmodel: " << path << "\n";
      return 0;
    }

    if (*de) {
      const StoredModel sm = load_model(de_model);
      const auto rows = read_instances_csv(de_inst);
      InstanceTable x(static_cast<Index>(rows.size()), sm.model.dimension());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Index>(rows[i].features.size()) != sm.model.dimension())
          throw FormatError(de_inst + ": row " + std::to_string(i + 2) + " has the wrong dimension for the model");
        for (Index k = 0; k < x.cols(); ++k) x(static_cast<Index>(i), k) = rows[i].features[static_cast<std::size_t>(k)];
      }
      const auto scores = max_scores(sm.model, x);
      std::ofstream file;
      std::ostream& out = pick_out(g.out, file);
      out << "instance_id,max_score,best_class,verdict\n";
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Detection d = detect(scores[i], de_eps);
        out << rows[i].instance_id << ',' << format_double(d.max_score) << ','
            << sm.model.labels[static_cast<std::size_t>(d.best_class)] << ',' << to_string(d.verdict) << '\n';
      }
      return 0;
    }

    if (*ev) {
      const StoredModel sm = load_model(ev_model);
      const LabeledDataset data = load_csv_dataset(ev_inst, ev_lab, sm.model.labels);
      const std::vector<double> thresholds =
          sm.thresholds.empty() ? threshold_grid(sm.model, data) : sm.thresholds;
      const RocCurve curve = roc(sm.model, data, thresholds);
      const std::string path = out_or(g, "roc.csv");
      write_roc_csv(path, curve);
      std::cout << "auc=" << format_double(curve.auc) << " rank_auc=" << format_double(curve.rank_auc)
                << " points=" << curve.points.size() << "\nroc: " << path << "\n";
      return 0;
    }

    if (*ba) {
      const LabeledDataset train_data = load_csv_dataset(ba_tr_inst, ba_tr_lab, known_or_none(ba_known));
      const LabeledDataset test_data = load_csv_dataset(ba_te_inst, ba_te_lab, train_data.known_labels());
      if (!train_data.has_true_classes())
        throw ParameterError("baseline: training instances need true_class tags");
      const auto& known = train_data.known_labels();
      std::vector<Index> keep;
      Index row = 0;
      for (const Bag& b : train_data.bags())
        for (const Label& t : *b.true_classes) {
          if (std::find(known.begin(), known.end(), t) != known.end()) keep.push_back(row);
          ++row;
        }
      const InstanceTable all = train_data.flatten();
      InstanceTable normal(static_cast<Index>(keep.size()), all.cols());
      for (std::size_t i = 0; i < keep.size(); ++i) normal.row(static_cast<Index>(i)) = all.row(keep[i]);
      const auto gammas = scaled_gamma_grid(normal, ba_factors.empty() ? cfg.baseline_gamma_factors : ba_factors);
      const OcsvmRocResult r = ocsvm_roc(normal, test_data, known, NuSweep::standard(), gammas, g.threads);
      const std::string path = out_or(g, "baseline_roc.csv");
      write_roc_csv(path, r.curve);
      std::cout << "auc=" << format_double(r.curve.auc) << " gamma=" << format_double(r.gamma)
                << "\nroc: " << path << "\n";
      return 0;
    }

    if (*ex) {
      if (ex_reps) cfg.replications = *ex_reps;
      if (ex_source) cfg.source = parse_source(*ex_source);
      if (!ex_known.empty()) cfg.known_labels = ex_known;
      cfg.baseline |= ex_baseline;
      cfg.train_filter_empty |= ex_train_filter;
      cfg.output_dir = out_or(g, "report");
      const RunReport rep = run_experiment(cfg, [](const ReplicationResult& r) {
        std::cerr << "replication " << r.index << ": "
                  << (r.skipped ? "skipped (" + r.message + ")" : "auc=" + format_double(r.auc)) << "\n";
      });
      std::cout << "mean_auc=" << format_double(rep.mean_auc) << " std_auc=" << format_double(rep.std_auc)
                << " used=" << rep.used << "/" << rep.replications.size();
      if (rep.mean_baseline_auc) std::cout << " mean_baseline_auc=" << format_double(*rep.mean_baseline_auc);
      std::cout << "\nreport: " << cfg.output_dir << "\n";
      return 0;
    }
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const Error& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitFormat;
  }
  return 0;
}
