#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mimlnd/dataset.hpp"
#include "mimlnd/detector.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/model.hpp"

namespace mimlnd {

// Shortest text that parses back to the same double; "inf"/"-inf"/"nan" for
// non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

namespace detail {

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

[[noreturn]] inline void format_fail(const std::string& path, std::size_t line, const std::string& what) {
  throw FormatError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

// Sorts numerically when every label parses as a number, else lexically.
inline void sort_labels(std::vector<Label>& labels) {
  const bool numeric = std::all_of(labels.begin(), labels.end(),
                                   [](const Label& l) { return parse_double(l).has_value(); });
  if (numeric)
    std::stable_sort(labels.begin(), labels.end(),
                     [](const Label& a, const Label& b) { return *parse_double(a) < *parse_double(b); });
  else
    std::sort(labels.begin(), labels.end());
}

struct InstanceRow {
  std::string bag_id;
  std::string instance_id;
  std::optional<Label> true_class;
  std::vector<double> features;
};

// Instances CSV: header `bag_id,instance_id,true_class,f0,...,f{d-1}`;
// `-` in true_class means unknown.
inline std::vector<InstanceRow> read_instances_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> width;
  std::vector<InstanceRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = detail::trim(line);
    if (text.empty()) continue;
    auto cells = detail::split(text, ',');
    if (!width) {
      if (cells.size() < 4 || detail::trim(cells[0]) != "bag_id" ||
          detail::trim(cells[1]) != "instance_id" || detail::trim(cells[2]) != "true_class")
        detail::format_fail(path, lineno, "expected header bag_id,instance_id,true_class,f0,...");
      width = cells.size();
      continue;
    }
    if (cells.size() != *width)
      detail::format_fail(path, lineno, "expected " + std::to_string(*width) + " fields, found " +
                                            std::to_string(cells.size()));
    InstanceRow r;
    r.bag_id = detail::trim(cells[0]);
    r.instance_id = detail::trim(cells[1]);
    if (r.bag_id.empty()) detail::format_fail(path, lineno, "empty bag_id");
    const std::string tc = detail::trim(cells[2]);
    if (!tc.empty() && tc != "-") r.true_class = tc;
    for (std::size_t k = 3; k < cells.size(); ++k) {
      const auto v = parse_double(detail::trim(cells[k]));
      if (!v || !std::isfinite(*v))
        detail::format_fail(path, lineno, "non-numeric feature in column " + std::to_string(k + 1));
      r.features.push_back(*v);
    }
    rows.push_back(std::move(r));
  }
  if (!width) detail::format_fail(path, lineno, "missing header");
  if (rows.empty()) detail::format_fail(path, lineno, "no instance rows");
  return rows;
}

// Bags are assembled by bag_id in order of first appearance. Labels CSV:
// header `bag_id,labels`, tokens separated by `;`, empty cell = no labels.
// The known label set is `known` when given, else the union of all tokens.
inline LabeledDataset load_csv_dataset(const std::string& instances_path,
                                       const std::string& labels_path,
                                       const std::optional<std::vector<Label>>& known = std::nullopt) {
  const auto rows = read_instances_csv(instances_path);

  std::vector<Bag> bags;
  std::map<std::string, std::size_t> bag_index;
  std::vector<std::vector<const InstanceRow*>> members;
  for (const auto& r : rows) {
    auto [it, inserted] = bag_index.emplace(r.bag_id, bags.size());
    if (inserted) {
      bags.emplace_back();
      bags.back().id = r.bag_id;
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const auto& ms = members[b];
    const Index d = static_cast<Index>(ms.front()->features.size());
    bags[b].instances.resize(static_cast<Index>(ms.size()), d);
    bool all_tagged = true;
    std::vector<Label> tags;
    for (std::size_t j = 0; j < ms.size(); ++j) {
      for (Index k = 0; k < d; ++k) bags[b].instances(static_cast<Index>(j), k) = ms[j]->features[static_cast<std::size_t>(k)];
      if (ms[j]->true_class) tags.push_back(*ms[j]->true_class);
      else all_tagged = false;
    }
    if (all_tagged) bags[b].true_classes = std::move(tags);
  }

  auto in = detail::open_in(labels_path);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<char> seen(bags.size(), 0);
  std::vector<Label> all_tokens;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = detail::trim(line);
    if (text.empty()) continue;
    if (!header) {
      const auto cells = detail::split(text, ',');
      if (cells.size() != 2 || detail::trim(cells[0]) != "bag_id" || detail::trim(cells[1]) != "labels")
        detail::format_fail(labels_path, lineno, "expected header bag_id,labels");
      header = true;
      continue;
    }
    const auto comma = text.find(',');
    const std::string id = detail::trim(text.substr(0, comma));
    const std::string cell = comma == std::string::npos ? std::string{} : detail::trim(text.substr(comma + 1));
    const auto it = bag_index.find(id);
    if (it == bag_index.end())
      detail::format_fail(labels_path, lineno, "bag_id '" + id + "' matches no instance row");
    if (seen[it->second]) detail::format_fail(labels_path, lineno, "duplicate bag_id '" + id + "'");
    seen[it->second] = 1;
    Bag& bag = bags[it->second];
    if (!cell.empty()) {
      for (const auto& tok : detail::split(cell, ';')) {
        const std::string t = detail::trim(tok);
        if (t.empty()) continue;
        if (!bag.has_label(t)) bag.labels.push_back(t);
        if (std::find(all_tokens.begin(), all_tokens.end(), t) == all_tokens.end()) all_tokens.push_back(t);
      }
    }
  }
  if (!header) detail::format_fail(labels_path, lineno, "missing header");
  for (std::size_t b = 0; b < bags.size(); ++b)
    if (!seen[b]) detail::format_fail(labels_path, lineno, "no labels row for bag '" + bags[b].id + "'");

  std::vector<Label> y = known ? *known : all_tokens;
  if (!known) sort_labels(y);
  if (known) {
    for (Bag& bag : bags)
      std::erase_if(bag.labels, [&](const Label& l) { return std::find(y.begin(), y.end(), l) == y.end(); });
  }
  try {
    return LabeledDataset(std::move(bags), std::move(y));
  } catch (const ParameterError& e) {
    throw FormatError(instances_path + ": " + e.what());
  }
}

inline void write_dataset_csv(const LabeledDataset& data, const std::string& instances_path,
                              const std::string& labels_path) {
  auto inst = detail::open_out(instances_path);
  inst << "bag_id,instance_id,true_class";
  for (Index k = 0; k < data.dimension(); ++k) inst << ",f" << k;
  inst << '\n';
  for (const Bag& bag : data.bags()) {
    for (Index j = 0; j < bag.size(); ++j) {
      inst << bag.id << ',' << bag.id << '_' << j << ','
           << (bag.true_classes ? (*bag.true_classes)[static_cast<std::size_t>(j)] : std::string("-"));
      for (Index k = 0; k < data.dimension(); ++k) inst << ',' << format_double(bag.instances(j, k));
      inst << '\n';
    }
  }
  auto lab = detail::open_out(labels_path);
  lab << "bag_id,labels\n";
  for (const Bag& bag : data.bags()) {
    lab << bag.id << ',';
    for (std::size_t i = 0; i < bag.labels.size(); ++i) lab << (i ? ";" : "") << bag.labels[i];
    lab << '\n';
  }
  if (!inst || !lab) throw IoError("failed writing dataset CSV");
}

inline constexpr const char* kModelFormat = "mimlnd-model";
inline constexpr int kModelVersion = 1;

struct StoredModel {
  ScoreModel model;
  std::vector<double> thresholds;  // with -inf/+inf sentinels when present
};

inline nlohmann::json model_to_json(const ScoreModel& m, const std::vector<double>& thresholds) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["kernel"] = {{"type", "gaussian"}, {"gamma", m.kernel.gamma}};
  j["lambda"] = m.lambda;
  j["labels"] = m.labels;
  j["dimension"] = m.dimension();
  auto& tr = j["training"] = nlohmann::json::array();
  for (Index i = 0; i < m.training.rows(); ++i) {
    std::vector<double> row(m.training.row(i).data(), m.training.row(i).data() + m.training.cols());
    tr.push_back(row);
  }
  auto& al = j["alphas"] = nlohmann::json::array();
  for (Index c = 0; c < m.alphas.cols(); ++c)
    al.push_back(std::vector<double>(m.alphas.col(c).data(), m.alphas.col(c).data() + m.alphas.rows()));
  std::vector<double> finite;
  for (double t : thresholds)
    if (std::isfinite(t)) finite.push_back(t);
  j["thresholds"] = finite;
  return j;
}

inline void save_model(const std::string& path, const ScoreModel& m,
                       const std::vector<double>& thresholds = {}) {
  m.validate();
  auto out = detail::open_out(path);
  out << model_to_json(m, thresholds).dump(1) << '\n';
  if (!out) throw IoError("failed writing model '" + path + "'");
}

inline StoredModel load_model(const std::string& path) {
  auto in = detail::open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": corrupt model document: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw FormatError(path + ": not a model document");
    if (j.at("version").get<int>() != kModelVersion)
      throw FormatError(path + ": unsupported model version " + j.at("version").dump());
    if (j.at("kernel").at("type").get<std::string>() != "gaussian")
      throw FormatError(path + ": unsupported kernel type");
    StoredModel s;
    s.model.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    s.model.lambda = j.at("lambda").get<double>();
    s.model.labels = j.at("labels").get<std::vector<Label>>();
    const auto d = j.at("dimension").get<Index>();
    const auto& tr = j.at("training");
    s.model.training.resize(static_cast<Index>(tr.size()), d);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const auto row = tr[i].get<std::vector<double>>();
      if (static_cast<Index>(row.size()) != d) throw FormatError(path + ": ragged training matrix");
      for (Index k = 0; k < d; ++k) s.model.training(static_cast<Index>(i), k) = row[static_cast<std::size_t>(k)];
    }
    const auto& al = j.at("alphas");
    s.model.alphas.resize(s.model.training.rows(), static_cast<Index>(al.size()));
    for (std::size_t c = 0; c < al.size(); ++c) {
      const auto col = al[c].get<std::vector<double>>();
      if (static_cast<Index>(col.size()) != s.model.training.rows())
        throw FormatError(path + ": alpha length does not match training size");
      for (std::size_t l = 0; l < col.size(); ++l) s.model.alphas(static_cast<Index>(l), static_cast<Index>(c)) = col[l];
    }
    auto finite = j.at("thresholds").get<std::vector<double>>();
    if (!finite.empty()) s.thresholds = thresholds_from_scores(std::move(finite));
    try {
      s.model.validate();
    } catch (const ParameterError& e) {
      throw FormatError(path + ": " + e.what());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": malformed model document: " + e.what());
  }
}

inline void write_roc_csv(const std::string& path, const RocCurve& curve) {
  auto out = detail::open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points)
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<RocPoint> read_roc_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<RocPoint> pts;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = detail::trim(line);
    if (text.empty() || lineno == 1) continue;
    const auto cells = detail::split(text, ',');
    if (cells.size() != 3) detail::format_fail(path, lineno, "expected threshold,fpr,tpr");
    const auto t = parse_double(cells[0]), f = parse_double(cells[1]), p = parse_double(cells[2]);
    if (!t || !f || !p) detail::format_fail(path, lineno, "non-numeric field");
    pts.push_back({*t, *f, *p});
  }
  return pts;
}

}  // namespace mimlnd
