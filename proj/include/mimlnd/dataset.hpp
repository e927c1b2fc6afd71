#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimlnd/error.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

using Label = std::string;

// A bag of instances with its bag-level label set. true_classes carries the
// per-instance ground truth when it is known; training never reads it.
struct Bag {
  std::string id;
  InstanceTable instances;  // one instance per row
  std::vector<Label> labels;
  std::optional<std::vector<Label>> true_classes;

  Index size() const { return instances.rows(); }
  bool has_label(const Label& l) const {
    return std::find(labels.begin(), labels.end(), l) != labels.end();
  }
};

class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::vector<Bag> bags, std::vector<Label> known_labels)
      : bags_(std::move(bags)), known_labels_(std::move(known_labels)) {
    rebuild();
  }

  const std::vector<Bag>& bags() const { return bags_; }
  const Bag& bag(std::size_t i) const { return bags_[i]; }
  std::size_t bag_count() const { return bags_.size(); }
  const std::vector<Label>& known_labels() const { return known_labels_; }
  Index class_count() const { return static_cast<Index>(known_labels_.size()); }
  Index dimension() const { return dimension_; }
  Index instance_count() const { return offsets_.empty() ? 0 : offsets_.back(); }

  // Position of bag i's first instance in the flattened table; offsets()[N]
  // is the total instance count L.
  const std::vector<Index>& offsets() const { return offsets_; }

  // All instances in bag order.
  InstanceTable flatten() const {
    InstanceTable out(instance_count(), dimension_);
    for (std::size_t i = 0; i < bags_.size(); ++i)
      out.middleRows(offsets_[i], bags_[i].size()) = bags_[i].instances;
    return out;
  }

  // y(i, c) = +1 if known label c is in bag i's label set, else -1.
  Eigen::MatrixXi bag_signs() const {
    Eigen::MatrixXi y(static_cast<Index>(bags_.size()), class_count());
    for (std::size_t i = 0; i < bags_.size(); ++i)
      for (Index c = 0; c < class_count(); ++c)
        y(static_cast<Index>(i), c) =
            bags_[i].has_label(known_labels_[static_cast<std::size_t>(c)]) ? 1 : -1;
    return y;
  }

  bool has_true_classes() const {
    return std::all_of(bags_.begin(), bags_.end(),
                       [](const Bag& b) { return b.true_classes.has_value(); });
  }

  std::optional<Index> label_index(const Label& l) const {
    auto it = std::find(known_labels_.begin(), known_labels_.end(), l);
    if (it == known_labels_.end()) return std::nullopt;
    return static_cast<Index>(it - known_labels_.begin());
  }

 private:
  void rebuild() {
    if (bags_.empty()) throw ParameterError("dataset: no bags");
    if (known_labels_.empty()) throw ParameterError("dataset: empty known label set");
    for (std::size_t a = 0; a < known_labels_.size(); ++a)
      for (std::size_t b = a + 1; b < known_labels_.size(); ++b)
        if (known_labels_[a] == known_labels_[b])
          throw ParameterError("dataset: duplicate known label '" + known_labels_[a] + "'");
    dimension_ = bags_.front().instances.cols();
    if (dimension_ < 1) throw ParameterError("dataset: zero-dimensional instances");
    offsets_.assign(1, 0);
    for (const Bag& b : bags_) {
      if (b.size() < 1) throw ParameterError("dataset: bag '" + b.id + "' is empty");
      if (b.instances.cols() != dimension_)
        throw ParameterError("dataset: bag '" + b.id + "' has inconsistent dimension");
      if (!b.instances.allFinite())
        throw ParameterError("dataset: bag '" + b.id + "' has non-finite features");
      for (const Label& l : b.labels)
        if (std::find(known_labels_.begin(), known_labels_.end(), l) == known_labels_.end())
          throw ParameterError("dataset: bag '" + b.id + "' label '" + l +
                               "' is not in the known label set");
      if (b.true_classes && static_cast<Index>(b.true_classes->size()) != b.size())
        throw ParameterError("dataset: bag '" + b.id + "' true_classes length mismatch");
      offsets_.push_back(offsets_.back() + b.size());
    }
  }

  std::vector<Bag> bags_;
  std::vector<Label> known_labels_;
  Index dimension_ = 0;
  std::vector<Index> offsets_;
};

}  // namespace mimlnd
