#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "increlearn/error.hpp"

namespace increlearn {

using FeatureVector = std::vector<double>;
using ClassIndex = std::size_t;

// Ordered list of class names. The position of a name is its class index.
class ClassSet {
 public:
  ClassSet() = default;

  explicit ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw ConfigError("a class set needs at least 2 classes");
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw ConfigError("class names must be non-empty");
      if (!seen.insert(n).second) throw ConfigError("duplicate class name '" + n + "'");
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(ClassIndex n) const { return names_.at(n); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<ClassIndex> index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<ClassIndex>(it - names_.begin());
  }

  bool operator==(const ClassSet&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Example {
  std::string id;
  FeatureVector features;
  std::optional<ClassIndex> true_label;
  std::optional<ClassIndex> pseudo_label;

  // Label used for training: the pseudo-label wins when both are present.
  std::optional<ClassIndex> training_label() const {
    return pseudo_label ? pseudo_label : true_label;
  }

  bool operator==(const Example&) const = default;
};

struct Dataset {
  ClassSet classes;
  std::size_t dim = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::size_t num_classes() const { return classes.size(); }

  // Same classes and dimension, no examples.
  Dataset empty_like() const { return Dataset{classes, dim, {}}; }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out = empty_like();
    out.examples.reserve(indices.size());
    for (std::size_t i : indices) out.examples.push_back(examples.at(i));
    return out;
  }

  // Checks dimensions, finiteness, id uniqueness and label ranges.
  void validate() const {
    std::unordered_set<std::string_view> ids;
    for (const auto& ex : examples) {
      if (ex.features.size() != dim) throw DimensionError(dim, ex.features.size());
      for (double v : ex.features)
        if (!std::isfinite(v))
          throw DataError(DataError::Kind::non_finite_value,
                          "non-finite feature in example '" + ex.id + "'");
      if (!ids.insert(ex.id).second)
        throw DataError(DataError::Kind::duplicate_id, "duplicate example id '" + ex.id + "'");
      for (const auto& label : {ex.true_label, ex.pseudo_label})
        if (label && *label >= classes.size())
          throw DataError(DataError::Kind::unknown_class,
                          "label out of range in example '" + ex.id + "'");
    }
  }

  bool operator==(const Dataset&) const = default;
};

// Per-class counts of the training label; unlabeled examples are skipped.
inline std::vector<std::size_t> class_counts(const Dataset& data) {
  std::vector<std::size_t> counts(data.num_classes(), 0);
  for (const auto& ex : data.examples)
    if (auto l = ex.training_label()) ++counts.at(*l);
  return counts;
}

}  // namespace increlearn
