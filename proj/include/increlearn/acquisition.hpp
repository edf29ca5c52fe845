#pragma once

#include <cstddef>
#include <optional>

#include "increlearn/softmax_model.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

struct AcquisitionConfig {
  double threshold = 0.9;

  void validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0))
      throw ConfigError("acquisition threshold must be in (0, 1]");
  }
};

// An input the classifier was not confident about, kept for later learning.
// The example's features are the raw feature vector f_j.
struct AcquiredItem {
  Example example;
  double confidence = 0.0;
  // Version of the model that scored it.
  std::size_t model_version = 0;
};

// Selects the input iff its confidence is strictly below the threshold.
inline std::optional<AcquiredItem> acquire(const Prediction& pred, const Example& item,
                                           const AcquisitionConfig& cfg,
                                           std::size_t model_version = 0) {
  if (pred.confidence < cfg.threshold) return AcquiredItem{item, pred.confidence, model_version};
  return std::nullopt;
}

struct ConfidenceSplit {
  Dataset kept;       // confidence >= threshold
  Dataset uncertain;  // confidence < threshold
};

inline ConfidenceSplit split_by_confidence(const Dataset& data, const SoftmaxModel& model,
                                           const AcquisitionConfig& cfg) {
  cfg.validate();
  if (data.dim != model.dim) throw DimensionError(model.dim, data.dim);
  ConfidenceSplit out{data.empty_like(), data.empty_like()};
  for (const auto& ex : data.examples) {
    const auto pred = forward(model, ex.features);
    (acquire(pred, ex, cfg) ? out.uncertain : out.kept).examples.push_back(ex);
  }
  return out;
}

}  // namespace increlearn
