#pragma once

#include <cstddef>
#include <vector>

#include "increlearn/error.hpp"
#include "increlearn/feature_labeler.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t n) : n_(n), counts_(n * n, 0) {}

  std::size_t num_classes() const { return n_; }
  std::size_t at(ClassIndex truth, ClassIndex predicted) const { return counts_.at(truth * n_ + predicted); }
  void add(ClassIndex truth, ClassIndex predicted) { ++counts_.at(truth * n_ + predicted); }

  std::size_t total() const {
    std::size_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::size_t correct() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }
  std::size_t row_total(ClassIndex truth) const {
    std::size_t t = 0;
    for (std::size_t j = 0; j < n_; ++j) t += at(truth, j);
    return t;
  }
  // 0 for an empty matrix.
  double accuracy() const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(t);
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
};

namespace detail {

template <typename Predict>
ConfusionMatrix confusion(const Dataset& data, Predict&& predict) {
  ConfusionMatrix cm(data.num_classes());
  for (const auto& ex : data.examples) {
    if (!ex.true_label)
      throw DataError(DataError::Kind::missing_label, "evaluation needs a true label for '" + ex.id + "'");
    cm.add(*ex.true_label, predict(ex));
  }
  return cm;
}

}  // namespace detail

inline ConfusionMatrix evaluate(const SoftmaxModel& model, const Dataset& data) {
  return detail::confusion(data, [&](const Example& ex) { return forward(model, ex.features).best_class; });
}

inline ConfusionMatrix evaluate_labeler(const AnchorSet& anchors, const LabelerConfig& cfg, const Dataset& data) {
  return detail::confusion(data,
                           [&](const Example& ex) { return pseudo_label(ex.features, anchors, cfg).label; });
}

// |P|: inputs whose confidence is below t.
inline std::size_t count_uncertain(const SoftmaxModel& model, const Dataset& data, double threshold) {
  std::size_t n = 0;
  for (const auto& ex : data.examples)
    if (forward(model, ex.features).confidence < threshold) ++n;
  return n;
}

}  // namespace increlearn
