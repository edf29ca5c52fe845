#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "increlearn/error.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

// Linear classification head: probs = softmax(W x + b).
// W is stored row-major, one row of length dim per class.
struct SoftmaxModel {
  ClassSet classes;
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  // Number of committed incremental updates this model reflects.
  std::size_t version = 0;

  SoftmaxModel() = default;

  // All-zero head.
  SoftmaxModel(ClassSet cls, std::size_t d)
      : classes(std::move(cls)), dim(d), weights(classes.size() * d, 0.0), bias(classes.size(), 0.0) {}

  std::size_t num_classes() const { return classes.size(); }

  std::span<const double> row(ClassIndex n) const {
    return std::span<const double>(weights).subspan(n * dim, dim);
  }
  std::span<double> row(ClassIndex n) { return std::span<double>(weights).subspan(n * dim, dim); }

  void validate() const {
    if (weights.size() != num_classes() * dim || bias.size() != num_classes())
      throw ConfigError("softmax model: weight/bias shape does not match N x D");
    for (double v : weights)
      if (!std::isfinite(v)) throw DataError(DataError::Kind::non_finite_value, "non-finite weight");
    for (double v : bias)
      if (!std::isfinite(v)) throw DataError(DataError::Kind::non_finite_value, "non-finite bias");
  }

  bool operator==(const SoftmaxModel&) const = default;
};

struct Prediction {
  std::vector<double> probs;
  ClassIndex best_class = 0;
  // max(probs)
  double confidence = 0.0;
};

struct LabeledSample {
  std::span<const double> features;
  ClassIndex label = 0;
};

struct Gradient {
  std::vector<double> weights;  // N x D, row-major
  std::vector<double> bias;     // N
};

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 0.0005;
  double momentum = 0.9;
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 5;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw ConfigError("val_fraction must be in (0, 1)");
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainTrace {
  // Monitored loss of the starting weights. Only trained epochs are
  // candidates for the restored model, so training always moves the weights.
  double initial_val_loss = 0.0;
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  // True when no validation split could be carved out and the training loss
  // was monitored instead.
  bool monitored_train_loss = false;
  std::vector<std::string> warnings;
};

struct TrainResult {
  SoftmaxModel model;
  TrainTrace trace;
};

namespace detail {

inline void logits_into(const SoftmaxModel& model, std::span<const double> x,
                        std::vector<double>& out) {
  const std::size_t n_classes = model.num_classes();
  out.resize(n_classes);
  for (ClassIndex n = 0; n < n_classes; ++n) {
    auto w = model.row(n);
    double z = model.bias[n];
    for (std::size_t d = 0; d < model.dim; ++d) z += w[d] * x[d];
    out[n] = z;
  }
}

// In-place max-shifted softmax.
inline void softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

inline void check_dim(const SoftmaxModel& model, std::span<const double> x) {
  if (x.size() != model.dim) throw DimensionError(model.dim, x.size());
}

inline void check_batch(const SoftmaxModel& model, std::span<const LabeledSample> batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  for (const auto& s : batch) {
    check_dim(model, s.features);
    if (s.label >= model.num_classes())
      throw DataError(DataError::Kind::unknown_class, "label " + std::to_string(s.label) +
                                                          " out of range");
  }
}

}  // namespace detail

// Index of the largest entry; ties go to the lowest index.
inline ClassIndex argmax(std::span<const double> v) {
  ClassIndex best = 0;
  for (ClassIndex i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline Prediction forward(const SoftmaxModel& model, std::span<const double> x) {
  detail::check_dim(model, x);
  Prediction p;
  detail::logits_into(model, x, p.probs);
  detail::softmax_inplace(p.probs);
  p.best_class = argmax(p.probs);
  p.confidence = p.probs[p.best_class];
  return p;
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double cross_entropy_loss(const SoftmaxModel& model, std::span<const LabeledSample> batch) {
  detail::check_batch(model, batch);
  std::vector<double> z;
  double total = 0.0;
  for (const auto& s : batch) {
    detail::logits_into(model, s.features, z);
    detail::softmax_inplace(z);
    total -= std::log(std::max(z[s.label], kProbabilityFloor));
  }
  return total / static_cast<double>(batch.size());
}

// Gradient of the mean batch cross-entropy with respect to (W, b).
inline Gradient gradient(const SoftmaxModel& model, std::span<const LabeledSample> batch) {
  detail::check_batch(model, batch);
  const std::size_t n_classes = model.num_classes();
  Gradient g{std::vector<double>(n_classes * model.dim, 0.0), std::vector<double>(n_classes, 0.0)};
  std::vector<double> z;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    detail::logits_into(model, s.features, z);
    detail::softmax_inplace(z);
    z[s.label] -= 1.0;
    for (ClassIndex n = 0; n < n_classes; ++n) {
      const double r = z[n] * scale;
      g.bias[n] += r;
      double* gw = g.weights.data() + n * model.dim;
      for (std::size_t d = 0; d < model.dim; ++d) gw[d] += r * s.features[d];
    }
  }
  return g;
}

// Mini-batch SGD with momentum on the mean cross-entropy, with early
// stopping on a seeded validation split. Returns the weights of the trained epoch
// (1-based) with the lowest monitored loss; max_epochs = 0 returns the input.
inline TrainResult train(const SoftmaxModel& initial, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult result{initial, {}};
  if (cfg.max_epochs == 0) return result;
  if (data.empty()) throw DataError(DataError::Kind::empty, "training set is empty");
  if (data.dim != initial.dim) throw DimensionError(initial.dim, data.dim);

  std::vector<LabeledSample> samples;
  samples.reserve(data.size());
  for (const auto& ex : data.examples) {
    auto label = ex.training_label();
    if (!label)
      throw DataError(DataError::Kind::missing_label, "example '" + ex.id + "' has no label");
    samples.push_back({ex.features, *label});
  }
  detail::check_batch(initial, samples);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.seed, "train/val-split"));
  std::shuffle(order.begin(), order.end(), split_rng);

  std::size_t n_val = static_cast<std::size_t>(
      std::llround(cfg.val_fraction * static_cast<double>(samples.size())));
  n_val = std::min(n_val, samples.size() - 1);

  std::vector<LabeledSample> val_set, train_set;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_val ? val_set : train_set).push_back(samples[order[i]]);

  auto& trace = result.trace;
  trace.monitored_train_loss = val_set.empty();
  {
    std::vector<bool> present(initial.num_classes(), false);
    for (const auto& s : train_set) present[s.label] = true;
    for (ClassIndex n = 0; n < present.size(); ++n)
      if (!present[n])
        trace.warnings.push_back("class '" + initial.classes.name(n) +
                                 "' absent from the training portion");
  }

  const auto& monitor = val_set.empty() ? train_set : val_set;
  SoftmaxModel current = initial;
  trace.initial_val_loss = cross_entropy_loss(current, monitor);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<double> vel_w(current.weights.size(), 0.0);
  std::vector<double> vel_b(current.bias.size(), 0.0);
  Rng shuffle_rng(derive_seed(cfg.seed, "train/shuffle"));
  std::vector<LabeledSample> batch;
  batch.reserve(cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_set.begin(), train_set.end(), shuffle_rng);
    for (std::size_t start = 0; start < train_set.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, train_set.size());
      std::span<const LabeledSample> b(train_set.data() + start, stop - start);
      Gradient g = gradient(current, b);
      for (std::size_t i = 0; i < vel_w.size(); ++i) {
        vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * g.weights[i];
        current.weights[i] += vel_w[i];
      }
      for (std::size_t i = 0; i < vel_b.size(); ++i) {
        vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * g.bias[i];
        current.bias[i] += vel_b[i];
      }
    }

    EpochStats stats{epoch, cross_entropy_loss(current, train_set), 0.0};
    stats.val_loss = val_set.empty() ? stats.train_loss : cross_entropy_loss(current, val_set);
    trace.epochs.push_back(stats);

    if (stats.val_loss < best_loss) {
      best_loss = stats.val_loss;
      trace.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      trace.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace increlearn
