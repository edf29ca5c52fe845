#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "increlearn/acquisition.hpp"
#include "increlearn/error.hpp"
#include "increlearn/feature_labeler.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

// An acquired input with its pseudo-label, waiting for the next update.
struct PendingItem {
  Example example;           // pseudo_label is set
  FeatureVector normalized;  // f', unit norm
  double confidence = 0.0;        // softmax confidence when acquired
  double label_confidence = 0.0;  // soft-voting confidence of the pseudo-label
  std::size_t model_version = 0;

  bool operator==(const PendingItem&) const = default;
};

struct PendingSet {
  std::size_t capacity = 5;
  std::vector<PendingItem> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool ready() const { return items.size() >= capacity; }

  std::vector<std::size_t> class_counts(std::size_t num_classes) const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& it : items) ++counts.at(*it.example.pseudo_label);
    return counts;
  }

  bool operator==(const PendingSet&) const = default;
};

struct BalanceConfig {
  std::size_t per_class = 100;  // Q
  std::uint64_t seed = 0;
};

// Everything the loop carries from one update to the next. model, feature
// space and q advance together at commit.
struct SystemState {
  SoftmaxModel model;
  Dataset training_set;
  FeatureSpace feature_space;
  AnchorSet anchors;
  PendingSet pending;
  std::size_t q = 0;
  // Items of the input stream consumed so far; lets a checkpoint resume.
  std::size_t stream_position = 0;

  void check_invariants() const {
    if (model.version != q || feature_space.version != q)
      throw Error("state versions disagree: model " + std::to_string(model.version) +
                  ", feature space " + std::to_string(feature_space.version) + ", q " +
                  std::to_string(q));
    if (feature_space.size() != training_set.size())
      throw Error("feature space and training set sizes disagree");
  }
};

inline SystemState initial_state(SoftmaxModel model, Dataset training_set,
                                 const LabelerConfig& labeler, std::size_t capacity) {
  if (capacity == 0) throw ConfigError("pending-set capacity must be positive");
  SystemState s;
  s.q = model.version;
  s.feature_space = FeatureSpace::from_dataset(training_set, s.q);
  s.anchors = build_anchors(s.feature_space, labeler);
  s.model = std::move(model);
  s.training_set = std::move(training_set);
  s.pending.capacity = capacity;
  return s;
}

// Adds a pseudo-labelled acquisition to S. Returns true once S is full.
inline bool collect(SystemState& state, const AcquiredItem& item, const PseudoLabel& label) {
  PendingItem p{item.example, normalize(item.example.features), item.confidence, label.confidence,
                item.model_version};
  if (label.label >= state.model.num_classes())
    throw DataError(DataError::Kind::unknown_class, "pseudo-label out of range");
  p.example.pseudo_label = label.label;
  state.pending.items.push_back(std::move(p));
  return state.pending.ready();
}

// S', exactly Q examples per class: all pending items of the class plus
// rehearsal draws from T_q. Draws are without replacement unless the class
// has fewer than the needed examples in T_q.
inline Dataset balance(const PendingSet& pending, const Dataset& training_set, const BalanceConfig& cfg) {
  const std::size_t n_classes = training_set.num_classes();
  const auto s_counts = pending.class_counts(n_classes);
  for (ClassIndex n = 0; n < n_classes; ++n)
    if (cfg.per_class <= s_counts[n])
      throw ConfigError("Q = " + std::to_string(cfg.per_class) + " must exceed the " +
                        std::to_string(s_counts[n]) + " pending items of class '" +
                        training_set.classes.name(n) + "'");

  std::vector<std::vector<std::size_t>> pools(n_classes);
  for (std::size_t i = 0; i < training_set.size(); ++i)
    if (auto l = training_set.examples[i].training_label()) pools.at(*l).push_back(i);
  for (ClassIndex n = 0; n < n_classes; ++n)
    if (pools[n].empty())
      throw DataError(DataError::Kind::empty,
                      "class '" + training_set.classes.name(n) + "' has no examples to rehearse");

  Dataset out = training_set.empty_like();
  out.examples.reserve(n_classes * cfg.per_class);
  Rng rng(derive_seed(cfg.seed, "balance"));
  for (ClassIndex n = 0; n < n_classes; ++n) {
    for (const auto& it : pending.items)
      if (*it.example.pseudo_label == n) out.examples.push_back(it.example);
    const std::size_t need = cfg.per_class - s_counts[n];
    auto& pool = pools[n];
    if (pool.size() >= need) {
      // Partial Fisher-Yates: the first `need` slots become a uniform sample.
      for (std::size_t i = 0; i < need; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
        out.examples.push_back(training_set.examples[pool[i]]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t i = 0; i < need; ++i) out.examples.push_back(training_set.examples[pool[pick(rng)]]);
    }
  }
  return out;
}

// Trains a copy of `model` on the balanced set; the result is version + 1.
inline TrainResult fine_tune(const SoftmaxModel& model, const Dataset& balanced, const TrainConfig& cfg) {
  auto result = train(model, balanced, cfg);
  result.model.version = model.version + 1;
  return result;
}

// T_{q+1} = T_q + S, F_{q+1} = F_q + f'(S), anchors rebuilt, S emptied.
inline void commit(SystemState& state, SoftmaxModel new_model, const LabelerConfig& labeler) {
  if (new_model.version != state.q + 1)
    throw ConfigError("commit expects model version " + std::to_string(state.q + 1) + ", got " +
                      std::to_string(new_model.version));
  std::unordered_set<std::string> ids;
  for (const auto& ex : state.training_set.examples) ids.insert(ex.id);

  std::vector<SpaceEntry> added;
  added.reserve(state.pending.size());
  for (auto& it : state.pending.items) {
    Example ex = std::move(it.example);
    // An input seen twice keeps both copies; the later one gets a suffixed id.
    if (ids.contains(ex.id)) {
      std::size_t k = 1;
      while (ids.contains(ex.id + "~" + std::to_string(k))) ++k;
      ex.id += "~" + std::to_string(k);
    }
    ids.insert(ex.id);
    added.push_back({std::move(it.normalized), *ex.pseudo_label});
    state.training_set.examples.push_back(std::move(ex));
  }
  state.pending.items.clear();

  state.feature_space = extend(std::move(state.feature_space), added);
  state.feature_space.version = state.q + 1;
  state.anchors = build_anchors(state.feature_space, labeler);
  state.model = std::move(new_model);
  state.q += 1;
}

enum class LabelSource {
  feature_space,  // soft voting over anchors
  oracle,         // the example's true label (harness ablations)
};

struct IncrementalConfig {
  AcquisitionConfig acquisition;
  LabelerConfig labeler;
  BalanceConfig balance;
  TrainConfig train;
  LabelSource label_source = LabelSource::feature_space;
};

struct UpdateRecord {
  std::size_t q = 0;  // version of the committed model
  std::vector<PendingItem> items;
  std::vector<std::size_t> pending_class_counts;
  std::size_t rehearsal_draws = 0;
  TrainTrace train_trace;
};

struct IncrementalTrace {
  std::size_t processed = 0;
  std::size_t acquired = 0;
  std::size_t discarded = 0;
  std::vector<UpdateRecord> updates;
};

// Called after every commit with the new state.
using UpdateObserver = std::function<void(const SystemState&, const UpdateRecord&)>;

namespace detail {

inline PseudoLabel label_item(const SystemState& state, const Example& ex, const IncrementalConfig& cfg) {
  if (cfg.label_source == LabelSource::oracle) {
    if (!ex.true_label)
      throw DataError(DataError::Kind::missing_label, "oracle labelling needs a true label for '" + ex.id + "'");
    PseudoLabel l;
    l.label = *ex.true_label;
    l.confidence = 1.0;
    l.probs.assign(state.model.num_classes(), 0.0);
    l.probs[l.label] = 1.0;
    return l;
  }
  return pseudo_label(ex.features, state.anchors, cfg.labeler);
}

inline UpdateRecord perform_update(SystemState& state, const IncrementalConfig& cfg) {
  UpdateRecord rec;
  rec.q = state.q + 1;
  rec.items = state.pending.items;
  rec.pending_class_counts = state.pending.class_counts(state.model.num_classes());
  BalanceConfig bal = cfg.balance;
  bal.seed = derive_seed(cfg.balance.seed, "update/balance", {state.q});
  const Dataset balanced = balance(state.pending, state.training_set, bal);
  rec.rehearsal_draws = balanced.size() - state.pending.size();

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.train.seed, "update/fine-tune", {state.q});
  auto tuned = fine_tune(state.model, balanced, tc);
  rec.train_trace = std::move(tuned.trace);
  commit(state, std::move(tuned.model), cfg.labeler);
  return rec;
}

template <typename Item, typename Acquire>
IncrementalTrace run_loop(SystemState& state, std::span<const Item> stream, const IncrementalConfig& cfg,
                          const UpdateObserver& observer, Acquire&& acquire_fn) {
  cfg.acquisition.validate();
  cfg.labeler.validate();
  cfg.train.validate();
  IncrementalTrace trace;
  // The position advances before the observer runs, so a checkpoint taken
  // there resumes at the next input.
  while (state.stream_position < stream.size()) {
    const Item& raw = stream[state.stream_position++];
    ++trace.processed;
    std::optional<AcquiredItem> item = acquire_fn(raw);
    if (!item) {
      ++trace.discarded;
      continue;
    }
    ++trace.acquired;
    if (collect(state, *item, label_item(state, item->example, cfg))) {
      trace.updates.push_back(perform_update(state, cfg));
      if (observer) observer(state, trace.updates.back());
    }
  }
  return trace;
}

}  // namespace detail

// Online loop: each input is scored by the current model, acquired if its
// confidence is below the threshold, pseudo-labelled, and every full S
// triggers balance -> fine-tune -> commit. Resumes at state.stream_position.
inline IncrementalTrace run_incremental(SystemState& state, std::span<const Example> stream,
                                        const IncrementalConfig& cfg, const UpdateObserver& observer = {}) {
  if (stream.size() > 0 && stream.front().features.size() != state.model.dim)
    throw DimensionError(state.model.dim, stream.front().features.size());
  return detail::run_loop(state, stream, cfg, observer, [&](const Example& ex) {
    return acquire(forward(state.model, ex.features), ex, cfg.acquisition, state.model.version);
  });
}

// Loop over inputs that were already acquired (for example the uncertain
// split under M_0). They are not re-scored by later models.
inline IncrementalTrace run_incremental(SystemState& state, std::span<const AcquiredItem> stream,
                                        const IncrementalConfig& cfg, const UpdateObserver& observer = {}) {
  return detail::run_loop(state, stream, cfg, observer,
                          [](const AcquiredItem& it) { return std::optional<AcquiredItem>(it); });
}

}  // namespace increlearn
