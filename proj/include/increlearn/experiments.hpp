#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "increlearn/acquisition.hpp"
#include "increlearn/config.hpp"
#include "increlearn/datasets.hpp"
#include "increlearn/feature_labeler.hpp"
#include "increlearn/incremental.hpp"
#include "increlearn/metrics.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/synthetic.hpp"

// The evaluation protocol: train M_0 on T_0, split the validation set by
// confidence into V_k / V_u, split V_u into V_learn / V_test, stream V_learn
// through the incremental loop and measure every model M_q on V_test and V_k.

namespace increlearn {

// Seeds of the protocol stages, all derived from the master seed.
struct ProtocolSeeds {
  std::uint64_t base_train;
  std::uint64_t labeler;
  std::uint64_t learn_split;

  static ProtocolSeeds from(std::uint64_t master) {
    return {derive_seed(master, "protocol/base-train"), derive_seed(master, "protocol/labeler"),
            derive_seed(master, "protocol/learn-split")};
  }
};

struct Fixture {
  Dataset train;       // T_0
  Dataset validation;  // V
  SoftmaxModel base_model;  // M_0
  TrainTrace base_trace;
  FeatureSpace space;  // F_0
  AnchorSet anchors;
  LabelerConfig labeler;
  Dataset known;      // V_k
  Dataset uncertain;  // V_u
  Dataset learn;      // V_learn
  Dataset test;       // V_test
};

inline LabelerConfig protocol_labeler(const ProtocolConfig& cfg) {
  LabelerConfig l = cfg.labeler;
  l.seed = ProtocolSeeds::from(cfg.seed).labeler;
  return l;
}

// Trains M_0 and builds F_0 and its anchors.
inline Fixture train_base(Dataset train, Dataset validation, const ProtocolConfig& cfg) {
  const auto seeds = ProtocolSeeds::from(cfg.seed);
  train.validate();
  validation.validate();
  if (!(train.classes == validation.classes) || train.dim != validation.dim)
    throw DataError(DataError::Kind::malformed_header, "train and validation sets disagree on classes or D");
  Fixture f;
  TrainConfig tc = cfg.base_train;
  tc.seed = seeds.base_train;
  auto trained = increlearn::train(SoftmaxModel(train.classes, train.dim), train, tc);
  f.base_model = std::move(trained.model);
  f.base_trace = std::move(trained.trace);
  f.labeler = protocol_labeler(cfg);
  f.space = FeatureSpace::from_dataset(train, 0);
  f.anchors = build_anchors(f.space, f.labeler);
  f.train = std::move(train);
  f.validation = std::move(validation);
  return f;
}

// Fills V_k / V_u / V_learn / V_test from the base model.
inline void split_validation(Fixture& f, const ProtocolConfig& cfg) {
  auto by_conf = split_by_confidence(f.validation, f.base_model, cfg.acquisition);
  f.known = std::move(by_conf.kept);
  f.uncertain = std::move(by_conf.uncertain);
  f.learn = f.uncertain.empty_like();
  f.test = f.uncertain.empty_like();
  if (f.uncertain.size() < 2) return;
  auto parts = split(f.uncertain, SplitSpec{{cfg.learn_fraction, 1.0 - cfg.learn_fraction},
                                            ProtocolSeeds::from(cfg.seed).learn_split});
  f.learn = std::move(parts[0]);
  f.test = std::move(parts[1]);
}

inline Fixture prepare_fixture(Dataset train, Dataset validation, const ProtocolConfig& cfg) {
  auto f = train_base(std::move(train), std::move(validation), cfg);
  split_validation(f, cfg);
  return f;
}

inline Fixture prepare_fixture(const ProtocolConfig& cfg) {
  cfg.validate();
  if (!cfg.train_path.empty())
    return prepare_fixture(load_features(cfg.train_path), load_features(cfg.validation_path), cfg);
  auto data = generate(cfg.synth);
  return prepare_fixture(std::move(data.train), std::move(data.validation), cfg);
}

// Softmax head versus soft voting on the known and uncertain splits.
struct LabelerComparison {
  ConfusionMatrix softmax_known;
  ConfusionMatrix labeler_known;
  ConfusionMatrix softmax_uncertain;
  ConfusionMatrix labeler_uncertain;
};

inline LabelerComparison compare_labeler(const Fixture& f) {
  return {evaluate(f.base_model, f.known), evaluate_labeler(f.anchors, f.labeler, f.known),
          evaluate(f.base_model, f.uncertain), evaluate_labeler(f.anchors, f.labeler, f.uncertain)};
}

// ---------------------------------------------------------------------------
// Single incremental run
// ---------------------------------------------------------------------------

struct TracePoint {
  std::size_t q = 0;
  double acc_test = 0.0;
  double acc_known = 0.0;
  std::size_t uncertain_test = 0;  // |P|
};

enum class LabelMode {
  pseudo,        // soft voting over the feature space
  oracle,        // ground truth
  noisy_oracle,  // ground truth with injected noise at a fixed rate
};

struct RunSettings {
  std::size_t capacity = 5;
  std::size_t per_class = 100;
  std::uint64_t seed = 0;
  LabelMode labels = LabelMode::pseudo;
  double noise_rate = 0.0;  // noisy_oracle only
};

struct RunTrace {
  RunSettings settings;
  std::vector<TracePoint> points;  // index 0 is M_0
  std::size_t committed = 0;       // items that entered T
  std::size_t mislabeled = 0;      // of those, label != ground truth
  ConfusionMatrix final_test;
  ConfusionMatrix final_known;

  double measured_noise() const {
    return committed == 0 ? 0.0 : static_cast<double>(mislabeled) / static_cast<double>(committed);
  }
};

inline TracePoint measure(const SoftmaxModel& model, const Fixture& f, double threshold) {
  return {model.version, evaluate(model, f.test).accuracy(), evaluate(model, f.known).accuracy(),
          count_uncertain(model, f.test, threshold)};
}

// Everything one incremental run needs before the loop starts.
struct RunSetup {
  std::vector<AcquiredItem> stream;  // V_learn, shuffled by the run seed
  SystemState state;                 // M_0, T_0, F_0 and an empty S
  IncrementalConfig config;
  std::unordered_map<std::string, ClassIndex> truth;  // ground truth of V_learn
};

inline RunSetup make_run(const Fixture& f, const ProtocolConfig& cfg, const RunSettings& run) {
  RunSetup setup;
  for (const auto& ex : f.learn.examples)
    if (ex.true_label) setup.truth.emplace(ex.id, *ex.true_label);

  Dataset stream_data = f.learn;
  if (run.labels == LabelMode::noisy_oracle)
    stream_data = inject_label_noise(stream_data, run.noise_rate, derive_seed(run.seed, "run/noise")).data;
  Rng rng(derive_seed(run.seed, "run/stream"));
  std::shuffle(stream_data.examples.begin(), stream_data.examples.end(), rng);

  setup.stream.reserve(stream_data.size());
  for (auto& ex : stream_data.examples) {
    const double conf = forward(f.base_model, ex.features).confidence;
    setup.stream.push_back({std::move(ex), conf, f.base_model.version});
  }

  auto& state = setup.state;
  state.model = f.base_model;
  state.training_set = f.train;
  state.feature_space = f.space;
  state.anchors = f.anchors;
  state.pending.capacity = run.capacity;
  state.q = f.base_model.version;

  auto& inc = setup.config;
  inc.acquisition = cfg.acquisition;
  inc.labeler = f.labeler;
  inc.balance = {run.per_class, derive_seed(run.seed, "run/balance")};
  inc.train = cfg.fine_tune;
  inc.train.seed = derive_seed(run.seed, "run/fine-tune");
  inc.label_source = run.labels == LabelMode::pseudo ? LabelSource::feature_space : LabelSource::oracle;
  return setup;
}

// Counts committed items whose label disagrees with the ground truth.
inline void tally_labels(RunTrace& trace, const RunSetup& setup, const UpdateRecord& rec) {
  for (const auto& it : rec.items) {
    ++trace.committed;
    auto found = setup.truth.find(it.example.id);
    if (found != setup.truth.end() && found->second != *it.example.pseudo_label) ++trace.mislabeled;
  }
}

// Streams V_learn (shuffled by the run seed) through the incremental loop.
// V_learn was acquired under M_0, so its items are not re-scored.
inline RunTrace run_incremental_protocol(const Fixture& f, const ProtocolConfig& cfg, const RunSettings& run) {
  RunTrace trace;
  trace.settings = run;
  auto setup = make_run(f, cfg, run);
  const double t = cfg.acquisition.threshold;
  trace.points.push_back(measure(setup.state.model, f, t));
  run_incremental(setup.state, std::span<const AcquiredItem>(setup.stream), setup.config,
                  [&](const SystemState& s, const UpdateRecord& rec) {
                    trace.points.push_back(measure(s.model, f, t));
                    tally_labels(trace, setup, rec);
                  });
  trace.final_test = evaluate(setup.state.model, f.test);
  trace.final_known = evaluate(setup.state.model, f.known);
  return trace;
}

// Q scaled from a reference setting of 100 rehearsal examples per class out of
// 15,366 / 4 training examples per class, to the mean class size of `train`.
inline std::size_t scaled_per_class(const Dataset& train, double reference_q = 100.0,
                                    double reference_class_size = 15366.0 / 4.0) {
  const double mean = static_cast<double>(train.size()) / static_cast<double>(train.num_classes());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(reference_q * mean / reference_class_size)));
}

// ---------------------------------------------------------------------------
// Sweeps and ablations
// ---------------------------------------------------------------------------

struct MeanPoint {
  std::size_t q = 0;
  double acc_test = 0.0;
  double acc_known = 0.0;
  double uncertain_test = 0.0;
};

// Pointwise mean over the runs that reach each index.
inline std::vector<MeanPoint> average_traces(const std::vector<RunTrace>& runs) {
  std::size_t length = 0;
  for (const auto& r : runs) length = std::max(length, r.points.size());
  std::vector<MeanPoint> mean(length);
  for (std::size_t i = 0; i < length; ++i) {
    std::size_t n = 0;
    mean[i].q = i;
    for (const auto& r : runs) {
      if (i >= r.points.size()) continue;
      ++n;
      mean[i].acc_test += r.points[i].acc_test;
      mean[i].acc_known += r.points[i].acc_known;
      mean[i].uncertain_test += static_cast<double>(r.points[i].uncertain_test);
    }
    mean[i].acc_test /= static_cast<double>(n);
    mean[i].acc_known /= static_cast<double>(n);
    mean[i].uncertain_test /= static_cast<double>(n);
  }
  return mean;
}

struct SweepConfig {
  std::vector<std::size_t> s_values{5};
  std::vector<std::size_t> q_values{100};
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const {
    if (s_values.empty() || q_values.empty()) throw ConfigError("sweep needs at least one |S| and one Q");
    for (auto s : s_values)
      if (s == 0) throw ConfigError("sweep |S| values must be positive");
    for (auto q : q_values)
      if (q == 0) throw ConfigError("sweep Q values must be positive");
    if (repeats == 0) throw ConfigError("sweep repeats must be >= 1");
  }
};

// Seed of repeat i in cell (s, q).
inline std::uint64_t run_seed(std::uint64_t base, std::size_t s, std::size_t q, std::size_t i) {
  return derive_seed(base, {s, q, i});
}

struct SweepCell {
  std::size_t capacity = 0;
  std::size_t per_class = 0;
  std::vector<RunTrace> runs;
  std::vector<MeanPoint> mean;

  double mean_noise() const {
    double s = 0.0;
    for (const auto& r : runs) s += r.measured_noise();
    return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
  }
};

struct ExperimentReport {
  std::string kind;  // "sweep" or "ablation"
  KeyValueConfig config;
  std::size_t train_size = 0, known_size = 0, uncertain_size = 0, learn_size = 0, test_size = 0;
  std::vector<SweepCell> cells;
};

namespace detail {

template <typename Job>
void run_jobs(std::size_t count, std::size_t threads, Job&& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += threads) job(i);
    });
  for (auto& t : pool) t.join();
}

inline ExperimentReport report_header(const Fixture& f, const ProtocolConfig& cfg, std::string kind) {
  ExperimentReport r;
  r.kind = std::move(kind);
  r.config = to_key_values(cfg);
  r.train_size = f.train.size();
  r.known_size = f.known.size();
  r.uncertain_size = f.uncertain.size();
  r.learn_size = f.learn.size();
  r.test_size = f.test.size();
  return r;
}

}  // namespace detail

// Every (|S|, Q) cell runs `repeats` independent incremental runs. Jobs are
// independent, so the result does not depend on the thread count.
inline ExperimentReport run_sweep(const Fixture& f, const ProtocolConfig& cfg, const SweepConfig& sweep) {
  sweep.validate();
  auto report = detail::report_header(f, cfg, "sweep");
  for (auto s : sweep.s_values)
    for (auto q : sweep.q_values) report.cells.push_back({s, q, std::vector<RunTrace>(sweep.repeats), {}});

  const std::size_t jobs = report.cells.size() * sweep.repeats;
  detail::run_jobs(jobs, sweep.threads, [&](std::size_t j) {
    auto& cell = report.cells[j / sweep.repeats];
    const std::size_t i = j % sweep.repeats;
    RunSettings rs{cell.capacity, cell.per_class, run_seed(sweep.seed, cell.capacity, cell.per_class, i)};
    cell.runs[i] = run_incremental_protocol(f, cfg, rs);
  });
  for (auto& cell : report.cells) cell.mean = average_traces(cell.runs);
  return report;
}

// Runs the same schedule twice with identical seeds: once with noisy labels
// (pseudo-labels, or ground truth corrupted at `noise_rate` when given) and
// once with clean ground truth. cells[0] is the noisy arm, cells[1] the clean one.
inline ExperimentReport noise_ablation(const Fixture& f, const ProtocolConfig& cfg, std::size_t capacity,
                                       std::size_t per_class, std::size_t repeats, std::uint64_t seed,
                                       std::optional<double> noise_rate = std::nullopt, std::size_t threads = 1) {
  if (repeats == 0) throw ConfigError("ablation repeats must be >= 1");
  auto report = detail::report_header(f, cfg, "ablation");
  report.cells.push_back({capacity, per_class, std::vector<RunTrace>(repeats), {}});
  report.cells.push_back({capacity, per_class, std::vector<RunTrace>(repeats), {}});
  detail::run_jobs(2 * repeats, threads, [&](std::size_t j) {
    const std::size_t arm = j / repeats, i = j % repeats;
    RunSettings rs{capacity, per_class, run_seed(seed, capacity, per_class, i)};
    if (arm == 0) {
      rs.labels = noise_rate ? LabelMode::noisy_oracle : LabelMode::pseudo;
      rs.noise_rate = noise_rate.value_or(0.0);
    } else {
      rs.labels = LabelMode::oracle;
    }
    report.cells[arm].runs[i] = run_incremental_protocol(f, cfg, rs);
  });
  for (auto& cell : report.cells) cell.mean = average_traces(cell.runs);
  return report;
}

}  // namespace increlearn
