#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "increlearn/acquisition.hpp"
#include "increlearn/error.hpp"
#include "increlearn/feature_labeler.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/synthetic.hpp"
#include "increlearn/text_format.hpp"

namespace increlearn {

// Flat `key = value` configuration. '#' starts a comment. Keys are kept in
// sorted order so that writing a config back out is deterministic.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto t = text::trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      auto key = std::string(text::trim(t.substr(0, eq)));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = std::string(text::trim(t.substr(eq + 1)));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    return parse(in);
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  }

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> get(const std::string& key) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  template <typename Int>
  Int get_int(const std::string& key, Int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    auto parsed = text::parse_int<Int>(*v);
    if (!parsed) throw ConfigError("config key '" + key + "': expected an integer, got '" + *v + "'");
    return *parsed;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    auto parsed = text::parse_double(*v);
    if (!parsed) throw ConfigError("config key '" + key + "': expected a number, got '" + *v + "'");
    return *parsed;
  }

  template <typename Int>
  std::vector<Int> get_int_list(const std::string& key, std::vector<Int> fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<Int> out;
    for (auto f : text::split(*v, ',')) {
      auto parsed = text::parse_int<Int>(text::trim(f));
      if (!parsed) throw ConfigError("config key '" + key + "': bad list entry '" + std::string(f) + "'");
      out.push_back(*parsed);
    }
    return out;
  }

  // Keys present in the file that no get() call asked for (likely typos).
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.contains(k)) out.push_back(k);
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

// Everything one run of the experiment protocol needs. Component seeds are
// not configured individually: they are derived from `seed`.
struct ProtocolConfig {
  SynthSpec synth;
  std::string train_path;       // external feature files replace the generator
  std::string validation_path;
  TrainConfig base_train;
  TrainConfig fine_tune;
  AcquisitionConfig acquisition;
  LabelerConfig labeler;
  double learn_fraction = 472.0 / 787.0;  // share of V_u streamed for learning
  std::size_t capacity = 5;               // |S|
  std::size_t per_class = 100;            // Q
  std::uint64_t seed = 1;

  void validate() const {
    synth.validate();
    base_train.validate();
    fine_tune.validate();
    acquisition.validate();
    labeler.validate();
    if (!(learn_fraction > 0.0 && learn_fraction < 1.0)) throw ConfigError("learn_fraction must be in (0, 1)");
    if (capacity == 0) throw ConfigError("capacity must be positive");
    if (per_class == 0) throw ConfigError("per_class must be positive");
  }
};

namespace detail {

inline TrainConfig read_train_config(const KeyValueConfig& kv, const std::string& prefix, TrainConfig t) {
  t.batch_size = kv.get_int<std::size_t>(prefix + "batch_size", t.batch_size);
  t.learning_rate = kv.get_double(prefix + "learning_rate", t.learning_rate);
  t.momentum = kv.get_double(prefix + "momentum", t.momentum);
  t.max_epochs = kv.get_int<std::size_t>(prefix + "max_epochs", t.max_epochs);
  t.early_stop_patience = kv.get_int<std::size_t>(prefix + "patience", t.early_stop_patience);
  t.val_fraction = kv.get_double(prefix + "val_fraction", t.val_fraction);
  return t;
}

inline void write_train_config(KeyValueConfig& kv, const std::string& prefix, const TrainConfig& t) {
  kv.set(prefix + "batch_size", std::to_string(t.batch_size));
  kv.set(prefix + "learning_rate", text::format_double(t.learning_rate));
  kv.set(prefix + "momentum", text::format_double(t.momentum));
  kv.set(prefix + "max_epochs", std::to_string(t.max_epochs));
  kv.set(prefix + "patience", std::to_string(t.early_stop_patience));
  kv.set(prefix + "val_fraction", text::format_double(t.val_fraction));
}

}  // namespace detail

inline ProtocolConfig read_protocol_config(const KeyValueConfig& kv) {
  ProtocolConfig c;
  c.seed = kv.get_int<std::uint64_t>("seed", c.seed);
  auto& s = c.synth;
  s.num_classes = kv.get_int<std::size_t>("synth.num_classes", s.num_classes);
  s.dim = kv.get_int<std::size_t>("synth.dim", s.dim);
  s.main_clusters = kv.get_int<std::size_t>("synth.main_clusters", s.main_clusters);
  s.main_cluster_size = kv.get_int<std::size_t>("synth.main_cluster_size", s.main_cluster_size);
  s.main_std = kv.get_double("synth.main_std", s.main_std);
  s.center_norm = kv.get_double("synth.center_norm", s.center_norm);
  s.mode_angle = kv.get_double("synth.mode_angle", s.mode_angle);
  s.novel_clusters = kv.get_int<std::size_t>("synth.novel_clusters", s.novel_clusters);
  s.novel_cluster_size = kv.get_int<std::size_t>("synth.novel_cluster_size", s.novel_cluster_size);
  s.novel_std = kv.get_double("synth.novel_std", s.novel_std);
  s.novel_offset = kv.get_double("synth.novel_offset", s.novel_offset);
  s.novel_signature = kv.get_double("synth.novel_signature", s.novel_signature);
  s.train_fraction = kv.get_double("synth.train_fraction", s.train_fraction);
  s.seed = derive_seed(c.seed, "synth");
  c.train_path = kv.get_or("data.train", "");
  c.validation_path = kv.get_or("data.validation", "");
  c.base_train = detail::read_train_config(kv, "train.", c.base_train);
  c.fine_tune = detail::read_train_config(kv, "finetune.", c.base_train);
  c.acquisition.threshold = kv.get_double("acquisition.threshold", c.acquisition.threshold);
  c.labeler.anchors_per_class = kv.get_int<std::size_t>("labeler.anchors_per_class", c.labeler.anchors_per_class);
  c.labeler.gamma = kv.get_double("labeler.gamma", c.labeler.gamma);
  c.labeler.kmeans_restarts = kv.get_int<std::size_t>("labeler.kmeans_restarts", c.labeler.kmeans_restarts);
  c.learn_fraction = kv.get_double("incremental.learn_fraction", c.learn_fraction);
  c.capacity = kv.get_int<std::size_t>("incremental.capacity", c.capacity);
  c.per_class = kv.get_int<std::size_t>("incremental.per_class", c.per_class);
  c.validate();
  return c;
}

// Fully resolved echo of a protocol config; parsing it back yields the same
// config.
inline KeyValueConfig to_key_values(const ProtocolConfig& c) {
  KeyValueConfig kv;
  kv.set("seed", std::to_string(c.seed));
  const auto& s = c.synth;
  kv.set("synth.num_classes", std::to_string(s.num_classes));
  kv.set("synth.dim", std::to_string(s.dim));
  kv.set("synth.main_clusters", std::to_string(s.main_clusters));
  kv.set("synth.main_cluster_size", std::to_string(s.main_cluster_size));
  kv.set("synth.main_std", text::format_double(s.main_std));
  kv.set("synth.center_norm", text::format_double(s.center_norm));
  kv.set("synth.mode_angle", text::format_double(s.mode_angle));
  kv.set("synth.novel_clusters", std::to_string(s.novel_clusters));
  kv.set("synth.novel_cluster_size", std::to_string(s.novel_cluster_size));
  kv.set("synth.novel_std", text::format_double(s.novel_std));
  kv.set("synth.novel_offset", text::format_double(s.novel_offset));
  kv.set("synth.novel_signature", text::format_double(s.novel_signature));
  kv.set("synth.train_fraction", text::format_double(s.train_fraction));
  if (!c.train_path.empty()) kv.set("data.train", c.train_path);
  if (!c.validation_path.empty()) kv.set("data.validation", c.validation_path);
  detail::write_train_config(kv, "train.", c.base_train);
  detail::write_train_config(kv, "finetune.", c.fine_tune);
  kv.set("acquisition.threshold", text::format_double(c.acquisition.threshold));
  kv.set("labeler.anchors_per_class", std::to_string(c.labeler.anchors_per_class));
  kv.set("labeler.gamma", text::format_double(c.labeler.gamma));
  kv.set("labeler.kmeans_restarts", std::to_string(c.labeler.kmeans_restarts));
  kv.set("incremental.learn_fraction", text::format_double(c.learn_fraction));
  kv.set("incremental.capacity", std::to_string(c.capacity));
  kv.set("incremental.per_class", std::to_string(c.per_class));
  return kv;
}

}  // namespace increlearn
