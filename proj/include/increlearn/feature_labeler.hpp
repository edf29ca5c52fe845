#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "increlearn/error.hpp"
#include "increlearn/kmeans.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

inline constexpr double kUnitNormTolerance = 1e-9;

inline double l2_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// L2-normalised copy of x. A zero (or non-finite) vector has no direction and
// cannot be placed in the feature space.
inline FeatureVector normalize(std::span<const double> x) {
  const double norm = l2_norm(x);
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw DataError(DataError::Kind::non_finite_value, "cannot normalise a zero or non-finite vector");
  FeatureVector out(x.begin(), x.end());
  for (double& v : out) v /= norm;
  return out;
}

inline bool is_unit(std::span<const double> x) {
  return std::abs(l2_norm(x) - 1.0) <= kUnitNormTolerance;
}

struct SpaceEntry {
  FeatureVector vec;  // unit norm
  ClassIndex label = 0;

  bool operator==(const SpaceEntry&) const = default;
};

// The normalised feature vectors of the training set with their labels.
struct FeatureSpace {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::size_t version = 0;
  std::vector<SpaceEntry> entries;

  std::size_t size() const { return entries.size(); }

  static FeatureSpace from_dataset(const Dataset& data, std::size_t version = 0) {
    FeatureSpace space{data.num_classes(), data.dim, version, {}};
    space.entries.reserve(data.size());
    for (const auto& ex : data.examples) {
      auto label = ex.training_label();
      if (!label)
        throw DataError(DataError::Kind::missing_label, "example '" + ex.id + "' has no label");
      space.entries.push_back({normalize(ex.features), *label});
    }
    return space;
  }

  bool operator==(const FeatureSpace&) const = default;
};

// Appends already-normalised vectors. The caller bumps the version on commit.
inline FeatureSpace extend(FeatureSpace space, std::span<const SpaceEntry> items) {
  for (const auto& item : items) {
    if (item.vec.size() != space.dim) throw DimensionError(space.dim, item.vec.size());
    if (!is_unit(item.vec)) throw DataError(DataError::Kind::malformed_row, "vector is not unit-norm");
    if (item.label >= space.num_classes)
      throw DataError(DataError::Kind::unknown_class, "label out of range");
  }
  space.entries.insert(space.entries.end(), items.begin(), items.end());
  return space;
}

struct LabelerConfig {
  std::size_t anchors_per_class = 10;  // M
  double gamma = 1.5;                  // soft-voting sharpness
  std::uint64_t seed = 0;
  std::size_t kmeans_restarts = 5;

  void validate() const {
    if (anchors_per_class == 0) throw ConfigError("anchors_per_class must be >= 1");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  }
};

struct AnchorSet {
  // per_class[n] holds the anchors of class n; may be empty.
  std::vector<std::vector<FeatureVector>> per_class;
  std::size_t anchors_per_class = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::size_t num_classes() const { return per_class.size(); }
  std::size_t non_empty_classes() const {
    return static_cast<std::size_t>(std::count_if(per_class.begin(), per_class.end(),
                                                  [](const auto& a) { return !a.empty(); }));
  }
};

// Anchors of one class: k-means centroids of its vectors, or every vector when
// the class has no more than M of them.
inline std::vector<FeatureVector> class_anchors(std::span<const FeatureVector> vectors,
                                                std::size_t m, std::uint64_t class_seed,
                                                std::size_t restarts) {
  if (vectors.size() <= m) return {vectors.begin(), vectors.end()};
  KMeansConfig km;
  km.k = m;
  km.seed = class_seed;
  km.restarts = restarts;
  return kmeans(vectors, km).centroids;
}

// Per-class seeds depend only on (cfg.seed, class index), so classes whose
// entries did not change keep identical anchors across rebuilds.
inline AnchorSet build_anchors(const FeatureSpace& space, const LabelerConfig& cfg) {
  cfg.validate();
  if (space.entries.empty()) throw DataError(DataError::Kind::empty, "feature space is empty");
  std::vector<std::vector<FeatureVector>> by_class(space.num_classes);
  for (const auto& e : space.entries) by_class.at(e.label).push_back(e.vec);

  AnchorSet set;
  set.anchors_per_class = cfg.anchors_per_class;
  set.seed = cfg.seed;
  set.per_class.resize(space.num_classes);
  for (ClassIndex n = 0; n < space.num_classes; ++n) {
    if (by_class[n].empty()) {
      set.warnings.push_back("class " + std::to_string(n) + " has no feature vectors");
      continue;
    }
    set.per_class[n] = class_anchors(by_class[n], cfg.anchors_per_class,
                                     derive_seed(cfg.seed, "anchors/class", {n}), cfg.kmeans_restarts);
  }
  return set;
}

// Soft voting over anchors: class n gets sum_m exp(-gamma |f - a_m^n|^2),
// normalised over all classes. f is expected to be unit-norm. Exponents are
// shifted by the smallest squared distance, which cancels in the ratio.
inline std::vector<double> soft_vote(std::span<const double> f_norm, const AnchorSet& anchors,
                                     double gamma) {
  if (anchors.non_empty_classes() == 0) throw ConfigError("soft voting needs at least one anchor");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");

  std::vector<std::vector<double>> d2(anchors.num_classes());
  double d2_min = std::numeric_limits<double>::infinity();
  for (ClassIndex n = 0; n < anchors.num_classes(); ++n) {
    for (const auto& a : anchors.per_class[n]) {
      if (a.size() != f_norm.size()) throw DimensionError(a.size(), f_norm.size());
      d2[n].push_back(squared_distance(f_norm, a));
      d2_min = std::min(d2_min, d2[n].back());
    }
  }

  std::vector<double> p(anchors.num_classes(), 0.0);
  double total = 0.0;
  for (ClassIndex n = 0; n < p.size(); ++n) {
    for (double d : d2[n]) p[n] += std::exp(-gamma * (d - d2_min));
    total += p[n];
  }
  for (double& v : p) v /= total;
  return p;
}

struct PseudoLabel {
  ClassIndex label = 0;
  double confidence = 0.0;
  std::vector<double> probs;
};

inline PseudoLabel pseudo_label(std::span<const double> x, const AnchorSet& anchors,
                                const LabelerConfig& cfg) {
  const auto f = normalize(x);
  PseudoLabel out;
  out.probs = soft_vote(f, anchors, cfg.gamma);
  out.label = argmax(out.probs);
  out.confidence = out.probs[out.label];
  return out;
}

}  // namespace increlearn
