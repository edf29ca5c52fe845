#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "increlearn/error.hpp"
#include "increlearn/kmeans.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

// Desk-scale stand-in for CNN embeddings of a few object classes.
//
// Every class owns `main_clusters` Gaussian modes on a sphere of radius
// `center_norm`, spaced `mode_angle` degrees apart along a great circle in a
// random plane of its own. Train and validation both sample the modes. Validation additionally holds "novel instances": per class,
// `novel_clusters` Gaussian sub-clusters that never appear in training. Novel
// sub-cluster j of class n sits at
//
//   (1 - novel_offset) * h + novel_offset * mu_{n, j mod main_clusters}
//                                           + novel_signature * u_{n, j}
//
// where h is the mean of the modes of a host class m != n and u_{n,j} a
// random unit direction. A linear head extends class m over the hull of its
// modes, so for novel_offset below 1/2 it favours m. With widely spread modes
// the hull interior is far from every mode of m after normalisation, so the
// anchors of n win.
struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t dim = 32;
  std::size_t main_clusters = 2;
  std::size_t main_cluster_size = 625;  // train + validation points per mode
  double main_std = 0.375;
  double center_norm = 12.5;
  double mode_angle = 120.0;
  std::size_t novel_clusters = 2;
  std::size_t novel_cluster_size = 60;
  double novel_std = 0.875;
  double novel_offset = 0.4;
  double novel_signature = 0.0;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
    if (dim == 0) throw ConfigError("synth: dim must be positive");
    if (main_clusters == 0 || main_cluster_size == 0)
      throw ConfigError("synth: every class needs at least one non-empty main cluster");
    if (!(main_std >= 0.0) || !(novel_std >= 0.0)) throw ConfigError("synth: std must be >= 0");
    if (!(center_norm > 0.0)) throw ConfigError("synth: center_norm must be positive");
    if (!(mode_angle >= 0.0 && mode_angle <= 180.0)) throw ConfigError("synth: mode_angle must be in [0, 180]");
    if (dim < 2) throw ConfigError("synth: dim must be >= 2");
    if (novel_clusters > 0 && novel_cluster_size == 0)
      throw ConfigError("synth: novel_cluster_size must be positive");
    if (!(novel_offset >= 0.0 && novel_offset <= 1.0))
      throw ConfigError("synth: novel_offset must be in [0, 1]");
    if (!(novel_signature >= 0.0)) throw ConfigError("synth: novel_signature must be >= 0");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("synth: train_fraction must be in (0, 1)");
  }
};

// Where a generated point came from; kept for harness measurements only.
struct PointOrigin {
  ClassIndex label = 0;
  bool novel = false;
  std::size_t cluster = 0;
  ClassIndex host = 0;  // novel points: the class whose modes surround them
};

struct SyntheticData {
  Dataset train;
  Dataset validation;
  std::vector<PointOrigin> train_origin;
  std::vector<PointOrigin> validation_origin;
  // Fraction of novel validation points a nearest-class-centroid rule gets wrong.
  double novel_centroid_error = 0.0;
};

inline std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

namespace detail {

inline FeatureVector random_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  FeatureVector v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = z(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

inline FeatureVector sample_around(const FeatureVector& center, double std, Rng& rng) {
  FeatureVector x = center;
  if (std > 0.0) {
    std::normal_distribution<double> z(0.0, std);
    for (double& v : x) v += z(rng);
  }
  return x;
}

}  // namespace detail

inline SyntheticData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "synth"));
  const std::size_t n_classes = spec.num_classes;

  constexpr double kPi = 3.14159265358979323846;
  std::vector<std::vector<FeatureVector>> modes(n_classes);
  for (auto& class_modes : modes) {
    const auto a = detail::random_direction(spec.dim, rng);
    auto b = detail::random_direction(spec.dim, rng);
    double dot = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) dot += a[d] * b[d];
    double norm = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      b[d] -= dot * a[d];
      norm += b[d] * b[d];
    }
    norm = std::sqrt(norm);
    for (double& v : b) v /= norm;
    for (std::size_t k = 0; k < spec.main_clusters; ++k) {
      const double angle = static_cast<double>(k) * spec.mode_angle * kPi / 180.0;
      FeatureVector c(spec.dim);
      for (std::size_t d = 0; d < spec.dim; ++d)
        c[d] = spec.center_norm * (std::cos(angle) * a[d] + std::sin(angle) * b[d]);
      class_modes.push_back(std::move(c));
    }
  }

  SyntheticData out;
  ClassSet classes(default_class_names(n_classes));
  out.train = Dataset{classes, spec.dim, {}};
  out.validation = Dataset{classes, spec.dim, {}};

  const auto n_train =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(spec.main_cluster_size)));
  for (ClassIndex n = 0; n < n_classes; ++n)
    for (std::size_t k = 0; k < spec.main_clusters; ++k)
      for (std::size_t i = 0; i < spec.main_cluster_size; ++i) {
        Example ex{"m" + std::to_string(n) + "-" + std::to_string(k) + "-" + std::to_string(i),
                   detail::sample_around(modes[n][k], spec.main_std, rng), n, std::nullopt};
        const bool to_train = i < n_train;
        (to_train ? out.train : out.validation).examples.push_back(std::move(ex));
        (to_train ? out.train_origin : out.validation_origin).push_back({n, false, k, n});
      }

  for (ClassIndex n = 0; n < n_classes; ++n)
    for (std::size_t j = 0; j < spec.novel_clusters; ++j) {
      const ClassIndex host = (n + 1 + j % (n_classes - 1)) % n_classes;
      FeatureVector hull_mid(spec.dim, 0.0);
      for (const auto& m : modes[host])
        for (std::size_t d = 0; d < spec.dim; ++d)
          hull_mid[d] += m[d] / static_cast<double>(modes[host].size());
      const auto& own = modes[n][j % spec.main_clusters];
      const auto signature = detail::random_direction(spec.dim, rng);
      FeatureVector center(spec.dim);
      for (std::size_t d = 0; d < spec.dim; ++d)
        center[d] = (1.0 - spec.novel_offset) * hull_mid[d] + spec.novel_offset * own[d] +
                    spec.novel_signature * signature[d];
      for (std::size_t i = 0; i < spec.novel_cluster_size; ++i) {
        out.validation.examples.push_back(
            {"n" + std::to_string(n) + "-" + std::to_string(j) + "-" + std::to_string(i),
             detail::sample_around(center, spec.novel_std, rng), n, std::nullopt});
        out.validation_origin.push_back({n, true, j, host});
      }
    }

  if (spec.novel_clusters > 0) {
    std::vector<FeatureVector> centroids(n_classes, FeatureVector(spec.dim, 0.0));
    std::vector<std::size_t> counts(n_classes, 0);
    for (const auto& ex : out.train.examples) {
      ++counts[*ex.true_label];
      for (std::size_t d = 0; d < spec.dim; ++d) centroids[*ex.true_label][d] += ex.features[d];
    }
    for (ClassIndex n = 0; n < n_classes; ++n)
      for (double& v : centroids[n]) v /= static_cast<double>(counts[n]);

    std::size_t novel = 0, wrong = 0;
    for (std::size_t i = 0; i < out.validation.size(); ++i) {
      if (!out.validation_origin[i].novel) continue;
      ++novel;
      const auto& x = out.validation.examples[i].features;
      ClassIndex best = 0;
      for (ClassIndex n = 1; n < n_classes; ++n)
        if (squared_distance(x, centroids[n]) < squared_distance(x, centroids[best])) best = n;
      if (best != out.validation_origin[i].label) ++wrong;
    }
    out.novel_centroid_error = static_cast<double>(wrong) / static_cast<double>(novel);
    if (wrong == 0)
      throw ConfigError(
          "synth: novel sub-clusters are not confusable with other classes "
          "(nearest-centroid rule classifies all of them correctly); lower novel_offset");
  }
  return out;
}

}  // namespace increlearn
