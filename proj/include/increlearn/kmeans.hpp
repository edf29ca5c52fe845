#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "increlearn/error.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct KMeansConfig {
  std::size_t k = 1;
  std::size_t max_iterations = 100;
  // Converged once no centroid moves farther than this (Euclidean).
  double tolerance = 1e-6;
  // Independent k-means++ initialisations; the lowest final SSE wins.
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<FeatureVector> centroids;
  std::vector<std::size_t> assignment;
  double sse = 0.0;
  // SSE after every Lloyd update of the winning restart.
  std::vector<double> sse_history;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x,
                                    const std::vector<FeatureVector>& centroids, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline std::vector<FeatureVector> kmeanspp_seed(std::span<const FeatureVector> points,
                                                std::size_t k, Rng& rng) {
  std::vector<FeatureVector> centroids;
  centroids.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  centroids.push_back(points[pick(rng)]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centroids[0]);

  while (centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      chosen = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (d2[i] <= 0.0) continue;
        if (r < d2[i]) {
          chosen = i;
          break;
        }
        r -= d2[i];
      }
      // Rounding can run r past the end; fall back to the last candidate with mass.
      while (d2[chosen] <= 0.0 && chosen > 0) --chosen;
    } else {
      chosen = pick(rng);
    }
    centroids.push_back(points[chosen]);
    for (std::size_t i = 0; i < points.size(); ++i)
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

inline KMeansResult lloyd(std::span<const FeatureVector> points, std::vector<FeatureVector> centroids,
                          const KMeansConfig& cfg) {
  const std::size_t dim = points.front().size();
  const std::size_t k = centroids.size();
  KMeansResult r;
  r.assignment.assign(points.size(), 0);
  std::vector<double> dist(points.size(), 0.0);

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t i = 0; i < points.size(); ++i)
      r.assignment[i] = nearest_centroid(points[i], centroids, &dist[i]);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : r.assignment) ++counts[a];
    // Empty cluster: take over the point farthest from its centroid, among
    // clusters that can spare one.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = points.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i)
        if (counts[r.assignment[i]] > 1 && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      if (far == points.size()) break;
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      dist[far] = 0.0;
      counts[c] = 1;
    }

    std::vector<FeatureVector> next(k, FeatureVector(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d) next[r.assignment[i]][d] += points[i][d];
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        next[c] = centroids[c];
        continue;
      }
      for (double& v : next[c]) v /= static_cast<double>(counts[c]);
      max_shift = std::max(max_shift, std::sqrt(squared_distance(next[c], centroids[c])));
    }
    centroids = std::move(next);

    double sse = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      sse += squared_distance(points[i], centroids[r.assignment[i]]);
    r.sse_history.push_back(sse);
    r.iterations = it + 1;
    if (max_shift < cfg.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.sse = r.sse_history.empty() ? 0.0 : r.sse_history.back();
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding and restarts. Deterministic for a
// given seed. Requires 1 <= k <= points.size() and equal-length points.
inline KMeansResult kmeans(std::span<const FeatureVector> points, const KMeansConfig& cfg) {
  if (points.empty()) throw ConfigError("k-means on an empty point set");
  if (cfg.k == 0 || cfg.k > points.size())
    throw ConfigError("k-means: k must be in [1, number of points]");
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw DimensionError(dim, p.size());

  KMeansResult best;
  bool have_best = false;
  const std::size_t restarts = std::max<std::size_t>(cfg.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, "kmeans/restart", {r}));
    auto result = detail::lloyd(points, detail::kmeanspp_seed(points, cfg.k, rng), cfg);
    if (!have_best || result.sse < best.sse) {
      best = std::move(result);
      have_best = true;
    }
  }
  return best;
}

}  // namespace increlearn
