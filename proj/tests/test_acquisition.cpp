#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace increlearn;

namespace {

Prediction with_confidence(double c) {
  Prediction p;
  p.probs = {c, 1.0 - c};
  p.confidence = c;
  return p;
}

const Example kItem{"x", {1.0}, ClassIndex{0}, std::nullopt};

}  // namespace

TEST(Acquire, StrictlyBelowThresholdIsSelected) {
  AcquisitionConfig cfg{0.9};
  auto got = acquire(with_confidence(0.85), kItem, cfg, 3);
  ASSERT_TRUE(got);
  EXPECT_DOUBLE_EQ(got->confidence, 0.85);
  EXPECT_EQ(got->model_version, 3u);
  EXPECT_EQ(got->example, kItem);
}

TEST(Acquire, BoundaryIsDiscarded) { EXPECT_FALSE(acquire(with_confidence(0.9), kItem, AcquisitionConfig{0.9})); }

TEST(Acquire, ThresholdOneSelectsAnythingBelowOne) {
  EXPECT_TRUE(acquire(with_confidence(0.999999), kItem, AcquisitionConfig{1.0}));
  EXPECT_FALSE(acquire(with_confidence(1.0), kItem, AcquisitionConfig{1.0}));
}

TEST(AcquisitionConfig, RejectsOutOfRange) {
  EXPECT_THROW(AcquisitionConfig{0.0}.validate(), ConfigError);
  EXPECT_THROW(AcquisitionConfig{1.5}.validate(), ConfigError);
  EXPECT_NO_THROW(AcquisitionConfig{1.0}.validate());
}

TEST(SplitByConfidence, UniformModelMakesEverythingUncertain) {
  Rng rng(1);
  auto data = testutil::blobs({{0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}}, 5, 1.0, rng);
  auto s = split_by_confidence(data, SoftmaxModel(data.classes, 2), AcquisitionConfig{0.9});
  EXPECT_TRUE(s.kept.empty());
  EXPECT_EQ(s.uncertain.size(), data.size());
}

TEST(SplitByConfidence, TinyThresholdKeepsEverything) {
  Rng rng(1);
  auto data = testutil::blobs({{0.0, 1.0}, {1.0, 0.0}}, 5, 1.0, rng);
  auto s = split_by_confidence(data, testutil::random_model(2, 2, rng), AcquisitionConfig{1e-9});
  EXPECT_EQ(s.kept.size(), data.size());
  EXPECT_TRUE(s.uncertain.empty());
}

TEST(SplitByConfidence, DimensionMismatchThrows) {
  Rng rng(1);
  auto data = testutil::blobs({{0.0, 1.0}, {1.0, 0.0}}, 2, 1.0, rng);
  EXPECT_THROW(split_by_confidence(data, SoftmaxModel(data.classes, 3), AcquisitionConfig{}), DimensionError);
}

// Partition for every threshold; uncertain sets grow with t.
TEST(SplitByConfidence, PartitionAndMonotonicity) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto data = testutil::blobs({{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}}, 30, 0.8, rng);
    auto model = testutil::random_model(3, 3, rng, 2.0);
    std::set<std::string> previous;
    for (double t : {0.2, 0.4, 0.6, 0.8, 0.9, 0.99, 1.0}) {
      auto s = split_by_confidence(data, model, AcquisitionConfig{t});
      EXPECT_EQ(s.kept.size() + s.uncertain.size(), data.size());
      std::set<std::string> kept, unc;
      for (const auto& e : s.kept.examples) kept.insert(e.id);
      for (const auto& e : s.uncertain.examples) unc.insert(e.id);
      for (const auto& id : kept) EXPECT_FALSE(unc.contains(id));
      EXPECT_EQ(kept.size() + unc.size(), data.size());
      for (const auto& id : previous) EXPECT_TRUE(unc.contains(id));
      previous = unc;
    }
  }
}

TEST(SplitByConfidence, SizesAddUp) {
  // |V_k| + |V_u| = |V|, e.g. 3054 + 787 = 3841.
  EXPECT_EQ(3054 + 787, 3841);
  Rng rng(2);
  auto data = testutil::blobs({{0.0, 3.0}, {3.0, 0.0}}, 50, 1.5, rng);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  auto m = train(SoftmaxModel(data.classes, 2), data, tc).model;
  auto s = split_by_confidence(data, m, AcquisitionConfig{0.9});
  EXPECT_EQ(s.kept.size() + s.uncertain.size(), data.size());
  EXPECT_GT(s.kept.size(), 0u);
  EXPECT_GT(s.uncertain.size(), 0u);
}
