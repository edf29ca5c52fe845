#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace increlearn;

namespace {

template <typename T, typename Write, typename Read>
T round_trip(const T& value, Write&& write, Read&& read) {
  std::stringstream buf;
  write(buf, value);
  const std::string first = buf.str();
  T back = read(buf);
  std::stringstream again;
  write(again, back);
  EXPECT_EQ(again.str(), first);
  return back;
}

}  // namespace

TEST(Snapshot, ModelIsBitExact) {
  Rng rng(1);
  auto m = testutil::random_model(5, 7, rng, 1e3);
  m.weights[0] = 1e-310;  // subnormal
  m.weights[1] = -0.0;
  m.version = 42;
  auto back = round_trip(m, [](std::ostream& o, const SoftmaxModel& x) { write_model(o, x); },
                         [](std::istream& i) { return read_model(i); });
  EXPECT_EQ(back, m);
  EXPECT_TRUE(std::signbit(back.weights[1]));
}

TEST(Snapshot, FeatureSpaceAndAnchors) {
  Rng rng(2);
  auto data = testutil::blobs({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 20, 0.3, rng);
  auto space = FeatureSpace::from_dataset(data, 3);
  auto back = round_trip(space, [](std::ostream& o, const FeatureSpace& s) { write_feature_space(o, s); },
                         [](std::istream& i) { return read_feature_space(i); });
  EXPECT_EQ(back, space);

  LabelerConfig lc;
  lc.anchors_per_class = 4;
  auto anchors = build_anchors(space, lc);
  auto a = round_trip(anchors, [](std::ostream& o, const AnchorSet& x) { write_anchors(o, x, 3); },
                      [](std::istream& i) { return read_anchors(i); });
  EXPECT_EQ(a.per_class, anchors.per_class);
  EXPECT_EQ(a.anchors_per_class, anchors.anchors_per_class);
}

TEST(Snapshot, TrainingAndPendingSets) {
  Rng rng(3);
  auto data = testutil::blobs({{1, 0}, {0, 1}}, 5, 0.3, rng);
  data.examples[0].pseudo_label = 1;
  data.examples[1].true_label.reset();
  data.examples[1].pseudo_label = 0;
  auto back = round_trip(data, [](std::ostream& o, const Dataset& d) { write_training_set(o, d); },
                         [](std::istream& i) { return read_training_set(i); });
  EXPECT_EQ(back, data);

  PendingSet p;
  p.capacity = 7;
  PendingItem it{data.examples[0], normalize(data.examples[0].features), 0.3, 0.77, 2};
  p.items = {it, it};
  auto pb = round_trip(p, [&](std::ostream& o, const PendingSet& s) { write_pending(o, s, data.classes, 2); },
                       [&](std::istream& i) { return read_pending(i, data.classes); });
  EXPECT_EQ(pb, p);
}

TEST(Snapshot, CheckpointRoundTrip) {
  Rng rng(4);
  auto data = testutil::blobs({{1, 0}, {0, 1}}, 10, 0.3, rng);
  auto s = initial_state(testutil::random_model(2, 2, rng), data, LabelerConfig{}, 3);
  s.stream_position = 11;
  auto dir = testutil::temp_dir("checkpoint");
  save_checkpoint(dir, s);
  auto back = load_checkpoint(dir);
  EXPECT_EQ(back.model, s.model);
  EXPECT_EQ(back.training_set, s.training_set);
  EXPECT_EQ(back.feature_space, s.feature_space);
  EXPECT_EQ(back.anchors.per_class, s.anchors.per_class);
  EXPECT_EQ(back.pending, s.pending);
  EXPECT_EQ(back.stream_position, 11u);
}

TEST(Snapshot, CorruptInputIsRejected) {
  std::istringstream wrong("increlearn-features v1, N=2, D=2\n");
  EXPECT_THROW(read_model(wrong), DataError);
  std::istringstream truncated("increlearn-model v1\n");
  EXPECT_THROW(read_model(truncated), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/increlearn-ckpt"), DataError);
}

TEST(Config, ParseAndEchoRoundTrip) {
  std::istringstream in(
      "# fixture\nseed = 9\nsynth.dim = 16   # inline comment\nlabeler.gamma = 2.5\n"
      "train.learning_rate = 0.001\nincremental.per_class = 26\n");
  auto kv = KeyValueConfig::parse(in);
  auto cfg = read_protocol_config(kv);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.synth.dim, 16u);
  EXPECT_EQ(cfg.labeler.gamma, 2.5);
  EXPECT_EQ(cfg.per_class, 26u);
  EXPECT_EQ(cfg.fine_tune.learning_rate, 0.001);  // fine-tune inherits base training settings
  EXPECT_TRUE(kv.unused_keys().empty());

  std::ostringstream first;
  to_key_values(cfg).write(first);
  std::istringstream echo(first.str());
  auto again = read_protocol_config(KeyValueConfig::parse(echo));
  std::ostringstream second;
  to_key_values(again).write(second);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(again.synth.seed, cfg.synth.seed);
}

TEST(Config, ReportsBadValuesAndUnusedKeys) {
  std::istringstream bad("synth.dim = many\n");
  EXPECT_THROW(read_protocol_config(KeyValueConfig::parse(bad)), ConfigError);
  std::istringstream no_eq("just words\n");
  EXPECT_THROW(KeyValueConfig::parse(no_eq), ConfigError);
  std::istringstream out_of_range("acquisition.threshold = 1.5\n");
  EXPECT_THROW(read_protocol_config(KeyValueConfig::parse(out_of_range)), ConfigError);
  std::istringstream typo("labeler.gama = 2\n");
  auto kv = KeyValueConfig::parse(typo);
  read_protocol_config(kv);
  EXPECT_EQ(kv.unused_keys(), std::vector<std::string>{"labeler.gama"});
}
