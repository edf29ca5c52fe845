#include <algorithm>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace increlearn;

namespace {

ProtocolConfig small_protocol() {
  ProtocolConfig cfg;
  cfg.synth.main_cluster_size = 150;
  cfg.synth.novel_cluster_size = 30;
  cfg.per_class = 10;
  cfg.fine_tune.max_epochs = 20;
  return cfg;
}

const Fixture& small_fixture() {
  static const Fixture f = prepare_fixture(small_protocol());
  return f;
}

bool same_points(const RunTrace& a, const RunTrace& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto &x = a.points[i], &y = b.points[i];
    if (x.q != y.q || x.acc_test != y.acc_test || x.acc_known != y.acc_known || x.uncertain_test != y.uncertain_test)
      return false;
  }
  return true;
}

}  // namespace

TEST(Confusion, CountsAndAccuracy) {
  ConfusionMatrix cm(3);
  EXPECT_EQ(cm.accuracy(), 0.0);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(2, 2);
  cm.add(1, 2);
  EXPECT_EQ(cm.total(), 4u);
  EXPECT_EQ(cm.correct(), 2u);
  EXPECT_EQ(cm.row_total(0), 2u);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 0.5);
  EXPECT_THROW(cm.add(3, 0), std::out_of_range);
}

TEST(Evaluate, PerfectAndPermutationInvariant) {
  Rng rng(1);
  auto d = testutil::blobs({{10, 0}, {0, 10}}, 30, 0.5, rng);
  SoftmaxModel m(d.classes, 2);
  m.weights = {1, 0, 0, 1};
  auto cm = evaluate(m, d);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 1.0);
  EXPECT_EQ(cm.at(0, 0), 30u);

  auto noisy = testutil::random_model(2, 2, rng);
  auto shuffled = d;
  std::shuffle(shuffled.examples.begin(), shuffled.examples.end(), rng);
  EXPECT_EQ(evaluate(noisy, d), evaluate(noisy, shuffled));

  d.examples[0].true_label.reset();
  EXPECT_THROW(evaluate(m, d), DataError);
}

TEST(CountUncertain, Extremes) {
  Rng rng(1);
  auto d = testutil::blobs({{1, 0}, {0, 1}, {1, 1}}, 10, 0.5, rng);
  auto m = testutil::random_model(3, 2, rng);
  EXPECT_EQ(count_uncertain(m, d, 0.0), 0u);
  EXPECT_EQ(count_uncertain(SoftmaxModel(d.classes, 2), d, 0.9), d.size());
  EXPECT_EQ(count_uncertain(m, d, 0.9), split_by_confidence(d, m, AcquisitionConfig{0.9}).uncertain.size());
}

TEST(AverageTraces, SingleRunIsItsOwnMean) {
  RunTrace r;
  r.points = {{0, 0.25, 0.9, 10}, {1, 0.5, 0.8, 4}};
  auto mean = average_traces({r});
  ASSERT_EQ(mean.size(), 2u);
  EXPECT_EQ(mean[1].acc_test, 0.5);
  EXPECT_EQ(mean[1].uncertain_test, 4.0);
}

TEST(AverageTraces, RaggedRunsAverageWhatExists) {
  RunTrace a, b;
  a.points = {{0, 0.2, 0.9, 10}, {1, 0.4, 0.9, 6}};
  b.points = {{0, 0.4, 0.7, 8}};
  auto mean = average_traces({a, b});
  EXPECT_DOUBLE_EQ(mean[0].acc_test, 0.3);
  EXPECT_DOUBLE_EQ(mean[0].uncertain_test, 9.0);
  EXPECT_DOUBLE_EQ(mean[1].acc_test, 0.4);
}

TEST(Protocol, FixtureSplitsAreConsistent) {
  const auto& f = small_fixture();
  EXPECT_EQ(f.known.size() + f.uncertain.size(), f.validation.size());
  EXPECT_EQ(f.learn.size() + f.test.size(), f.uncertain.size());
  EXPECT_GT(f.uncertain.size(), 10u);
  EXPECT_EQ(f.base_model.version, 0u);
}

TEST(Protocol, RunTraceShape) {
  const auto& f = small_fixture();
  auto cfg = small_protocol();
  auto r = run_incremental_protocol(f, cfg, RunSettings{5, 10, 3});
  EXPECT_EQ(r.points.size(), 1 + f.learn.size() / 5);
  EXPECT_EQ(r.committed, 5 * (f.learn.size() / 5));
  EXPECT_LE(r.mislabeled, r.committed);
  EXPECT_EQ(r.points[0].acc_test, evaluate(f.base_model, f.test).accuracy());
  EXPECT_EQ(r.final_test.accuracy(), r.points.back().acc_test);
  for (std::size_t i = 0; i < r.points.size(); ++i) EXPECT_EQ(r.points[i].q, i);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const auto& f = small_fixture();
  auto cfg = small_protocol();
  SweepConfig sweep;
  sweep.s_values = {5, 10};
  sweep.q_values = {12};
  sweep.repeats = 2;
  sweep.threads = 1;
  auto a = run_sweep(f, cfg, sweep);
  sweep.threads = 3;
  auto b = run_sweep(f, cfg, sweep);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.cells.size(), 2u);
}

TEST(Sweep, RejectsEmptyGrid) {
  SweepConfig s;
  s.q_values.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = SweepConfig{};
  s.repeats = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Ablation, ZeroNoiseMakesArmsIdentical) {
  const auto& f = small_fixture();
  auto rep = noise_ablation(f, small_protocol(), 5, 10, 2, 7, 0.0, 2);
  ASSERT_EQ(rep.cells.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(same_points(rep.cells[0].runs[i], rep.cells[1].runs[i]));
    EXPECT_EQ(rep.cells[1].runs[i].mislabeled, 0u);
  }
}

TEST(Ablation, FullNoiseHurts) {
  const auto& f = small_fixture();
  auto rep = noise_ablation(f, small_protocol(), 5, 10, 2, 7, 1.0, 2);
  EXPECT_DOUBLE_EQ(rep.cells[0].mean_noise(), 1.0);
  EXPECT_DOUBLE_EQ(rep.cells[1].mean_noise(), 0.0);
  EXPECT_LT(rep.cells[0].mean.back().acc_test, rep.cells[1].mean.back().acc_test);
}

TEST(Report, EmitIsByteIdentical) {
  const auto& f = small_fixture();
  auto rep = noise_ablation(f, small_protocol(), 5, 10, 1, 3);
  auto a = testutil::temp_dir("report-a"), b = testutil::temp_dir("report-b");
  emit_report(rep, a);
  emit_report(rep, b);
  EXPECT_EQ(testutil::slurp(a / "report.json"), testutil::slurp(b / "report.json"));
  EXPECT_EQ(testutil::slurp(a / "traces" / "cell0_run0.csv"), testutil::slurp(b / "traces" / "cell0_run0.csv"));
  auto j = Json::parse(testutil::slurp(a / "report.json"));
  EXPECT_EQ(j["kind"], "ablation");
  EXPECT_EQ(j["cells"].size(), 2u);
}
