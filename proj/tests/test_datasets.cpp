#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace increlearn;

namespace {

DataError::Kind kind_of(const std::string& text, std::size_t* line = nullptr) {
  std::istringstream in(text);
  try {
    read_features(in);
  } catch (const DataError& e) {
    if (line) *line = e.line();
    return e.kind();
  }
  ADD_FAILURE() << "no DataError for:\n" << text;
  return DataError::Kind::io;
}

const std::string kHeader = "increlearn-features v1, N=2, D=2\ncat,dog\n";

}  // namespace

TEST(FeatureFile, ParsesLabeledAndUnlabeledRows) {
  std::istringstream in(kHeader + "a,cat,1,2\nb,,3.5,-4e-3\n\nc,dog,0,0\n");
  auto d = read_features(in);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.classes.name(1), "dog");
  EXPECT_EQ(d.examples[0].true_label, ClassIndex{0});
  EXPECT_FALSE(d.examples[1].true_label);
  EXPECT_DOUBLE_EQ(d.examples[1].features[1], -4e-3);
}

TEST(FeatureFile, EachDefectHasItsOwnKindAndLine) {
  std::size_t line = 0;
  EXPECT_EQ(kind_of(""), DataError::Kind::malformed_header);
  EXPECT_EQ(kind_of("increlearn-features v2, N=2, D=2\ncat,dog\n", &line), DataError::Kind::malformed_header);
  EXPECT_EQ(line, 1u);
  EXPECT_EQ(kind_of("increlearn-features v1, N=3, D=2\ncat,dog\n", &line), DataError::Kind::malformed_header);
  EXPECT_EQ(line, 2u);
  EXPECT_EQ(kind_of(kHeader + "a,cat,1,2\nb,cat,1\n", &line), DataError::Kind::dimension_mismatch);
  EXPECT_EQ(line, 4u);
  EXPECT_EQ(kind_of(kHeader + "a,cow,1,2\n", &line), DataError::Kind::unknown_class);
  EXPECT_EQ(line, 3u);
  EXPECT_EQ(kind_of(kHeader + "a,cat,1,inf\n", &line), DataError::Kind::non_finite_value);
  EXPECT_EQ(line, 3u);
  EXPECT_EQ(kind_of(kHeader + "a,cat,1,nan\n"), DataError::Kind::non_finite_value);
  EXPECT_EQ(kind_of(kHeader + "a,cat,1,x\n", &line), DataError::Kind::malformed_row);
  EXPECT_EQ(kind_of(kHeader + "lonely\n"), DataError::Kind::malformed_row);
  EXPECT_EQ(kind_of(kHeader + "a,cat,1,2\na,dog,3,4\n", &line), DataError::Kind::duplicate_id);
  EXPECT_EQ(line, 4u);
  EXPECT_EQ(kind_of("increlearn-features v1, N=2, D=2\ncat,cat\n"), DataError::Kind::malformed_header);
}

TEST(FeatureFile, RoundTripIsBitExact) {
  Rng rng(11);
  auto d = testutil::blobs({{0.1, 1e-300, -7.0}, {1.0 / 3.0, 2.0, 1e300}}, 50, 0.123456789, rng);
  d.examples[3].true_label.reset();
  std::stringstream buf;
  write_features(buf, d);
  auto back = read_features(buf);
  EXPECT_EQ(back, d);
  std::stringstream again;
  write_features(again, back);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(FeatureFile, MissingFileIsAnIoError) {
  try {
    load_features("/nonexistent/increlearn.txt");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::io);
  }
}

TEST(Split, LearnTestSizes) {
  const std::vector<double> f{472.0 / 787.0, 315.0 / 787.0};
  auto sizes = split_sizes(787, f);
  EXPECT_EQ(sizes, (std::vector<std::size_t>{472, 315}));
}

TEST(Split, LargestRemainderAlwaysSumsToTotal) {
  const std::vector<double> thirds{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  for (std::size_t n = 0; n < 50; ++n) {
    auto s = split_sizes(n, thirds);
    EXPECT_EQ(s[0] + s[1] + s[2], n);
    EXPECT_GE(s[0], s[2]);
  }
}

TEST(Split, DisjointCoveringDeterministic) {
  Rng rng(2);
  auto d = testutil::blobs({{0.0}, {1.0}, {2.0}}, 40, 1.0, rng);
  SplitSpec spec{{0.5, 0.3, 0.2}, 7};
  auto parts = split(d, spec);
  auto again = split(d, spec);
  EXPECT_EQ(parts, again);
  std::set<std::string> ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    total += p.size();
    for (const auto& e : p.examples) EXPECT_TRUE(ids.insert(e.id).second);
  }
  EXPECT_EQ(total, d.size());
  EXPECT_EQ(parts[0].size(), 60u);
  spec.seed = 8;
  EXPECT_NE(split(d, spec)[0], parts[0]);
}

TEST(Split, WholeFractionReturnsEverythingInOrder) {
  Rng rng(2);
  auto d = testutil::blobs({{0.0}, {1.0}}, 10, 1.0, rng);
  auto parts = split(d, SplitSpec{{1.0}, 3});
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], d);
}

TEST(Split, BadFractionsAreConfigErrors) {
  Dataset d{testutil::classes(2), 1, {}};
  EXPECT_THROW(split(d, SplitSpec{{0.5, 0.4}, 0}), ConfigError);
  EXPECT_THROW(split(d, SplitSpec{{1.2, -0.2}, 0}), ConfigError);
  EXPECT_THROW(split(d, SplitSpec{{}, 0}), ConfigError);
}

TEST(LabelNoise, ExactCountAndAlwaysDifferent) {
  Rng rng(3);
  auto d = testutil::blobs({{0.0}, {1.0}, {2.0}, {3.0}}, 25, 1.0, rng);
  for (double rate : {0.0, 0.1, 0.25, 0.37, 1.0}) {
    auto r = inject_label_noise(d, rate, 5);
    const auto expect = static_cast<std::size_t>(std::llround(rate * 100.0));
    EXPECT_EQ(r.corrupted.size(), expect);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (r.data.examples[i].true_label != d.examples[i].true_label) ++changed;
    EXPECT_EQ(changed, expect);
    for (std::size_t k = 0; k < r.corrupted.size(); ++k)
      EXPECT_EQ(r.original_labels[k], *d.examples[r.corrupted[k]].true_label);
  }
}

TEST(LabelNoise, BinaryFullRateFlipsEverything) {
  Rng rng(3);
  auto d = testutil::blobs({{0.0}, {1.0}}, 10, 1.0, rng);
  auto r = inject_label_noise(d, 1.0, 1);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_EQ(*r.data.examples[i].true_label, 1 - *d.examples[i].true_label);
}

TEST(LabelNoise, RejectsBadInput) {
  Rng rng(3);
  auto d = testutil::blobs({{0.0}, {1.0}}, 3, 1.0, rng);
  EXPECT_THROW(inject_label_noise(d, 1.5, 0), ConfigError);
  d.examples[0].true_label.reset();
  EXPECT_THROW(inject_label_noise(d, 0.5, 0), DataError);
}

TEST(RoleManifest, RoundTrip) {
  Rng rng(3);
  auto a = testutil::blobs({{0.0}, {1.0}}, 3, 1.0, rng);
  auto b = a.empty_like();
  auto m = role_manifest({{"train", &a}, {"v_test", &b}});
  std::stringstream buf;
  write_role_manifest(buf, m);
  EXPECT_EQ(read_role_manifest(buf), m);
  std::istringstream bad("nope\n");
  EXPECT_THROW(read_role_manifest(bad), DataError);
}
