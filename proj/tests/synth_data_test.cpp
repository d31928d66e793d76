#include "aefocl/synth_data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace aefocl {
namespace {

SynthSpec two_class_spec(std::uint64_t n, std::uint64_t seed) {
  SynthSpec s;
  s.num_classes = 2;
  s.d_feat = 3;
  s.num_tasks = 1;
  s.proportions = {0.5, 0.5};
  s.means = {{0.0, 1.0, -2.0}, {3.0, 0.5, 0.0}};
  s.stds = {{1.0, 0.5, 2.0}, {0.25, 1.0, 1.0}};
  s.samples_per_task = n;
  s.seed = seed;
  return s;
}

std::vector<std::uint64_t> label_counts(const std::vector<FeatureRecord>& recs, std::uint32_t c) {
  std::vector<std::uint64_t> out(c, 0);
  for (const auto& r : recs) ++out[r.label];
  return out;
}

TEST(SynthDataTest, HalfSplitCountsAreFrozen) {
  const auto recs = generate_records(two_class_spec(1000, 42));
  ASSERT_EQ(recs.size(), 1000u);
  const auto counts = label_counts(recs, 2);
  EXPECT_GE(counts[0], 400u);
  EXPECT_LE(counts[0], 600u);
  // regression pin for the portable engine + discrete distribution
  EXPECT_EQ(counts, (std::vector<std::uint64_t>{475, 525}));
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(SynthDataTest, SameSeedGivesIdenticalBytes) {
  const auto dir = test::temp_dir("synth_bytes");
  const SynthSpec spec = soda_like_preset(8, 200, 3);
  generate_stream(spec, dir / "a.aeff");
  generate_stream(spec, dir / "b.aeff");
  EXPECT_EQ(file_bytes(dir / "a.aeff"), file_bytes(dir / "b.aeff"));
  SynthSpec other = spec;
  other.seed = 4;
  generate_stream(other, dir / "c.aeff");
  EXPECT_NE(file_bytes(dir / "a.aeff"), file_bytes(dir / "c.aeff"));
  const Dataset ds = read_binary_dataset(dir / "a.aeff");
  EXPECT_EQ(ds.header.num_records, 1200u);
  EXPECT_EQ(ds.records, generate_records(spec));
}

TEST(SynthDataTest, RejectsBadSpecs) {
  SynthSpec s = two_class_spec(10, 1);
  s.num_classes = 1;
  EXPECT_THROW(s.validate(), InputError);
  s = two_class_spec(10, 1);
  s.proportions = {0.5, 0.6};
  EXPECT_THROW(s.validate(), InputError);
  s = two_class_spec(10, 1);
  s.stds[1][2] = 0.0;
  EXPECT_THROW(generate_records(s), InputError);
  s = two_class_spec(10, 1);
  s.means.pop_back();
  EXPECT_THROW(s.validate(), InputError);
}

TEST(SynthDataTest, ClassMeansConverge) {
  const SynthSpec spec = two_class_spec(20000, 5);
  const auto recs = generate_records(spec);
  const auto counts = label_counts(recs, 2);
  for (ClassIndex c = 0; c < 2; ++c) {
    for (std::uint32_t j = 0; j < 3; ++j) {
      double sum = 0.0;
      for (const auto& r : recs)
        if (r.label == c) sum += r.vector[j];
      const double mean = sum / counts[c];
      EXPECT_NEAR(mean, spec.means[c][j], 5.0 * spec.stds[c][j] / std::sqrt(counts[c])) << c << "," << j;
    }
  }
}

TEST(SynthDataTest, TaskIdsAreNondecreasing) {
  const auto recs = generate_records(soda_like_preset(4, 100, 1));
  ASSERT_EQ(recs.size(), 600u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].task_id, i / 100);
  }
}

TEST(SynthDataTest, ExactCountsPerTask) {
  const SynthSpec spec = balanced_preset(6, 4, 600, 2);
  const auto recs = generate_records(spec);
  for (TaskIndex t = 0; t < spec.num_tasks; ++t) {
    std::vector<std::uint64_t> counts(6, 0);
    for (const auto& r : recs)
      if (r.task_id == t) ++counts[r.label];
    EXPECT_EQ(counts, std::vector<std::uint64_t>(6, 100)) << "task " << t;
  }
  EXPECT_EQ(detail::exact_class_counts({0.55, 0.2, 0.12, 0.08, 0.047, 0.003}, 1000),
            (std::vector<std::uint64_t>{550, 200, 120, 80, 47, 3}));
  EXPECT_EQ(detail::exact_class_counts({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10), (std::vector<std::uint64_t>{4, 3, 3}));
}

TEST(SynthDataTest, SodaLikeProfile) {
  const SynthSpec spec = soda_like_preset();
  EXPECT_EQ(spec.num_classes, 6u);
  EXPECT_EQ(spec.num_tasks, 6u);
  EXPECT_GE(spec.total_records(), 20000u);
  // tail class holds well under 1% of the stream
  const auto counts = label_counts(generate_records(spec), 6);
  EXPECT_LT(counts[5], counts[0] / 50);
  EXPECT_GT(counts[5], 0u);
}

TEST(SynthDataTest, JsonRoundTrip) {
  const SynthSpec spec = two_class_spec(50, 9);
  const SynthSpec back = synth_spec_from_json(to_json(spec));
  EXPECT_EQ(generate_records(back), generate_records(spec));
}

TEST(SynthDataTest, JsonPresetsAndErrors) {
  const SynthSpec s = synth_spec_from_json(nlohmann::json{{"preset", "soda10m-like"}, {"d_feat", 8}, {"seed", 2}});
  EXPECT_EQ(s.d_feat, 8u);
  EXPECT_EQ(s.seed, 2u);
  EXPECT_EQ(s.samples_per_task, 3500u);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json{{"preset", "nope"}}), ConfigError);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json{{"num_classes", 1}, {"samples_per_task", 10}}), ConfigError);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json{{"num_classes", "x"}}), ConfigError);
  const SynthSpec u = synth_spec_from_json(nlohmann::json{{"num_classes", 4}, {"d_feat", 2}, {"samples_per_task", 10}});
  EXPECT_EQ(u.proportions, std::vector<double>(4, 0.25));
}

}  // namespace
}  // namespace aefocl
