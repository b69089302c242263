#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "clapping/engine/data.hpp"
#include "clapping/engine/sampler.hpp"
#include "clapping/engine/schedule.hpp"
#include "clapping/error.hpp"

using namespace clapping;
using namespace clapping::engine;

namespace {

InMemoryDataset dataset(std::size_t n) { return InMemoryDataset(math::Batch(n, 1)); }

}  // namespace

TEST(Sampler, FirstStepAlwaysFresh) {
  const auto data = dataset(100);
  SamplerState s;
  s.p = Schedule(0.0);
  RngStream rng(1, "sampling");
  const auto d = lazy_sample(s, data, rng);
  EXPECT_TRUE(d.f_fu);
  EXPECT_EQ(d.fresh, (std::vector<std::uint8_t>{1}));
}

TEST(Sampler, ProbabilityOneRefreshesEveryStep) {
  const auto data = dataset(100);
  SamplerState s;
  s.p = Schedule(1.0);
  RngStream rng(1, "sampling");
  for (int t = 0; t < 200; ++t) ASSERT_TRUE(lazy_sample(s, data, rng).f_fu);
  EXPECT_EQ(s.fresh_draws, 200u);
}

TEST(Sampler, ProbabilityZeroRetains) {
  const auto data = dataset(100);
  SamplerState s;
  s.p = Schedule(0.0);
  RngStream rng(1, "sampling");
  const auto first = lazy_sample(s, data, rng).ids[0];
  for (int t = 0; t < 200; ++t) {
    const auto d = lazy_sample(s, data, rng);
    ASSERT_FALSE(d.f_fu);
    ASSERT_EQ(d.ids[0], first);
  }
}

TEST(Sampler, ForceFreshAtStepTwo) {
  const auto data = dataset(100);
  SamplerState s;
  s.p = Schedule(0.0);
  s.force_fresh_at_step_2 = true;
  RngStream rng(1, "sampling");
  lazy_sample(s, data, rng);
  EXPECT_TRUE(lazy_sample(s, data, rng).f_fu);
  EXPECT_FALSE(lazy_sample(s, data, rng).f_fu);
}

TEST(Sampler, RefreshFrequencyMatchesProbability) {
  const auto data = dataset(1000);
  SamplerState s;
  s.p = Schedule(0.4);
  RngStream rng(2, "sampling");
  lazy_sample(s, data, rng);
  int fresh = 0;
  const int steps = 10000;
  for (int t = 0; t < steps; ++t) fresh += lazy_sample(s, data, rng).f_fu;
  EXPECT_NEAR(fresh / double(steps), 0.4, 3.0 * std::sqrt(0.4 * 0.6 / steps));
}

TEST(Sampler, SampleWiseRefreshesSlotsIndependently) {
  const auto data = dataset(1000);
  SamplerState s;
  s.rule = SamplingRule::BatchSampleWise;
  s.batch_size = 8;
  s.p = Schedule(0.5);
  RngStream rng(3, "sampling");
  lazy_sample(s, data, rng);
  bool saw_partial = false;
  for (int t = 0; t < 100; ++t) {
    const auto before = s.current;
    const auto d = lazy_sample(s, data, rng);
    const auto n = std::count(d.fresh.begin(), d.fresh.end(), 1);
    EXPECT_EQ(d.f_fu, n > 0);
    if (n > 0 && n < 8) saw_partial = true;
    for (std::size_t i = 0; i < 8; ++i)
      if (!d.fresh[i]) EXPECT_EQ(d.ids[i], before[i]);
  }
  EXPECT_TRUE(saw_partial);
}

TEST(Sampler, BatchWiseRefreshesAtomically) {
  const auto data = dataset(1000);
  SamplerState s;
  s.rule = SamplingRule::BatchBatchWise;
  s.batch_size = 8;
  s.p = Schedule(0.5);
  RngStream rng(4, "sampling");
  lazy_sample(s, data, rng);
  for (int t = 0; t < 100; ++t) {
    const auto before = s.current;
    const auto d = lazy_sample(s, data, rng);
    const auto n = std::count(d.fresh.begin(), d.fresh.end(), 1);
    EXPECT_TRUE(n == 0 || n == 8);
    if (n == 0) EXPECT_EQ(d.ids, before);
  }
}

TEST(Sampler, EpochShuffleVisitsEverySampleOncePerEpoch) {
  const auto data = dataset(16);
  SamplerState s;
  s.order = SampleOrder::EpochShuffle;
  RngStream rng(5, "sampling");
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 16; ++i) seen.insert(lazy_sample(s, data, rng).ids[0]);
    EXPECT_EQ(seen.size(), 16u);
  }
}

TEST(Sampler, StreamSourceHandsOutNewIds) {
  const StreamSource stream(2, [](std::uint64_t id, math::MutView out) { out[0] = out[1] = double(id); });
  SamplerState s;
  RngStream rng(6, "sampling");
  EXPECT_EQ(lazy_sample(s, stream, rng).ids[0], 0u);
  EXPECT_EQ(lazy_sample(s, stream, rng).ids[0], 1u);
}

TEST(Sampler, RejectsEmptyDatasetAndBadBatch) {
  EXPECT_THROW(dataset(0), ConfigError);
  RngStream rng(7, "sampling");
  SamplerState single;
  single.batch_size = 4;
  const auto data = dataset(10);
  EXPECT_THROW(lazy_sample(single, data, rng), ConfigError);
}

TEST(Schedule, PiecewiseConstant) {
  const Schedule s({{1, 0.1}, {101, 0.05}});
  EXPECT_EQ(s.at(1), 0.1);
  EXPECT_EQ(s.at(100), 0.1);
  EXPECT_EQ(s.at(101), 0.05);
  EXPECT_EQ(s.at(100000), 0.05);
  EXPECT_EQ(s.change_points(), (std::vector<std::uint64_t>{101}));
}

TEST(Schedule, GeometricHalving) {
  const auto s = Schedule::geometric(0.1, 40000, 0.5, 200000);
  EXPECT_EQ(s.at(40000), 0.1);
  EXPECT_EQ(s.at(40001), 0.05);
  EXPECT_EQ(s.at(200000), 0.1 / 16);
  EXPECT_EQ(s.change_points().size(), 4u);
}

TEST(Schedule, MustStartAtStepOne) {
  EXPECT_THROW(Schedule({{2, 0.1}}), ConfigError);
  EXPECT_THROW(Schedule({{1, 0.1}, {1, 0.2}}), ConfigError);
}
