#include <gtest/gtest.h>

#include <set>

#include "clapping/rng.hpp"

using clapping::RngStream;
using clapping::derive_seed;

TEST(Rng, SameNameSameSequence) {
  RngStream a(42, "sampling"), b(42, "sampling");
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, StreamsAreIndependentByName) {
  EXPECT_NE(derive_seed(42, "sampling"), derive_seed(42, "compressor/b0/fwd"));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(2, "x"));
  RngStream a(42, "a"), b(42, "b");
  EXPECT_NE(a.uniform(), b.uniform());
}

TEST(Rng, DrawingFromOneStreamDoesNotPerturbAnother) {
  RngStream s1(7, "sampling");
  const double expected = s1.uniform();
  RngStream c(7, "compressor/b0/fwd");
  for (int i = 0; i < 1000; ++i) c.normal(0.0, 1.0);
  RngStream s2(7, "sampling");
  EXPECT_EQ(s2.uniform(), expected);
}

TEST(Rng, UniformInUnitInterval) {
  RngStream r(3, "u");
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, IndexCoversRange) {
  RngStream r(3, "idx");
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto k = r.index(10);
    ASSERT_LT(k, 10u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Rng, DegenerateBernoulliConsumesNothing) {
  RngStream a(5, "b"), b(5, "b");
  EXPECT_TRUE(a.bernoulli(1.0));
  EXPECT_FALSE(a.bernoulli(0.0));
  EXPECT_EQ(a.uniform(), b.uniform());
}
