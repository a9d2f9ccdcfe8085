#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "vid/rng.hpp"

namespace vid {
namespace {

TEST(SplitMix, DeterministicSequence) {
  std::uint64_t s1 = 7, s2 = 7;
  for (int i = 0; i < 100; ++i) EXPECT_EQ(splitmix64(s1), splitmix64(s2));
}

TEST(SplitMix, SeedsDiverge) {
  std::uint64_t s1 = 1, s2 = 2;
  EXPECT_NE(splitmix64(s1), splitmix64(s2));
}

TEST(MixKey, DistinguishesArgumentOrder) {
  EXPECT_NE(mix_key(1, 2), mix_key(2, 1));
  EXPECT_NE(mix_key(1, 2, 3), mix_key(3, 2, 1));
  EXPECT_NE(mix_key(0, 0), mix_key(0, 0, 0));
}

TEST(CounterUniform, PureAndInRange) {
  const double a = counter_uniform(42, 1, 2, 3);
  const double b = counter_uniform(42, 1, 2, 3);
  EXPECT_EQ(a, b);
  EXPECT_GE(a, 0.0);
  EXPECT_LT(a, 1.0);
  EXPECT_NE(counter_uniform(42, 1, 2, 3), counter_uniform(42, 1, 2, 4));
  EXPECT_NE(counter_uniform(42, 1, 2, 3), counter_uniform(43, 1, 2, 3));
}

TEST(Rng, DeterministicStreams) {
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UnitRange) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.next_unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, NextIndexBounds) {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t v = rng.next_index(7);
    EXPECT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);  // all residues reached
}

TEST(Rng, GaussianMoments) {
  Rng rng(123);
  const int n = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    ASSERT_TRUE(std::isfinite(g));
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> v2 = v1;
  Rng a(77), b(77);
  a.shuffle(v1);
  b.shuffle(v2);
  EXPECT_EQ(v1, v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(Rng, BernoulliProbabilityZeroAndOne) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(rng.next_bernoulli(0.0));
    EXPECT_TRUE(rng.next_bernoulli(1.0));
  }
}

}  // namespace
}  // namespace vid
