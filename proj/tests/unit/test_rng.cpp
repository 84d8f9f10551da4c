#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "moelab/rng.hpp"

using moe::Philox;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, SameSeedSameStream) {
  Philox a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Philox, StreamsDiffer) {
  Philox a(42, 0), b(42, 1);
  int same = 0;
  for (int i = 0; i < 1000; ++i) same += a() == b() ? 1 : 0;
  EXPECT_EQ(same, 0);
}

TEST(Philox, UniformInOpenUnitInterval) {
  Philox r(7);
  double mean = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  mean /= n;
  EXPECT_NEAR(mean, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Philox, NormalMoments) {
  Philox r(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Philox, CategoricalFrequencies) {
  Philox r(5);
  const std::vector<double> w{0.2, 0.0, 0.5, 0.3};
  std::array<int, 4> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[r.categorical(w)];
  EXPECT_EQ(counts[1], 0);
  for (std::size_t j = 0; j < 4; ++j) {
    const double p = w[j];
    EXPECT_NEAR(counts[j] / double(n), p, 5 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST(Philox, BelowIsInRange) {
  Philox r(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(DeriveSeed, DistinctAcrossGrid) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t n = 0; n < 20; ++n)
    for (std::uint64_t rep = 0; rep < 40; ++rep) seeds.insert(moe::derive_seed(1, n, rep));
  EXPECT_EQ(seeds.size(), 800u);
  EXPECT_EQ(moe::derive_seed(1, 2, 3), moe::derive_seed(1, 2, 3));
  EXPECT_NE(moe::derive_seed(1, 2, 3), moe::derive_seed(2, 2, 3));
  EXPECT_NE(moe::derive_seed(1, 2, 3), moe::derive_seed(1, 3, 2));
}
