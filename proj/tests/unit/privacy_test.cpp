#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fedflex/privacy.hpp"
#include "test_support.hpp"

namespace fedflex {
namespace {

DpConfig dp(double clip, double sigma, std::uint64_t seed = 1) {
  DpConfig c;
  c.clip_norm = clip;
  c.noise_sigma = sigma;
  c.rng_seed = seed;
  return c;
}

ItemDeltas sample_deltas() {
  return {{1, {0.5, -0.25, 3.0}}, {4, {0.0, 0.0, 0.0}}, {9, {-7.0, 1e-3, 2.0}}};
}

TEST(ClipAndNoise, IdentityConfiguration) {
  const auto d = sample_deltas();
  EXPECT_EQ(clip_and_noise(d, DpConfig{}), d);
  EXPECT_EQ(clip_and_noise(d, dp(100.0, 0.0)), d);
}

TEST(ClipAndNoise, ClipsToExactlyC) {
  const auto out = clip_and_noise({{0, {10.0, 0.0}}, {1, {6.0, 8.0}}}, dp(1.0, 0.0));
  EXPECT_EQ(l2_norm(out.at(0)), 1.0);
  EXPECT_DOUBLE_EQ(l2_norm(out.at(1)), 1.0);
  EXPECT_DOUBLE_EQ(out.at(1)[0], 0.6);
}

TEST(ClipAndNoise, NoiseStatistics) {
  // Zero deltas, sigma = C = 1: every coordinate is a pure noise draw.
  ItemDeltas zero;
  for (ItemId i = 0; i < 10000; ++i) zero.emplace(i, std::vector<double>(10, 0.0));
  const auto out = clip_and_noise(zero, dp(1.0, 1.0, 2024));
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& [id, v] : out) {
    for (double x : v) {
      sum += x;
      sq += x * x;
      ++n;
    }
  }
  ASSERT_EQ(n, 100000u);
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_LE(std::abs(mean), 3.0 / std::sqrt(1e5));
  EXPECT_LE(std::abs(sd - 1.0), 0.02);
}

TEST(ClipAndNoise, NoiseScalesWithClipNorm) {
  ItemDeltas zero;
  for (ItemId i = 0; i < 2000; ++i) zero.emplace(i, std::vector<double>(5, 0.0));
  const auto out = clip_and_noise(zero, dp(0.5, 2.0, 3));
  double sq = 0.0;
  for (const auto& [id, v] : out) {
    for (double x : v) sq += x * x;
  }
  EXPECT_NEAR(std::sqrt(sq / 10000.0), 1.0, 0.03);
}

TEST(ClipAndNoiseProperty, NormBoundKeysAndDeterminism) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    ItemDeltas d;
    const int items = std::uniform_int_distribution<int>(1, 20)(rng);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 3)(rng));
    for (int i = 0; i < items; ++i) d.emplace(i * 3, testing::random_vector(rng, 8, scale));
    const double c = std::uniform_real_distribution<double>(0.01, 5.0)(rng);

    const auto clipped = clip_and_noise(d, dp(c, 0.0));
    ASSERT_EQ(clipped.size(), d.size());
    for (const auto& [id, v] : clipped) {
      ASSERT_TRUE(d.contains(id));
      ASSERT_LE(l2_norm(v), c + 1e-9);
    }

    const auto a = clip_and_noise(d, dp(c, 0.7, trial));
    const auto b = clip_and_noise(d, dp(c, 0.7, trial));
    ASSERT_EQ(a, b);
    ASSERT_NE(a, clip_and_noise(d, dp(c, 0.7, trial + 1000)));
  }
}

TEST(DpConfig, Validation) {
  EXPECT_THROW(dp(0.0, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(dp(-1.0, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(dp(1.0, -0.1).validate(), std::invalid_argument);
  EXPECT_THROW(dp(std::numeric_limits<double>::infinity(), 1.0).validate(), std::invalid_argument);
  EXPECT_NO_THROW(dp(std::numeric_limits<double>::infinity(), 0.0).validate());
}

}  // namespace
}  // namespace fedflex
