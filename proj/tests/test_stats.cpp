#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <vector>

#include "bayesd/stats.hpp"

using namespace bayesd::stats;

namespace {

std::vector<double> one_to(int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  std::iota(x.begin(), x.end(), 1.0);
  return x;
}

}  // namespace

TEST(Moments, SmallSample) {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean<double>(x), 5.0);
  EXPECT_DOUBLE_EQ(variance<double>(x), 32.0 / 7.0);
  EXPECT_TRUE(std::isnan(variance<double>(std::vector<double>{1.0})));
}

TEST(Moments, LargeOffsetIsStable) {
  std::vector<double> x{1e9 + 4, 1e9 + 7, 1e9 + 13, 1e9 + 16};
  EXPECT_NEAR(variance<double>(x), 30.0, 1e-6);
}

TEST(Quantile, TypeSeven) {
  const auto x = one_to(100);
  const auto ci = equal_tailed(x, 0.9);
  EXPECT_NEAR(ci.low, 5.95, 1e-12);
  EXPECT_NEAR(ci.high, 95.05, 1e-12);
  EXPECT_DOUBLE_EQ(median<double>(x), 50.5);
  EXPECT_DOUBLE_EQ(quantile<double>(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile<double>(x, 1.0), 100.0);
}

TEST(Quantile, RejectsBadProbability) {
  const auto x = one_to(10);
  EXPECT_THROW(equal_tailed(x, 0.0), std::invalid_argument);
  EXPECT_THROW(equal_tailed(x, 1.0), std::invalid_argument);
}

TEST(Mad, NormalConsistency) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 2);
  std::vector<double> x(200000);
  for (auto& v : x) v = n(rng);
  EXPECT_NEAR(mad<double>(x), 2.0, 0.02);
}

TEST(Correlation, KnownValues) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 4, 6, 8, 10};
  const std::vector<double> z{5, 4, 3, 2, 1};
  EXPECT_NEAR(correlation<double>(x, y), 1.0, 1e-15);
  EXPECT_NEAR(correlation<double>(x, z), -1.0, 1e-15);
}

TEST(Ks, IdenticalAndDisjoint) {
  const auto x = one_to(50);
  std::vector<double> far(50);
  for (std::size_t i = 0; i < 50; ++i) far[i] = 1000.0 + static_cast<double>(i);
  EXPECT_EQ(ks_distance(x, x), 0.0);
  EXPECT_EQ(ks_distance(x, far), 1.0);
}

TEST(Ks, BruteForceOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(37), b(53);
  for (auto& v : a) v = n(rng);
  for (auto& v : b) v = 0.3 + n(rng);
  double d = 0;
  auto ecdf = [](const std::vector<double>& s, double t) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [t](double v) { return v <= t; })) /
           static_cast<double>(s.size());
  };
  for (double t : a) d = std::max(d, std::abs(ecdf(a, t) - ecdf(b, t)));
  for (double t : b) d = std::max(d, std::abs(ecdf(a, t) - ecdf(b, t)));
  EXPECT_DOUBLE_EQ(ks_distance(a, b), d);
}

TEST(Hpd, ShortestWindow) {
  const std::vector<double> x{0, 1, 1.1, 1.2, 1.3, 10};
  const auto h = highest_density(x, 0.6);
  EXPECT_EQ(h.low, 1.0);
  EXPECT_EQ(h.high, 1.3);
}

TEST(Hpd, NarrowerThanEqualTailedForSkewedDraws) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1);
  std::vector<double> x(20000);
  for (auto& v : x) v = e(rng);
  const auto h = highest_density(x, 0.9);
  const auto q = equal_tailed(x, 0.9);
  EXPECT_LT(h.high - h.low, q.high - q.low);
  EXPECT_NEAR(h.low, 0.0, 0.01);
  EXPECT_NEAR(h.high, std::log(10.0), 0.05);
}
