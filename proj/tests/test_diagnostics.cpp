#include <gtest/gtest.h>

#include <random>

#include "bayesd/diagnostics.hpp"
#include "bayesd/stats.hpp"

using namespace bayesd;

namespace {

Eigen::MatrixXd iid(std::uint64_t seed, Eigen::Index n, Eigen::Index chains) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Eigen::MatrixXd m(n, chains);
  for (Eigen::Index c = 0; c < chains; ++c)
    for (Eigen::Index i = 0; i < n; ++i) m(i, c) = z(rng);
  return m;
}

Eigen::MatrixXd ar1(std::uint64_t seed, Eigen::Index n, Eigen::Index chains, double phi) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Eigen::MatrixXd m(n, chains);
  for (Eigen::Index c = 0; c < chains; ++c) {
    double x = z(rng) / std::sqrt(1 - phi * phi);
    for (Eigen::Index i = 0; i < n; ++i) m(i, c) = x = phi * x + z(rng);
  }
  return m;
}

Draws as_draws(const std::vector<Eigen::MatrixXd>& params, const std::vector<std::string>& names) {
  Draws d;
  d.names = names;
  const Eigen::Index n = params[0].rows(), chains = params[0].cols();
  for (Eigen::Index c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(params.size()));
    for (std::size_t j = 0; j < params.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = params[j].col(c);
    d.chains.push_back(m);
    d.info.emplace_back(static_cast<std::size_t>(n));
  }
  return d;
}

}  // namespace

TEST(Rhat, IidChainsNearOne) {
  const auto m = iid(1, 1000, 4);
  const double r = split_rhat(m);
  EXPECT_GE(r, 1.0);
  EXPECT_LT(r, 1.01);
}

TEST(Rhat, SeparatedChainsFlagged) {
  Eigen::MatrixXd m = iid(2, 500, 4);
  m.col(2).array() += 10;
  m.col(3).array() += 10;
  EXPECT_GT(split_rhat(m), 1.1);
}

TEST(Rhat, TrendWithinChainFlaggedBySplitting) {
  Eigen::MatrixXd m = iid(3, 1000, 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).array() += 3.0 * static_cast<double>(i) / 1000;
  EXPECT_GT(split_rhat(m), 1.05);
}

TEST(Rhat, ScaleDifferencesCaughtByFolding) {
  Eigen::MatrixXd m = iid(4, 1000, 4);
  m.col(0) *= 5;
  EXPECT_GT(split_rhat(m), 1.05);
}

TEST(Rhat, UndefinedCases) {
  EXPECT_TRUE(std::isnan(split_rhat(iid(5, 100, 1))));
  EXPECT_TRUE(std::isnan(split_rhat(Eigen::MatrixXd::Constant(100, 4, 2.0))));
  Eigen::MatrixXd stuck = Eigen::MatrixXd::Zero(100, 2);
  stuck.col(1).setConstant(1);
  EXPECT_TRUE(std::isinf(split_rhat(stuck)));
}

TEST(Ess, IidNearTotal) {
  const auto m = iid(6, 1000, 4);
  const double e = ess_bulk(m);
  EXPECT_GT(e, 0.5 * 4000);
  EXPECT_LE(e, 4000);
  EXPECT_GT(ess_tail(m), 0.5 * 4000);
}

TEST(Ess, Ar1MatchesClosedForm) {
  // ESS of an AR(1) chain: N (1 - phi) / (1 + phi).
  const double phi = 0.8;
  const auto m = ar1(7, 20000, 4, phi);
  const double expected = 80000 * (1 - phi) / (1 + phi);
  EXPECT_NEAR(ess_basic(m) / expected, 1.0, 0.15);
  EXPECT_NEAR(ess_bulk(m) / expected, 1.0, 0.15);
}

TEST(Ess, AntitheticCapped) {
  Eigen::MatrixXd m(1000, 2);
  for (Eigen::Index i = 0; i < 1000; ++i) m(i, 0) = m(i, 1) = (i % 2 ? 1.0 : -1.0) + 1e-3 * static_cast<double>(i % 7);
  EXPECT_LE(ess_basic(m), 2000);
}

TEST(RankNormalize, MonotoneStandardScores) {
  Eigen::MatrixXd m(3, 2);
  m << 1, 4, 2, 5, 3, 6;
  const auto z = rank_normalize(m);
  // Ranks 1..6 of S = 6: Phi^-1((r - 3/8) / 6.25); rank 1 maps to Phi^-1(0.1).
  EXPECT_NEAR(z(0, 0), -1.2815515655446004, 1e-9);
  EXPECT_NEAR(z(2, 1), 1.2815515655446004, 1e-9);
  EXPECT_NEAR(z(2, 0) + z(0, 1), 0.0, 1e-12);
  Eigen::MatrixXd ties = Eigen::MatrixXd::Constant(2, 2, 1.0);
  EXPECT_NEAR(rank_normalize(ties)(0, 0), 0.0, 1e-12);
}

TEST(Diagnose, ReportsWarningsAndMcse) {
  auto d = as_draws({iid(8, 400, 4), Eigen::MatrixXd::Constant(400, 4, 1.5)}, {"a", "fixed"});
  d.info[1][3].divergent = true;
  d.info[2][0].treedepth = 10;
  const auto diag = diagnose(d, 10);
  EXPECT_TRUE(diag.at("fixed").constant);
  EXPECT_FALSE(diag.at("a").constant);
  EXPECT_EQ(diag.divergences(), 1);
  EXPECT_EQ(diag.chains[2].treedepth_saturated, 1);
  const auto col = d.column("a");
  EXPECT_NEAR(diag.at("a").mcse, stats::sd<double>(col) / std::sqrt(diag.at("a").ess_bulk), 1e-12);
  EXPECT_LT(diag.max_rhat(), 1.01);
  EXPECT_EQ(diag.warnings.size(), 3u);
  EXPECT_THROW(diag.at("nope"), std::exception);
}

TEST(Diagnose, SingleShortChainWarns) {
  const auto d = as_draws({iid(9, 50, 1)}, {"a"});
  const auto diag = diagnose(d);
  EXPECT_TRUE(std::isnan(diag.at("a").rhat));
  EXPECT_EQ(diag.max_rhat(), 1.0);
  EXPECT_EQ(diag.warnings.size(), 2u);
}
