// The oracles are used as ground truth elsewhere, so they get their own checks.
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"

TEST(Oracle, BinomialPmfSumsToOne) {
  for (int n : {1, 5, 20, 600}) {
    const auto pmf = oracle::binomial_pmf(n, 0.3);
    EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-9);
  }
  const auto pmf = oracle::binomial_pmf(2, 0.5);
  EXPECT_NEAR(pmf[1], 0.5, 1e-12);
}

TEST(Oracle, BinomialAucKnownValues) {
  EXPECT_NEAR(oracle::binomial_auc(5, 0.5, 0.5), 0.5, 1e-12);
  EXPECT_NEAR(oracle::binomial_auc(1, 1.0, 0.0), 1.0, 1e-12);
  // n = 1: P(X > Y) + P(X = Y) / 2 = 0.7 * 0.75 + (0.7 * 0.25 + 0.3 * 0.75) / 2
  EXPECT_NEAR(oracle::binomial_auc(1, 0.7, 0.25), 0.525 + 0.2, 1e-12);
}

TEST(Oracle, BruteForceAuc) {
  EXPECT_EQ(oracle::brute_force_auc({1, 2}, {0, 2}), (1 + 0 + 1 + 0.5) / 4.0);
}

TEST(Oracle, ChiSquareSurvival) {
  EXPECT_NEAR(oracle::chi2_sf_df3(0.0), 1.0, 1e-12);
  EXPECT_NEAR(oracle::chi2_sf_df3(7.814727903), 0.05, 1e-6);
  EXPECT_NEAR(oracle::chi2_sf_df3(11.34486673), 0.01, 1e-6);
  EXPECT_EQ(oracle::chi2_uniform({25, 25, 25, 25}), 0.0);
}

TEST(Oracle, EntropyHelpers) {
  EXPECT_NEAR(oracle::shannon({0.5, 0.5}), std::log(2.0), 1e-15);
  EXPECT_NEAR(oracle::log_prob_variance({0.25, 0.25, 0.25, 0.25}), 0.0, 1e-15);
  EXPECT_EQ(oracle::mean_of_smallest({3, 1, 2}, 2), 1.5);
}
