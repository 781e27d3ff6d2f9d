#include <gtest/gtest.h>

#include <cmath>

#include "emascale/ema.hpp"
#include "emascale/error.hpp"
#include "emascale/rng.hpp"

namespace emascale {
namespace {

TEST(EmaUpdate, Examples) {
  EXPECT_EQ(ema_update({ParamVector{5.0}, 0.0}, ParamVector{2.0}).zeta, ParamVector{2.0});
  EXPECT_DOUBLE_EQ(ema_update({ParamVector{0.0}, 0.9}, ParamVector{1.0}).zeta[0], 0.1);
  EXPECT_DOUBLE_EQ(ema_update_post({ParamVector{0.0}, 0.5}, ParamVector{2.0}).zeta[0], 1.0);
  EXPECT_THROW(ema_update({ParamVector{0.0}, 1.0}, ParamVector{1.0}), Error);
}

TEST(EmaUpdate, ConvexCombinationBound) {
  RngStream rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double z = 10 * rng.normal(), t = 10 * rng.normal(), rho = rng.uniform();
    const double out = ema_update({ParamVector{z}, rho}, ParamVector{t}).zeta[0];
    EXPECT_GE(out, std::min(z, t));
    EXPECT_LE(out, std::max(z, t));
  }
}

TEST(Transition, KappaOneIsBase) {
  EXPECT_LE(transition_power(0.1, 0.9, 1).max_abs_diff(base_transition(0.1, 0.9)), 1e-15);
}

TEST(Transition, EmaEntryIsRhoToKappa) {
  EXPECT_NEAR(transition_power(1e-4, 0.9999, 8)(1, 1), 0.99920028, 5e-9);
}

TEST(Transition, MatchesBruteForceProducts) {
  RngStream rng(2024, 0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double eta = 0.5 * rng.uniform();
    const double rho = rng.uniform();
    const auto kappa = static_cast<std::int64_t>(1 + rng.uniform() * 64);
    TransitionMatrix3 brute = TransitionMatrix3::identity();
    const TransitionMatrix3 a = base_transition(eta, rho);
    for (std::int64_t k = 0; k < kappa; ++k) brute = a * brute;
    worst = std::max(worst, transition_power(eta, rho, kappa).max_abs_diff(brute));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(DeltaError, Examples) {
  EXPECT_EQ(delta_error(0.1, 0.5, 1), 0.0);
  EXPECT_DOUBLE_EQ(delta_error(0.1, 0.5, 2), -0.05);
  EXPECT_DOUBLE_EQ(transition_power(0.1, 0.5, 2)(1, 2), -0.05);
  EXPECT_THROW(delta_error(0.1, 1.0, 2), Error);
}

TEST(DeltaError, NegativeAndRisingTowardZero) {
  for (double eta : {1e-4, 0.01, 0.3}) {
    for (double kappa : {2.0, 5.0, 64.0}) {
      double prev = -INFINITY;
      for (double rho = 0.05; rho < 1.0; rho += 0.05) {
        const double d = delta_error(eta, rho, kappa);
        EXPECT_LT(d, 0.0);
        EXPECT_GT(d, prev);
        prev = d;
      }
    }
  }
}

TEST(LimitingVariance, Examples) {
  EXPECT_EQ(limiting_variance_prefactor(0.0, std::nullopt), 1.0);
  EXPECT_EQ(limiting_variance_prefactor(0.0, 7), 1.0);
  EXPECT_DOUBLE_EQ(limiting_variance_prefactor(0.5, std::nullopt), 1.0 / 3.0);
  EXPECT_NEAR(limiting_variance_prefactor(0.9999, std::nullopt), 5.00025e-5, 1e-10);
}

TEST(LimitingVariance, StrictlyDecreasing) {
  double prev = 2.0;
  for (double rho = 0.0; rho < 1.0; rho += 0.01) {
    const double p = limiting_variance_prefactor(rho, std::nullopt);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(LimitingStats, RhoZeroAndMonteCarlo) {
  auto sampler = [](RngStream& rng) { return 5.0 + rng.normal(); };
  const LimitingStats zero = limiting_stats_check(sampler, 0.0, 100000, 1);
  EXPECT_NEAR(zero.mean_ratio, 1.0, 1e-12);
  EXPECT_NEAR(zero.var_ratio, 1.0, 1e-12);

  const LimitingStats s = limiting_stats_check(sampler, 0.99, 1000000, 2);
  EXPECT_TRUE(s.converged);
  EXPECT_NEAR(s.var_ratio / 0.0050251256281407, 1.0, 0.1);
  EXPECT_NEAR(s.mean_ratio, 1.0, 0.01);
}

TEST(LimitingStats, ShortHorizonIsFlagged) {
  auto sampler = [](RngStream& rng) { return rng.normal(); };
  EXPECT_FALSE(limiting_stats_check(sampler, 0.999, 10000, 1).converged);
}

}  // namespace
}  // namespace emascale
