#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "emascale/error.hpp"
#include "emascale/experiments/parabola.hpp"
#include "emascale/optim.hpp"
#include "emascale/rng.hpp"

namespace emascale {
namespace {

NgosSpec noisy_parabola(double b, double c) {
  ParabolaProblem p;
  p.b = b;
  p.c = c;
  return p.ngos();
}

double sample_variance(const NgosSpec& spec, double theta, double kappa, int n,
                       double* mean_out = nullptr) {
  RngStream rng(3, 0);
  NgosSampler sampler(spec, 1);
  std::vector<double> th{theta}, out(1);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    sampler.sample(th, th, kappa, rng, out);
    sum += out[0];
    sum_sq += out[0] * out[0];
  }
  const double mean = sum / n;
  if (mean_out != nullptr) *mean_out = mean;
  return (sum_sq - n * mean * mean) / (n - 1);
}

TEST(Ngos, NoiselessIsExactGradient) {
  NgosSpec spec = noisy_parabola(0.5, 1.0);
  spec.noise_scale = 0.0;
  RngStream rng(0, 0);
  const ParamVector g = ngos_sample(spec, ParamVector{2.0, -3.0}, ParamVector{0.0, 0.0}, 1.0, rng);
  EXPECT_EQ(g, (ParamVector{2.0, -3.0}));
}

TEST(Ngos, AdditiveNoiseMoments) {
  const NgosSpec spec = noisy_parabola(0.0, 1.0);
  double mean = 0.0;
  const double var = sample_variance(spec, 2.0, 1.0, 1000000, &mean);
  EXPECT_NEAR(mean, 2.0, 3.0 / 1000.0);
  EXPECT_NEAR(var, 1.0, 0.01);
  EXPECT_NEAR(sample_variance(spec, 2.0, 4.0, 1000000), 0.25, 0.0025);
}

TEST(Ngos, VarianceScalesInverselyWithKappa) {
  const NgosSpec spec = noisy_parabola(0.5, 0.1);
  for (double kappa : {0.5, 1.0, 3.0}) {
    const double ratio =
        sample_variance(spec, 1.5, kappa, 100000) / sample_variance(spec, 1.5, 4.0 * kappa, 100000);
    EXPECT_GE(ratio, 3.8);
    EXPECT_LE(ratio, 4.2);
  }
}

TEST(Ngos, RejectsNonPositiveKappa) {
  const NgosSpec spec = noisy_parabola(0.5, 0.0);
  RngStream rng(0, 0);
  EXPECT_THROW(ngos_sample(spec, ParamVector{1.0}, ParamVector{1.0}, 0.0, rng), Error);
}

TEST(Sgd, Examples) {
  EXPECT_EQ(sgd_step(ParamVector{0.0}, ParamVector{0.0}, 0.1), ParamVector{0.0});
  EXPECT_DOUBLE_EQ(sgd_step(ParamVector{1.0}, ParamVector{1.0}, 0.1)[0], 0.9);
  EXPECT_THROW(sgd_step(ParamVector{1.0}, ParamVector{1.0, 2.0}, 0.1), Error);
}

TEST(Sgd, KappaIdenticalStepsEqualOneScaledStep) {
  RngStream rng(9, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const ParamVector theta{rng.normal(), rng.normal()};
    const ParamVector g{rng.normal(), rng.normal()};
    const double eta = 0.01 * rng.uniform();
    const int kappa = 1 + static_cast<int>(rng.uniform() * 64);
    ParamVector many = theta;
    for (int k = 0; k < kappa; ++k) many = sgd_step(many, g, eta);
    const ParamVector one = sgd_step(theta, g, kappa * eta);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(many[i], one[i], 1e-12 * std::max(1.0, std::abs(one[i])));
    }
  }
}

TEST(HeavyBall, TwoSteps) {
  OptimizerState s(1);
  ParamVector theta{0.0};
  for (int k = 0; k < 2; ++k) {
    auto r = heavy_ball_step(s, theta, ParamVector{1.0}, 0.1, 0.9);
    s = r.state;
    theta = r.theta;
  }
  EXPECT_NEAR(theta[0], -0.29, 1e-15);
}

TEST(RmsProp, Examples) {
  OptimizerState s(1);
  auto r = rmsprop_step(s, ParamVector{1.0}, ParamVector{0.0}, 0.1, 0.9, 1e-8);
  EXPECT_EQ(r.theta[0], 1.0);

  s.v[0] = 1.0;
  r = rmsprop_step(s, ParamVector{1.0}, ParamVector{1.0}, 0.1, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(r.theta[0], 0.9);
}

TEST(Adam, FirstStepIsSignStep) {
  for (double g : {3.0, -0.02, 1e-3}) {
    OptimizerState s(1);
    auto r = adam_step(s, ParamVector{0.5}, ParamVector{g}, 0.01, 0.9, 0.999, 1e-14);
    EXPECT_NEAR(r.theta[0] - 0.5, -0.01 * std::copysign(1.0, g), 1e-9);
    EXPECT_EQ(r.state.step, 1u);
  }
}

TEST(Adam, ZeroGradientKeepsTheta) {
  OptimizerState s(2);
  ParamVector theta{1.0, -2.0};
  for (int k = 0; k < 50; ++k) {
    auto r = adam_step(s, theta, ParamVector{0.0, 0.0}, 0.1, 0.9, 0.999, 1e-8);
    s = r.state;
    theta = r.theta;
  }
  EXPECT_EQ(theta, (ParamVector{1.0, -2.0}));
}

TEST(Adaptive, SecondMomentStaysNonNegative) {
  RngStream rng(4, 0);
  OptimizerState a(3), r(3);
  ParamVector ta{0.0, 0.0, 0.0}, tr = ta;
  for (int k = 0; k < 500; ++k) {
    const ParamVector g{1e3 * rng.normal(), 1e-6 * rng.normal(), rng.normal()};
    const double beta = rng.uniform();
    auto sa = adam_step(a, ta, g, 1e-3, 0.9, beta, 1e-8);
    auto sr = rmsprop_step(r, tr, g, 1e-3, beta, 1e-8);
    a = sa.state;
    ta = sa.theta;
    r = sr.state;
    tr = sr.theta;
    for (std::size_t i = 0; i < 3; ++i) {
      ASSERT_GE(a.v[i], 0.0);
      ASSERT_GE(r.v[i], 0.0);
    }
  }
}

TEST(Steppers, PureFunctions) {
  OptimizerState s(2);
  s.m = ParamVector{0.1, -0.2};
  s.v = ParamVector{0.3, 0.4};
  s.momentum_buf = ParamVector{0.5, 0.6};
  s.step = 3;
  const OptimizerState before = s;
  const ParamVector theta{1.0, 2.0};
  const ParamVector g{0.7, -0.8};
  const auto a1 = adam_step(s, theta, g, 0.01, 0.9, 0.99, 1e-8);
  const auto a2 = adam_step(s, theta, g, 0.01, 0.9, 0.99, 1e-8);
  EXPECT_EQ(a1.theta, a2.theta);
  EXPECT_EQ(a1.state, a2.state);
  const auto h1 = heavy_ball_step(s, theta, g, 0.01, 0.9);
  const auto h2 = heavy_ball_step(s, theta, g, 0.01, 0.9);
  EXPECT_EQ(h1.theta, h2.theta);
  const auto r1 = rmsprop_step(s, theta, g, 0.01, 0.9, 1e-8);
  const auto r2 = rmsprop_step(s, theta, g, 0.01, 0.9, 1e-8);
  EXPECT_EQ(r1.theta, r2.theta);
  EXPECT_EQ(s, before);
  EXPECT_EQ(theta, (ParamVector{1.0, 2.0}));
}

TEST(WeightDecay, Examples) {
  EXPECT_EQ(apply_weight_decay(ParamVector{1.5}, 0.1, 0.0, WeightDecayMode::coupled),
            ParamVector{1.5});
  EXPECT_DOUBLE_EQ(apply_weight_decay(ParamVector{1.0}, 0.1, 0.01, WeightDecayMode::coupled)[0],
                   0.999);
  EXPECT_DOUBLE_EQ(
      apply_weight_decay(ParamVector{1.0}, 0.1, 0.01, WeightDecayMode::decoupled)[0], 0.99);
}

}  // namespace
}  // namespace emascale
