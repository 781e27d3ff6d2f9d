#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "emascale/dynamics.hpp"
#include "emascale/ema.hpp"
#include "emascale/error.hpp"
#include "emascale/experiments/parabola.hpp"

namespace emascale {
namespace {

NgosSpec constant_gradient(double g) {
  NgosSpec spec;
  spec.mean_grad = [g](std::span<const double>, std::span<const double>, std::span<double> out) {
    for (double& v : out) v = g;
  };
  spec.cov_diag = [](std::span<const double>, std::span<const double>, std::span<double> out) {
    for (double& v : out) v = 0.0;
  };
  spec.depends_on_ema = false;
  return spec;
}

CoupledConfig sgd_config(double eta, double rho) {
  CoupledConfig c;
  c.hp.eta = eta;
  c.hp.rho = rho;
  return c;
}

// Under a constant gradient one step at (kappa eta, rho^kappa) moves theta
// exactly like kappa base steps and leaves zeta off by delta * g.
TEST(CoupledProcess, ConstantGradientBlockBudget) {
  const double g = 0.7, eta = 0.01, rho = 0.95;
  const NgosSpec spec = constant_gradient(g);
  RngStream rng(0, 0);
  for (std::int64_t kappa : {1, 2, 8, 33}) {
    CoupledProcess base(spec, ParamVector{1.0}, ParamVector{0.2}, sgd_config(eta, rho));
    for (std::int64_t k = 0; k < kappa; ++k) base.step(rng);
    CoupledProcess scaled(spec, ParamVector{1.0}, ParamVector{0.2},
                          sgd_config(kappa * eta, std::pow(rho, kappa)));
    scaled.step(rng);
    EXPECT_NEAR(base.theta()[0], scaled.theta()[0], 1e-12);
    const double delta = delta_error(eta, rho, static_cast<double>(kappa));
    EXPECT_NEAR(base.zeta()[0] - scaled.zeta()[0], delta * g, 1e-12) << kappa;
  }
}

TEST(CoupledProcess, PreAndPostStepConventions) {
  const NgosSpec spec = constant_gradient(1.0);
  RngStream rng(0, 0);
  CoupledConfig pre = sgd_config(0.1, 0.5);
  CoupledConfig post = pre;
  post.ema = EmaConvention::post_step;
  CoupledProcess a(spec, ParamVector{1.0}, ParamVector{0.0}, pre);
  CoupledProcess b(spec, ParamVector{1.0}, ParamVector{0.0}, post);
  a.step(rng);
  b.step(rng);
  EXPECT_DOUBLE_EQ(a.theta()[0], 0.9);
  EXPECT_DOUBLE_EQ(a.zeta()[0], 0.5);
  EXPECT_DOUBLE_EQ(b.zeta()[0], 0.45);
  EXPECT_EQ(a.iteration(), 1);
}

TEST(CoupledProcess, DivergenceRaises) {
  ParabolaProblem p;
  const NgosSpec spec = p.ngos();
  CoupledProcess proc(spec, ParamVector{1.0}, ParamVector{1.0}, sgd_config(3.0, 0.9));
  RngStream rng(0, 0);
  try {
    for (int k = 0; k < 1000; ++k) proc.step(rng);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::diverged);
    ASSERT_TRUE(e.where().has_value());
    EXPECT_GT(*e.where(), 10.0);
  }
}

EnsembleRequest parabola_request(std::size_t threads) {
  EnsembleRequest req;
  req.config = sgd_config(1e-2, 0.99);
  req.theta0 = ParamVector{1.0, 0.5};
  req.zeta0 = req.theta0;
  req.iterations = 100;
  req.record_stride = 10;
  req.seed = 5;
  req.replicates = 37;
  req.threads = threads;
  return req;
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  ParabolaProblem p;
  p.dim = 2;
  const NgosSpec spec = p.ngos();
  const std::vector<Observable> obs{Observable::coord_square(0), Observable::squared_norm()};
  const auto a = ensemble_moments(spec, parabola_request(1), obs);
  const auto b = ensemble_moments(spec, parabola_request(4), obs);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].times(), parabola_request(1).record_count());
  EXPECT_EQ(a[0].times(), 11u);
  for (std::size_t o = 0; o < a.size(); ++o) {
    EXPECT_EQ(a[o].means(), b[o].means());
    for (std::size_t t = 0; t < a[o].times(); ++t) EXPECT_EQ(a[o].variance(t), b[o].variance(t));
  }
}

TEST(Ensemble, SharedPathMatchesSeparateRuns) {
  ParabolaProblem p;
  p.dim = 2;
  const NgosSpec spec = p.ngos();
  const std::vector<Observable> obs{Observable::coord_square(1)};
  const std::vector<double> rhos{0.9, 0.99, 0.999};
  const auto multi = ensemble_moments_multi_rho(spec, parabola_request(2), rhos, obs);
  ASSERT_EQ(multi.size(), rhos.size());
  for (std::size_t c = 0; c < rhos.size(); ++c) {
    EnsembleRequest req = parabola_request(1);
    req.config.hp.rho = rhos[c];
    const auto single = ensemble_moments(spec, req, obs);
    for (std::size_t t = 0; t < single[0].times(); ++t) {
      EXPECT_NEAR(multi[c][0].mean(t), single[0].mean(t), 1e-14);
    }
  }
}

}  // namespace
}  // namespace emascale
