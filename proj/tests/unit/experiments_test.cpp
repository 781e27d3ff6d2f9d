#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "emascale/error.hpp"
#include "emascale/experiments/approximation_error.hpp"
#include "emascale/experiments/distill.hpp"
#include "emascale/experiments/parabola.hpp"
#include "emascale/experiments/polyak.hpp"
#include "emascale/rng.hpp"
#include "emascale/scaling.hpp"

namespace emascale {
namespace {

HyperParams parabola_hp(double eta) {
  HyperParams hp;
  hp.eta = eta;
  hp.rho = 1.0 - eta;
  hp.batch_size = 1;
  return hp;
}

TEST(Parabola, NoiselessRunIsTheLinearRecursion) {
  ParabolaProblem p;
  p.a = 2.0;
  p.b = 0.0;
  p.c = 0.0;
  p.theta0 = 1.5;
  const HyperParams hp = parabola_hp(0.01);
  RngStream rng(0, 0);
  const auto rec = parabola_run(p, hp, 1.0, 300, rng);
  const auto theta = rec.values("model.identity_coord(0)");
  const auto zeta = rec.values("ema.identity_coord(0)");
  ASSERT_EQ(theta.size(), 301u);
  double t = 1.5, z = 1.5;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    EXPECT_NEAR(theta[k], t, 1e-12);
    EXPECT_NEAR(zeta[k], z, 1e-12);
    z = hp.rho * z + (1 - hp.rho) * t;
    t -= hp.eta * p.a * t;
  }
}

// Noiseless parabola: with both rules the scaled run stays much closer to the
// baseline at aligned times than with the learning-rate rule alone.
TEST(Parabola, NoiselessScaledRunTracksBaseline) {
  ParabolaProblem p;
  p.b = 0.0;
  const HyperParams hp = parabola_hp(1e-3);
  const int kappa = 8;
  RngStream rng(0, 0);
  const auto base = parabola_run(p, hp, 1.0, 1000, rng).values("ema.identity_coord(0)");
  HyperParams with = hp;
  with.eta = kappa * hp.eta;
  with.rho = scale_ema(hp.rho, kappa);
  HyperParams without = with;
  without.rho = hp.rho;
  const auto a = parabola_run(p, with, kappa, 125, rng).values("ema.identity_coord(0)");
  const auto b = parabola_run(p, without, kappa, 125, rng).values("ema.identity_coord(0)");
  double gap_with = 0.0, gap_without = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    gap_with = std::max(gap_with, std::abs(a[k] - base[k * kappa]));
    gap_without = std::max(gap_without, std::abs(b[k] - base[k * kappa]));
  }
  EXPECT_LT(gap_with, 0.01);
  EXPECT_LT(10 * gap_with, gap_without);
}

TEST(Parabola, ReproducibleForSeed) {
  ParabolaProblem p;
  RngStream r1(9, 3), r2(9, 3);
  EXPECT_EQ(parabola_run(p, parabola_hp(1e-2), 1.0, 100, r1).to_csv(),
            parabola_run(p, parabola_hp(1e-2), 1.0, 100, r2).to_csv());
}

ErrSettings small_settings(std::size_t replicates, std::size_t threads = 1) {
  ErrSettings s;
  s.replicates = replicates;
  s.seed = 21;
  s.threads = threads;
  return s;
}

TEST(ApproximationError, ProcessAgainstItself) {
  ParabolaProblem p;
  const HyperParams hp = parabola_hp(1e-3);
  const auto r = approximation_error(p, hp, hp.rho, 1.0, Observable::coord_square(0),
                                     small_settings(400));
  EXPECT_GE(r.err, 0.0);
  EXPECT_LE(r.err, 3.0 * r.ci_halfwidth);
}

TEST(ApproximationError, RuleBeatsNoRuleAndIsThreadInvariant) {
  ParabolaProblem p;
  const HyperParams hp = parabola_hp(1e-3);
  BaselineCache cache;
  const auto one = corollary_check(p, hp, 8.0, Observable::coord_square(0), small_settings(200),
                                   &cache);
  const auto many = corollary_check(p, hp, 8.0, Observable::coord_square(0),
                                    small_settings(200, 3));
  EXPECT_LT(one.with_rule.err, one.without_rule.err);
  EXPECT_EQ(one.with_rule.err, many.with_rule.err);
  EXPECT_EQ(one.without_rule.ci_halfwidth, many.without_rule.ci_halfwidth);
  EXPECT_EQ(cache.size(), 1u);
}

TEST(ApproximationError, KappaOneCorollaryIsNull) {
  ParabolaProblem p;
  const HyperParams hp = parabola_hp(1e-3);
  const auto r = corollary_check(p, hp, 1.0, Observable::coord_square(0), small_settings(400));
  EXPECT_LE(r.with_rule.err, 3.0 * r.with_rule.ci_halfwidth);
  EXPECT_LE(r.without_rule.err, 3.0 * r.without_rule.ci_halfwidth);
}

TEST(ApproximationError, RequirePrecisionRaises) {
  ParabolaProblem p;
  ErrSettings s = small_settings(4);
  s.require_precision = true;
  try {
    approximation_error(p, parabola_hp(1e-3), 0.999, 1.0, Observable::coord_square(0), s);
    FAIL() << "expected insufficient_samples";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_samples);
  }
}

TEST(AlignedGrid, IntegerKappaOnly) {
  const AlignedGrid g = aligned_grid(parabola_hp(1e-4), 256.0, 1.0);
  EXPECT_EQ(g.base_iterations, 10000);
  EXPECT_EQ(g.scaled_iterations, 39);
  EXPECT_THROW(aligned_grid(parabola_hp(1e-4), 2.5, 1.0), Error);
  EXPECT_THROW(aligned_grid(parabola_hp(1e-4), 20000.0, 1.0), Error);
}

TEST(RhoSearch, KappaOneFindsBaseMomentum) {
  ParabolaProblem p;
  const HyperParams hp = parabola_hp(1e-3);
  const RhoGrid grid = RhoGrid::around(hp.rho, 1.0);
  const auto rhos = grid.rhos();
  ASSERT_EQ(rhos.size(), 41u);
  EXPECT_NEAR(rhos.front(), std::pow(hp.rho, 4.0), 1e-12);
  EXPECT_NEAR(rhos.back(), 1.0 - (1.0 - hp.rho) / 4.0, 1e-12);
  const double cell = (grid.log_hi - grid.log_lo) / 40.0;

  const auto r = rho_star_search(p, hp, 1.0, Observable::coord_square(0), grid,
                                 small_settings(400, 0));
  EXPECT_LE(std::abs(std::log1p(-r.rho_star) - std::log1p(-hp.rho)), std::abs(cell) + 1e-12);
  EXPECT_EQ(r.curve.size(), 41u);
}

DistillProblem distill(double mu, double b, double c) {
  DistillProblem d;
  d.distill_weight = mu;
  d.b = b;
  d.c = c;
  return d;
}

HyperParams distill_hp(double rho) {
  HyperParams hp;
  hp.eta = 1e-2;
  hp.rho = rho;
  hp.batch_size = 64;
  return hp;
}

TEST(Distill, NoiselessMatchesLinearRecursion) {
  const DistillProblem d = distill(1.0, 0.0, 0.0);
  const HyperParams hp = distill_hp(0.99);
  RngStream rng(0, 0);
  const auto rec = toy_distill_train(d, hp, 1.0, true, std::nullopt, {}, rng);
  const auto theta = rec.values("model.identity_coord(0)");
  const auto zeta = rec.values("ema.identity_coord(0)");
  double t = 0.0, z = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    EXPECT_NEAR(theta[k], t, 1e-10);
    EXPECT_NEAR(zeta[k], z, 1e-10);
    const double next = t - hp.eta * ((t - 1.0) + (t - z));
    z = hp.rho * z + (1 - hp.rho) * t;
    t = next;
  }
}

TEST(Distill, EmaFeedsBackOnlyWhenCoupled) {
  for (double mu : {0.0, 1.0}) {
    const DistillProblem d = distill(mu, 0.5, 0.1);
    RngStream r1(3, 0), r2(3, 0);
    const auto a = toy_distill_train(d, distill_hp(0.9), 1.0, true, std::nullopt, {}, r1)
                       .values("model.identity_coord(0)");
    const auto b = toy_distill_train(d, distill_hp(0.99), 1.0, true, std::nullopt, {}, r2)
                       .values("model.identity_coord(0)");
    if (mu == 0.0) {
      EXPECT_EQ(a, b);
    } else {
      EXPECT_NE(a, b);
    }
  }
}

TEST(Distill, ProgressivePlanSwitchesStages) {
  const DistillProblem d = distill(1.0, 0.0, 0.0);
  const HyperParams hp = distill_hp(0.99);
  const auto plan =
      progressive_schedule(hp, OptimizerKind::sgd, {{0, 64}, {2, 256}}, Transition::step);
  DistillRun run;
  run.epoch_time = 0.2;
  RngStream rng(0, 0);
  const auto rec = toy_distill_train(d, hp, 1.0, true, plan, run, rng);
  std::vector<double> kappas;
  for (const auto& row : rec.rows()) {
    if (row.metric_name == kDistillLoss) kappas.push_back(row.kappa);
  }
  EXPECT_EQ(kappas.front(), 1.0);
  EXPECT_EQ(kappas.back(), 4.0);
  EXPECT_NEAR(rec.rows().back().t, 1.0, 1e-9);
}

TEST(Distill, DeviationInterpolatesReference) {
  TrajectoryRecord ref, run;
  ref.add(0.0, 0, 1.0, "x", 0.0);
  ref.add(1.0, 1, 1.0, "x", 2.0);
  run.add(0.5, 0, 1.0, "x", 1.5);
  run.add(0.5, 0, 1.0, "y", 100.0);
  EXPECT_DOUBLE_EQ(max_deviation_at_common_times(run, ref, "x"), 0.5);
}

BlobDataset small_blobs() {
  BlobSpec spec;
  spec.train_size = 2000;
  spec.test_size = 500;
  spec.separation = 2.0;
  return BlobDataset::generate(spec);
}

TEST(Polyak, ZeroMomentumEmaEqualsModel) {
  const BlobDataset data = small_blobs();
  HyperParams hp;
  hp.eta = 0.05;
  hp.rho = 0.0;
  hp.batch_size = 50;
  PolyakOptions options;
  options.epochs = 3;
  const auto rec = toy_polyak_train(data, hp, options, 1.0, true, 1);
  EXPECT_EQ(rec.values(kModelTestAccuracy), rec.values(kEmaTestAccuracy));
  EXPECT_EQ(rec.values(kTrainLoss).size(), 4u);
}

TEST(Polyak, DeterministicAndSeedSensitive) {
  const BlobDataset data = small_blobs();
  HyperParams hp;
  hp.eta = 0.05;
  hp.rho = 0.99;
  hp.batch_size = 50;
  PolyakOptions options;
  options.epochs = 2;
  const auto a = toy_polyak_train(data, hp, options, 2.0, true, 4);
  const auto b = toy_polyak_train(data, hp, options, 2.0, true, 4);
  const auto c = toy_polyak_train(data, hp, options, 2.0, true, 5);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_NE(a.values(kTrainLoss), c.values(kTrainLoss));
  EXPECT_EQ(max_metric_gap(a, b, kEmaTestAccuracy), 0.0);
}

TEST(Polyak, RejectsOversizedBatch) {
  const BlobDataset data = small_blobs();
  HyperParams hp;
  hp.batch_size = 1500;
  EXPECT_THROW(toy_polyak_train(data, hp, PolyakOptions{}, 2.0, true, 1), Error);
}

TEST(Blobs, GenerationIsReproducible) {
  const BlobDataset a = small_blobs();
  const BlobDataset b = small_blobs();
  EXPECT_EQ(a.train_x, b.train_x);
  EXPECT_EQ(a.test_y, b.test_y);
  EXPECT_EQ(a.train_size(), 2000u);
}

}  // namespace
}  // namespace emascale
