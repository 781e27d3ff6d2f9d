// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "emascale/ema.hpp"
#include "emascale/error.hpp"
#include "emascale/experiments/approximation_error.hpp"
#include "emascale/experiments/distill.hpp"
#include "emascale/experiments/parabola.hpp"
#include "emascale/experiments/polyak.hpp"
#include "emascale/parallel.hpp"
#include "emascale/progressive.hpp"
#include "emascale/rng.hpp"
#include "emascale/scaling.hpp"
#include "emascale/sde.hpp"
#include "golden_tables.hpp"

#ifndef EMASCALE_TEST_DATA_DIR
#define EMASCALE_TEST_DATA_DIR "tests/data"
#endif

namespace {

using namespace emascale;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::size_t kThreads = resolve_threads(0);

HyperParams parabola_base() {
  HyperParams hp;
  hp.eta = 1e-4;
  hp.rho = 1.0 - 1e-4;
  hp.batch_size = 1;
  return hp;
}

Outcome transition_identity() {
  RngStream rng(2024, 1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double eta = 0.5 * (1.0 - rng.uniform()) ;  // (0, 0.5]
    const double rho = rng.uniform();
    const auto kappa = static_cast<std::int64_t>(1 + rng.next_u64() % 64);
    TransitionMatrix3 product = TransitionMatrix3::identity();
    const TransitionMatrix3 base = base_transition(eta, rho);
    for (std::int64_t k = 0; k < kappa; ++k) product = product * base;
    worst = std::max(worst, transition_power(eta, rho, kappa).max_abs_diff(product));
  }
  return {worst <= 1e-12, "max |closed form - product| = " + fmt("%.3g", worst)};
}

Outcome golden_tables() {
  const auto report = testing::check_golden_tables(EMASCALE_TEST_DATA_DIR);
  std::string detail = std::to_string(report.cells) + " cells, " +
                       std::to_string(report.mismatches) + " mismatches";
  for (const auto& d : report.details) detail += "; " + d;
  return {report.cells == 156 && report.mismatches == 0, detail};
}

Outcome parabola_matching() {
  const ParabolaProblem problem;  // a=1, b=0.5, c=0, theta0=1
  ErrSettings settings;
  settings.replicates = 1000;
  settings.seed = 11;
  settings.threads = kThreads;
  BaselineCache cache;
  bool pass = true;
  std::string detail;
  for (double kappa : {8.0, 256.0}) {
    const auto r = corollary_check(problem, parabola_base(), kappa, Observable::coord_square(0),
                                   settings, &cache);
    const double ratio = r.without_rule.err / r.with_rule.err;
    pass = pass && r.with_rule.err < r.without_rule.err;
    if (kappa == 256.0) pass = pass && ratio >= 3.0;
    detail += "kappa=" + fmt("%g", kappa) + ": with " + fmt("%.3g", r.with_rule.err) +
              " without " + fmt("%.3g", r.without_rule.err) + " ratio " + fmt("%.1f", ratio) +
              "; ";
  }
  return {pass, detail};
}

Outcome rho_star_tracking() {
  const ParabolaProblem problem;
  ErrSettings settings;
  settings.replicates = 1000;
  settings.seed = 12;
  settings.threads = kThreads;
  BaselineCache cache;
  bool pass = true;
  std::string detail;
  for (double kappa : {2.0, 8.0, 64.0}) {
    const HyperParams base = parabola_base();
    const auto r = rho_star_search(problem, base, kappa, Observable::coord_square(0),
                                   RhoGrid::around(base.rho, kappa), settings, &cache);
    pass = pass && r.log_gap <= 0.35;
    detail += "kappa=" + fmt("%g", kappa) + ": |log gap| " + fmt("%.3f", r.log_gap) + "; ";
  }
  return {pass, detail};
}

Outcome weak_order() {
  const NgosSpec ngos = ParabolaProblem{}.ngos();
  WeakErrorProblem problem;
  problem.family = SdeFamily::sgd_ema;
  problem.ngos = &ngos;
  problem.theta0 = ParamVector{1.0};
  problem.total_time = 1.0;
  problem.beta0 = 1.0;
  WeakErrorOptions options;
  options.threads = kThreads;
  const auto points =
      weak_error(problem, Observable::coord_square(0), {4e-4, 2e-4, 1e-4}, 200, 13, options);
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < points.size(); ++i) {
    pass = pass && points[i].ci_halfwidth < 0.1 * points[i].max_weak_error;
    detail += "eta=" + fmt("%g", points[i].eta) + " err " + fmt("%.3g", points[i].max_weak_error) +
              " ci " + fmt("%.2g", points[i].ci_halfwidth) + "; ";
    if (i > 0) {
      const double ratio = points[i - 1].max_weak_error / points[i].max_weak_error;
      pass = pass && ratio >= 1.5 && ratio <= 3.0;
      detail += "ratio " + fmt("%.2f", ratio) + "; ";
    }
  }
  return {pass, detail};
}

Outcome limiting_variance() {
  bool pass = true;
  std::string detail;
  LimitingStatsOptions options;
  options.threads = kThreads;
  for (double rho : {0.9, 0.99, 0.999}) {
    const auto stats = limiting_stats_check([](RngStream& r) { return 5.0 + r.normal(); }, rho,
                                            10'000'000, 14, options);
    const double expected = limiting_variance_prefactor(rho, std::nullopt);
    const double var_err = std::abs(stats.var_ratio / expected - 1.0);
    const double mean_err = std::abs(stats.mean_ratio - 1.0);
    pass = pass && var_err <= 0.10 && mean_err <= 0.01;
    detail += "rho=" + fmt("%g", rho) + ": var rel err " + fmt("%.3f", var_err) +
              " mean rel err " + fmt("%.2g", mean_err) + "; ";
  }
  return {pass, detail};
}

Outcome polyak_matching() {
  const BlobDataset data = BlobDataset::generate(BlobSpec{.separation = 2.0});
  HyperParams hp;
  hp.batch_size = 128;
  hp.eta = 0.02;
  hp.rho = 0.999;
  PolyakOptions options;
  options.epochs = 10;
  options.init_scale = 0.5;
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto base = toy_polyak_train(data, hp, options, 1.0, true, seed);
    for (double kappa : {2.0, 4.0}) {
      const auto with = toy_polyak_train(data, hp, options, kappa, true, 100 + seed);
      const auto without = toy_polyak_train(data, hp, options, kappa, false, 100 + seed);
      const double gw = max_metric_gap(base, with, kEmaTestAccuracy);
      const double gwo = max_metric_gap(base, without, kEmaTestAccuracy);
      pass = pass && gw <= gwo;
      detail += "seed " + std::to_string(seed) + " kappa=" + fmt("%g", kappa) + ": " +
                fmt("%.4f", gw) + " vs " + fmt("%.4f", gwo) + "; ";
    }
  }
  return {pass, detail};
}

DistillProblem distill_problem(double b, double c) {
  DistillProblem p;
  p.target = ParamVector{1.0};
  p.supervised_weight = 1.0;
  p.distill_weight = 1.0;
  p.b = b;
  p.c = c;
  p.theta0 = 0.0;
  return p;
}

Outcome distill_coupling() {
  HyperParams hp;
  hp.eta = 1e-3;
  hp.rho = 0.999;
  hp.batch_size = 64;

  // Noiseless run against the exact two-state linear recursion.
  const DistillProblem quiet = distill_problem(0.0, 0.0);
  DistillRun run;
  run.total_time = 1.0;
  RngStream rng(15, 0);
  const auto rec = toy_distill_train(quiet, hp, 1.0, true, std::nullopt, run, rng);
  const auto theta = rec.values("model.identity_coord(0)");
  const auto zeta = rec.values("ema.identity_coord(0)");
  const double w = quiet.supervised_weight, mu = quiet.distill_weight, y = 1.0;
  double t = 0.0, z = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    worst = std::max({worst, std::abs(theta[k] - t), std::abs(zeta[k] - z)});
    const double t_next = t - hp.eta * (w * (t - y) + mu * (t - z));
    z = hp.rho * z + (1.0 - hp.rho) * t;
    t = t_next;
  }

  const DistillProblem noisy = distill_problem(0.5, 0.1);
  ErrSettings settings;
  settings.replicates = 1000;
  settings.seed = 16;
  settings.threads = kThreads;
  const auto r = corollary_check(noisy.err_problem(), hp, 8.0, Observable::coord_square(0),
                                 settings);
  const bool pass = worst <= 1e-10 && r.with_rule.err < r.without_rule.err;
  return {pass, "oracle max diff " + fmt("%.3g", worst) + "; kappa=8 Err with " +
                    fmt("%.3g", r.with_rule.err) + " without " + fmt("%.3g", r.without_rule.err)};
}

Outcome progressive_plans() {
  HyperParams base;
  base.batch_size = 1024;
  base.eta = 0.02;
  base.rho = 0.992;
  const auto plan = progressive_schedule(base, OptimizerKind::sgd, {{0, 1024}, {30, 8192}},
                                         Transition::step);
  bool exact = true;
  for (const auto& stage : plan.stages) {
    HyperParams direct = scale(base, stage.kappa, OptimizerKind::sgd);
    direct.batch_size = stage.batch_size;
    exact = exact && stage.scaled == direct;
  }
  const auto smooth = progressive_schedule(base, OptimizerKind::sgd,
                                           {{0, 1024}, {10, 1024}, {30, 8192}},
                                           Transition::smooth_linear);
  bool monotone = true, valid = true;
  std::int64_t prev = 0;
  for (const auto& s : smooth.per_epoch(40)) {
    monotone = monotone && s.batch_size >= prev;
    prev = s.batch_size;
    valid = valid && s.scaled.valid();
    HyperParams direct = scale(base, s.kappa, OptimizerKind::sgd);
    direct.batch_size = s.batch_size;
    exact = exact && s.scaled == direct;
  }
  return {exact && monotone && valid,
          std::string("stages exact: ") + (exact ? "yes" : "no") +
              ", smooth monotone: " + (monotone ? "yes" : "no") +
              ", invariants: " + (valid ? "yes" : "no") + ", final eta " +
              fmt("%g", plan.stages.back().scaled.eta) + " rho " +
              fmt("%.5f", plan.stages.back().scaled.rho)};
}

Outcome representability() {
  const auto b = momentum_bounds(0.996, 1.1921e-7);
  const bool pass = b.kappa_max >= 3900 && b.kappa_max <= 4050 && b.kappa_min >= 2.9e-5 &&
                    b.kappa_min <= 3.1e-5;
  return {pass, "kappa_max " + fmt("%.1f", b.kappa_max) + ", kappa_min " +
                    fmt("%.4g", b.kappa_min)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "closed-form transition identity", transition_identity},
      {2, "scaling table golden files", golden_tables},
      {3, "noisy parabola trajectory matching", parabola_matching},
      {4, "optimal momentum tracks the rule", rho_star_tracking},
      {5, "weak order one", weak_order},
      {6, "limiting EMA mean and variance", limiting_variance},
      {7, "toy Polyak-Ruppert matching", polyak_matching},
      {8, "EMA-in-the-loss coupling", distill_coupling},
      {9, "progressive scaling plans", progressive_plans},
      {10, "momentum representability bounds", representability},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (!out.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
