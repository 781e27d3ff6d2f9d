#include "emascale/experiments/distill.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "emascale/dynamics.hpp"
#include "emascale/error.hpp"
#include "emascale/format.hpp"
#include "emascale/scaling.hpp"
#include "emascale/time_grid.hpp"

namespace emascale {

void DistillProblem::validate() const {
  if (target.size() == 0) fail(ErrorCode::invalid_problem, "target must be non-empty");
  check_finite(target, "target");
  if (!(supervised_weight >= 0.0)) fail(ErrorCode::invalid_problem, "supervised weight must be >= 0");
  if (!(distill_weight >= 0.0)) fail(ErrorCode::invalid_problem, "distill weight must be >= 0");
  if (!(b >= 0.0) || !(c >= 0.0)) fail(ErrorCode::invalid_problem, "noise coefficients must be >= 0");
}

NgosSpec DistillProblem::ngos() const {
  validate();
  const std::vector<double> y = target.values();
  const double w = supervised_weight, mu = distill_weight, b_ = b, c_ = c;
  auto grad = [y, w, mu](std::span<const double> theta, std::span<const double> zeta,
                         std::span<double> out) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      out[i] = w * (theta[i] - y[i]) + mu * (theta[i] - zeta[i]);
    }
  };
  NgosSpec spec;
  spec.mean_grad = grad;
  spec.cov_diag = [grad, b_, c_](std::span<const double> theta, std::span<const double> zeta,
                                 std::span<double> out) {
    grad(theta, zeta, out);
    for (double& v : out) v = b_ * v * v + c_;
  };
  spec.noise_scale = 1.0;
  spec.depends_on_ema = distill_weight > 0.0;
  return spec;
}

double DistillProblem::loss(std::span<const double> theta, std::span<const double> zeta) const {
  check_same_dim(theta.size(), target.size(), "distill loss");
  check_same_dim(zeta.size(), target.size(), "distill loss");
  double sup = 0.0, dis = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    sup += (theta[i] - target[i]) * (theta[i] - target[i]);
    dis += (theta[i] - zeta[i]) * (theta[i] - zeta[i]);
  }
  return 0.5 * supervised_weight * sup + 0.5 * distill_weight * dis;
}

ErrProblem DistillProblem::err_problem() const {
  std::string key = "distill";
  for (double v : target) key += "|" + format_shortest(v);
  for (double v : {supervised_weight, distill_weight, b, c, theta0}) {
    key += "|" + format_shortest(v);
  }
  return ErrProblem(ngos(), initial(), key);
}

TrajectoryRecord toy_distill_train(const DistillProblem& problem, const HyperParams& hp_base,
                                   double kappa, bool use_rule,
                                   const std::optional<ScalingPlan>& progressive,
                                   const DistillRun& run, RngStream& rng) {
  hp_base.validate();
  if (!(run.total_time > 0.0)) fail(ErrorCode::invalid_argument, "total time must be > 0");
  if (run.record_stride < 1) fail(ErrorCode::invalid_argument, "record stride must be >= 1");
  const NgosSpec spec = problem.ngos();
  const std::size_t d = problem.target.size();
  std::vector<std::string> theta_names, zeta_names;
  for (std::size_t i = 0; i < d; ++i) {
    theta_names.push_back(Observable::identity_coord(i, Observable::Target::model).name());
    zeta_names.push_back(Observable::identity_coord(i).name());
  }

  auto hyper_at = [&](double k, const HyperParams* staged) {
    HyperParams hp = staged != nullptr ? *staged : scale(hp_base, k, OptimizerKind::sgd);
    if (!use_rule) hp.rho = hp_base.rho;
    return hp;
  };

  double cur_kappa = kappa;
  std::optional<PlanStage> stage;
  if (progressive) {
    if (!(run.epoch_time > 0.0)) fail(ErrorCode::invalid_argument, "epoch time must be > 0");
    stage = progressive->stage_at(0.0);
    cur_kappa = stage->kappa;
  }
  CoupledConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.hp = hyper_at(cur_kappa, stage ? &stage->scaled : nullptr);
  cfg.noise_kappa = cur_kappa;
  CoupledProcess proc(spec, problem.initial(), problem.initial(), cfg);

  TrajectoryRecord rec;
  double t = 0.0;
  auto record = [&]() {
    const std::int64_t k = proc.iteration();
    for (std::size_t i = 0; i < d; ++i) {
      rec.add(t, k, cur_kappa, theta_names[i], proc.theta()[i]);
      rec.add(t, k, cur_kappa, zeta_names[i], proc.zeta()[i]);
    }
    rec.add(t, k, cur_kappa, kDistillLoss, problem.loss(proc.theta(), proc.zeta()));
  };
  record();

  if (!progressive) {
    const std::int64_t n =
        iterations_for({run.total_time, hp_base.eta, OptimizerFamily::sgd_like}, kappa);
    const double dt = step_time(hp_base, OptimizerFamily::sgd_like, kappa);
    for (std::int64_t k = 1; k <= n; ++k) {
      proc.step(rng);
      t = static_cast<double>(k) * dt;
      if (k % run.record_stride == 0) record();
    }
    return rec;
  }

  const double tol = 1e-9 * run.total_time;
  for (int epoch = 0; t < run.total_time - tol; ++epoch) {
    stage = progressive->stage_at(epoch);
    cur_kappa = stage->kappa;
    proc.set_hyperparams(hyper_at(cur_kappa, &stage->scaled), cur_kappa);
    const double dt = step_time(hp_base, OptimizerFamily::sgd_like, cur_kappa);
    const double epoch_end = std::min(run.total_time, (epoch + 1) * run.epoch_time);
    while (t + dt <= epoch_end + tol) {
      proc.step(rng);
      t += dt;
      if (proc.iteration() % run.record_stride == 0) record();
    }
    if (epoch_end >= run.total_time - tol) break;
  }
  return rec;
}

double max_deviation_at_common_times(const TrajectoryRecord& run,
                                     const TrajectoryRecord& reference,
                                     const std::string& prefix) {
  std::map<std::string, std::vector<std::pair<double, double>>> ref;
  for (const TrajectoryRow& r : reference.rows()) {
    if (r.metric_name.starts_with(prefix)) ref[r.metric_name].emplace_back(r.t, r.value);
  }
  double worst = 0.0;
  for (const TrajectoryRow& r : run.rows()) {
    if (!r.metric_name.starts_with(prefix)) continue;
    auto it = ref.find(r.metric_name);
    if (it == ref.end() || it->second.empty()) {
      fail(ErrorCode::invalid_argument, "reference lacks metric " + r.metric_name);
    }
    const auto& series = it->second;
    auto hi = std::lower_bound(series.begin(), series.end(), r.t,
                               [](const auto& p, double t) { return p.first < t; });
    double value;
    if (hi == series.begin()) {
      value = hi->second;
    } else if (hi == series.end()) {
      value = series.back().second;
    } else {
      const auto lo = hi - 1;
      const double w = (r.t - lo->first) / (hi->first - lo->first);
      value = lo->second + w * (hi->second - lo->second);
    }
    worst = std::max(worst, std::abs(r.value - value));
  }
  return worst;
}

}  // namespace emascale
