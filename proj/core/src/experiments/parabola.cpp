#include "emascale/experiments/parabola.hpp"

#include <cmath>

#include "emascale/dynamics.hpp"
#include "emascale/error.hpp"

namespace emascale {

void ParabolaProblem::validate() const {
  if (!(a > 0.0)) fail(ErrorCode::invalid_problem, "curvature a must be > 0");
  if (!(b >= 0.0) || !(c >= 0.0)) fail(ErrorCode::invalid_problem, "noise coefficients must be >= 0");
  if (dim < 1) fail(ErrorCode::invalid_problem, "dimension must be >= 1");
  if (!std::isfinite(theta0)) fail(ErrorCode::invalid_problem, "theta0 must be finite");
}

NgosSpec ParabolaProblem::ngos() const {
  validate();
  NgosSpec spec;
  const double a_ = a, b_ = b, c_ = c;
  spec.mean_grad = [a_](std::span<const double> theta, std::span<const double>,
                        std::span<double> out) {
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = a_ * theta[i];
  };
  spec.cov_diag = [a_, b_, c_](std::span<const double> theta, std::span<const double>,
                               std::span<double> out) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = a_ * theta[i];
      out[i] = b_ * g * g + c_;
    }
  };
  spec.noise_scale = 1.0;
  spec.depends_on_ema = false;
  return spec;
}

TrajectoryRecord parabola_run(const ParabolaProblem& problem, const HyperParams& hp,
                              double kappa, std::int64_t iterations, RngStream& rng,
                              const std::vector<Observable>& observables) {
  if (!(kappa >= 1.0)) fail(ErrorCode::invalid_argument, "kappa must be >= 1");
  if (iterations < 0) fail(ErrorCode::invalid_argument, "iterations must be >= 0");
  const std::vector<Observable> obs =
      observables.empty()
          ? std::vector<Observable>{Observable::identity_coord(0, Observable::Target::model),
                                    Observable::identity_coord(0),
                                    Observable::coord_square(0)}
          : observables;
  std::vector<std::string> names;
  for (const Observable& o : obs) names.push_back(o.name());

  const NgosSpec spec = problem.ngos();
  CoupledConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.hp = hp;
  cfg.noise_kappa = kappa;
  CoupledProcess proc(spec, problem.initial(), problem.initial(), cfg);

  TrajectoryRecord rec;
  auto record = [&](std::int64_t k) {
    const double t = static_cast<double>(k) * hp.eta;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      rec.add(t, k, kappa, names[i], evaluate(obs[i], proc.theta(), proc.zeta()));
    }
  };
  record(0);
  for (std::int64_t k = 1; k <= iterations; ++k) {
    proc.step(rng);
    record(k);
  }
  return rec;
}

}  // namespace emascale
