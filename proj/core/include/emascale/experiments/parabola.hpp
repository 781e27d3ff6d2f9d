#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "emascale/hyperparams.hpp"
#include "emascale/observable.hpp"
#include "emascale/optim.hpp"
#include "emascale/rng.hpp"
#include "emascale/trajectory.hpp"

namespace emascale {

/// f(theta) = a/2 |theta|^2 with per-coordinate gradient noise variance
/// (b gbar_i^2 + c) / kappa, where gbar = a theta is the noiseless gradient.
struct ParabolaProblem {
  double a = 1.0;
  double b = 0.5;
  double c = 0.0;
  std::size_t dim = 1;
  double theta0 = 1.0;  // every coordinate; zeta0 = theta0

  void validate() const;
  NgosSpec ngos() const;
  ParamVector initial() const { return ParamVector(dim, theta0); }
};

/// One SGD + EMA run at the given (already scaled) hyperparameters; kappa
/// only divides the gradient noise. Every observable is recorded at each step
/// k = 0..iterations with t = k * hp.eta. Defaults to model.identity_coord(0),
/// ema.identity_coord(0) and ema.coord_square(0).
TrajectoryRecord parabola_run(const ParabolaProblem& problem, const HyperParams& hp,
                              double kappa, std::int64_t iterations, RngStream& rng,
                              const std::vector<Observable>& observables = {});

}  // namespace emascale
