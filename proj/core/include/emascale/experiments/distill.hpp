#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "emascale/experiments/approximation_error.hpp"
#include "emascale/hyperparams.hpp"
#include "emascale/optim.hpp"
#include "emascale/param_vector.hpp"
#include "emascale/progressive.hpp"
#include "emascale/rng.hpp"
#include "emascale/trajectory.hpp"

namespace emascale {

/// f(theta, zeta) = w/2 |theta - y|^2 + mu/2 |theta - zeta|^2, differentiated
/// in theta only. Gradient noise per coordinate has variance
/// (b gbar_i^2 + c) / kappa with gbar the noiseless gradient.
struct DistillProblem {
  ParamVector target{1.0};
  double supervised_weight = 1.0;
  double distill_weight = 1.0;
  double b = 0.0;
  double c = 0.0;
  double theta0 = 0.0;  // every coordinate; zeta0 = theta0

  void validate() const;
  NgosSpec ngos() const;
  ParamVector initial() const { return ParamVector(target.size(), theta0); }
  double loss(std::span<const double> theta, std::span<const double> zeta) const;
  ErrProblem err_problem() const;
};

struct DistillRun {
  double total_time = 1.0;
  /// Continuous time per epoch; progressive plans switch stages on epochs.
  double epoch_time = 0.1;
  std::int64_t record_stride = 1;
};

inline constexpr const char* kDistillLoss = "loss";

/// SGD + EMA on the distillation loss. Without a plan, kappa scales the run
/// (learning rate always, momentum iff use_rule) for T / (kappa eta) steps.
/// With a plan, kappa is ignored: each epoch runs at its stage's batch size
/// and scaled hyperparameters, and use_rule = false keeps the base momentum.
/// Records model.identity_coord(i), ema.identity_coord(i) for every
/// coordinate and the loss; t is the elapsed continuous time.
TrajectoryRecord toy_distill_train(const DistillProblem& problem, const HyperParams& hp_base,
                                   double kappa, bool use_rule,
                                   const std::optional<ScalingPlan>& progressive,
                                   const DistillRun& run, RngStream& rng);

/// Largest |value - reference(t)| over metrics starting with `prefix`, with
/// the reference linearly interpolated to each row's time.
double max_deviation_at_common_times(const TrajectoryRecord& run,
                                     const TrajectoryRecord& reference,
                                     const std::string& prefix);

}  // namespace emascale
