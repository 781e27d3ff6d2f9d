#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emascale/hyperparams.hpp"
#include "emascale/scaling.hpp"

namespace emascale {

struct ScheduleEntry {
  double epoch = 0.0;
  std::int64_t batch_size = 0;
};

struct PlanStage {
  double start_epoch = 0.0;
  std::int64_t batch_size = 0;
  double kappa = 1.0;
  HyperParams scaled;
};

enum class Transition { step, smooth_linear };

/// Batch-size schedule with hyperparameters rescaled from the base values
/// at every stage.
struct ScalingPlan {
  HyperParams base;
  OptimizerKind optimizer = OptimizerKind::sgd;
  Transition transition = Transition::step;
  std::vector<PlanStage> stages;

  /// Batch size in effect during `epoch`: the last stage at or before it for
  /// step plans, linear interpolation between stage anchors for smooth plans.
  std::int64_t batch_size_at(double epoch) const;

  /// Stage in effect during `epoch` with hyperparameters rescaled from base.
  PlanStage stage_at(double epoch) const;

  /// One stage per integer epoch in [0, epochs).
  std::vector<PlanStage> per_epoch(int epochs) const;

  /// Structured document: {"optimizer", "transition", "base", "stages": [...]}.
  std::string to_json() const;
};

/// Builds a plan from (epoch, batch size) anchors. Epochs must be strictly
/// increasing, batch sizes positive. A stage whose scaled values break a
/// rule raises scaling_out_of_range with the stage index in where().
ScalingPlan progressive_schedule(const HyperParams& base, OptimizerKind optimizer,
                                 const std::vector<ScheduleEntry>& schedule,
                                 Transition transition);

std::string_view to_string(Transition t);
Transition parse_transition(std::string_view text);

}  // namespace emascale
