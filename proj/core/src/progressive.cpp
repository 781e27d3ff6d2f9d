#include "emascale/progressive.hpp"

#include <cmath>
#include <string>

#include "json.hpp"

#include "emascale/error.hpp"

namespace emascale {

std::string_view to_string(Transition t) {
  return t == Transition::step ? "step" : "smooth_linear";
}

Transition parse_transition(std::string_view text) {
  if (text == "step") return Transition::step;
  if (text == "smooth_linear" || text == "smooth") return Transition::smooth_linear;
  fail(ErrorCode::invalid_argument, "unknown transition '" + std::string(text) + "'");
}

namespace {

PlanStage make_stage(const HyperParams& base, OptimizerKind optimizer, double epoch,
                     std::int64_t batch, std::optional<double> stage_index) {
  PlanStage stage;
  stage.start_epoch = epoch;
  stage.batch_size = batch;
  stage.kappa = static_cast<double>(batch) / static_cast<double>(base.batch_size);
  try {
    stage.scaled = scale(base, stage.kappa, optimizer);
    stage.scaled.batch_size = batch;
    stage.scaled.validate();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::scaling_out_of_range && e.code() != ErrorCode::invalid_argument) throw;
    const std::string where =
        stage_index ? "stage " + std::to_string(static_cast<long long>(*stage_index))
                    : "epoch " + std::to_string(epoch);
    fail(ErrorCode::scaling_out_of_range, where + ": " + e.what(), stage_index);
  }
  return stage;
}

}  // namespace

std::int64_t ScalingPlan::batch_size_at(double epoch) const {
  if (stages.empty()) fail(ErrorCode::invalid_argument, "empty plan");
  std::size_t i = 0;
  while (i + 1 < stages.size() && stages[i + 1].start_epoch <= epoch) ++i;
  if (transition == Transition::step || i + 1 >= stages.size() || epoch < stages[0].start_epoch) {
    return stages[i].batch_size;
  }
  const PlanStage& a = stages[i];
  const PlanStage& b = stages[i + 1];
  const double w = (epoch - a.start_epoch) / (b.start_epoch - a.start_epoch);
  return std::llround(static_cast<double>(a.batch_size) +
                      w * static_cast<double>(b.batch_size - a.batch_size));
}

PlanStage ScalingPlan::stage_at(double epoch) const {
  return make_stage(base, optimizer, epoch, batch_size_at(epoch), std::nullopt);
}

std::vector<PlanStage> ScalingPlan::per_epoch(int epochs) const {
  std::vector<PlanStage> out;
  out.reserve(static_cast<std::size_t>(std::max(0, epochs)));
  for (int e = 0; e < epochs; ++e) out.push_back(stage_at(e));
  return out;
}

std::string ScalingPlan::to_json() const {
  auto hp_json = [](const HyperParams& hp) {
    return nlohmann::ordered_json{{"eta", hp.eta},         {"rho", hp.rho},
                                  {"batch_size", hp.batch_size}, {"beta1", hp.beta1},
                                  {"beta2", hp.beta2},     {"epsilon", hp.epsilon},
                                  {"weight_decay", hp.weight_decay}};
  };
  nlohmann::ordered_json doc;
  doc["optimizer"] = std::string(to_string(optimizer));
  doc["transition"] = std::string(to_string(transition));
  doc["base"] = hp_json(base);
  doc["stages"] = nlohmann::ordered_json::array();
  for (const PlanStage& s : stages) {
    nlohmann::ordered_json stage{{"start_epoch", s.start_epoch},
                                 {"batch_size", s.batch_size},
                                 {"kappa", s.kappa}};
    const auto scaled = hp_json(s.scaled);
    for (const auto& [k, v] : scaled.items()) {
      if (k != "batch_size") stage[k] = v;
    }
    doc["stages"].push_back(stage);
  }
  return doc.dump(2) + "\n";
}

ScalingPlan progressive_schedule(const HyperParams& base, OptimizerKind optimizer,
                                 const std::vector<ScheduleEntry>& schedule,
                                 Transition transition) {
  base.validate();
  if (schedule.empty()) fail(ErrorCode::invalid_argument, "schedule must not be empty");
  ScalingPlan plan;
  plan.base = base;
  plan.optimizer = optimizer;
  plan.transition = transition;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const ScheduleEntry& e = schedule[i];
    if (e.batch_size < 1) fail(ErrorCode::invalid_argument, "batch sizes must be positive");
    if (i > 0 && !(e.epoch > schedule[i - 1].epoch)) {
      fail(ErrorCode::invalid_argument, "schedule epochs must be strictly increasing");
    }
    plan.stages.push_back(
        make_stage(base, optimizer, e.epoch, e.batch_size, static_cast<double>(i)));
  }
  return plan;
}

}  // namespace emascale
