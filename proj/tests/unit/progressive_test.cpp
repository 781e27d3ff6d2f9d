#include <gtest/gtest.h>

#include <cmath>

#include "emascale/error.hpp"
#include "emascale/progressive.hpp"
#include "json.hpp"

namespace emascale {
namespace {

HyperParams sgd_base() {
  HyperParams hp;
  hp.eta = 0.02;
  hp.rho = 0.992;
  hp.batch_size = 1024;
  return hp;
}

TEST(Progressive, SingleBaseStageIsIdentity) {
  const auto plan = progressive_schedule(sgd_base(), OptimizerKind::sgd, {{0, 1024}},
                                         Transition::step);
  ASSERT_EQ(plan.stages.size(), 1u);
  EXPECT_EQ(plan.stages[0].scaled, sgd_base());
  EXPECT_EQ(plan.stage_at(17).scaled, sgd_base());
}

TEST(Progressive, SgdStage) {
  const auto plan = progressive_schedule(sgd_base(), OptimizerKind::sgd, {{0, 1024}, {30, 8192}},
                                         Transition::step);
  EXPECT_EQ(plan.batch_size_at(29.9), 1024);
  const PlanStage s = plan.stage_at(30);
  EXPECT_EQ(s.batch_size, 8192);
  EXPECT_DOUBLE_EQ(s.scaled.eta, 0.16);
  EXPECT_NEAR(s.scaled.rho, 0.93776, 5e-6);
}

TEST(Progressive, AdamWStage) {
  HyperParams hp;
  hp.eta = 1e-3;
  hp.rho = 0.99;
  hp.batch_size = 4096;
  hp.beta1 = 0.9;
  hp.beta2 = 0.99;
  const auto plan =
      progressive_schedule(hp, OptimizerKind::adamw, {{0, 4096}, {5, 24576}}, Transition::step);
  EXPECT_DOUBLE_EQ(plan.stages[1].scaled.eta, std::sqrt(6.0) * 1e-3);
  EXPECT_NEAR(plan.stages[1].scaled.rho, 0.94148, 5e-6);
}

TEST(Progressive, SmoothInterpolatesFromBase) {
  const auto plan = progressive_schedule(sgd_base(), OptimizerKind::sgd,
                                         {{0, 1024}, {10, 1024}, {30, 8192}},
                                         Transition::smooth_linear);
  EXPECT_EQ(plan.batch_size_at(10), 1024);
  EXPECT_EQ(plan.batch_size_at(20), 4608);
  EXPECT_EQ(plan.batch_size_at(40), 8192);
  const PlanStage mid = plan.stage_at(20);
  EXPECT_DOUBLE_EQ(mid.kappa, 4.5);
  EXPECT_DOUBLE_EQ(mid.scaled.rho, std::pow(0.992, 4.5));
  const auto epochs = plan.per_epoch(40);
  ASSERT_EQ(epochs.size(), 40u);
  for (std::size_t e = 1; e < epochs.size(); ++e) {
    EXPECT_GE(epochs[e].batch_size, epochs[e - 1].batch_size);
  }
}

TEST(Progressive, RejectsBadSchedules) {
  EXPECT_THROW(progressive_schedule(sgd_base(), OptimizerKind::sgd, {{0, 1024}, {0, 2048}},
                                    Transition::step),
               Error);
  EXPECT_THROW(progressive_schedule(sgd_base(), OptimizerKind::sgd, {{0, 0}}, Transition::step),
               Error);
  HyperParams hp = sgd_base();
  try {
    progressive_schedule(hp, OptimizerKind::adam, {{0, 1024}, {3, 1024 * 64}}, Transition::step);
    FAIL() << "expected scaling_out_of_range";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::scaling_out_of_range);
    ASSERT_TRUE(e.where().has_value());
    EXPECT_EQ(*e.where(), 1.0);
  }
}

TEST(Progressive, JsonDocument) {
  const auto plan = progressive_schedule(sgd_base(), OptimizerKind::sgd, {{0, 1024}, {30, 8192}},
                                         Transition::step);
  const auto doc = nlohmann::json::parse(plan.to_json());
  EXPECT_EQ(doc["optimizer"], "sgd");
  EXPECT_EQ(doc["transition"], "step");
  ASSERT_EQ(doc["stages"].size(), 2u);
  EXPECT_EQ(doc["stages"][1]["batch_size"], 8192);
  EXPECT_EQ(doc["stages"][1]["start_epoch"], 30.0);
  for (const char* key : {"eta", "rho", "beta1", "beta2", "epsilon", "weight_decay", "kappa"}) {
    EXPECT_TRUE(doc["stages"][1].contains(key)) << key;
  }
}

TEST(Progressive, TransitionNames) {
  EXPECT_EQ(parse_transition("smooth"), Transition::smooth_linear);
  EXPECT_EQ(parse_transition(to_string(Transition::step)), Transition::step);
  EXPECT_THROW(parse_transition("cosine"), Error);
}

}  // namespace
}  // namespace emascale
