#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emascale/hyperparams.hpp"

namespace emascale {

enum class OptimizerKind { sgd, heavy_ball, rmsprop, adam, adamw };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

enum class EmaVariant { exponential, linear };

/// Scale hyperparameters defined at base.batch_size to target_batch.
struct ScalingRequest {
  HyperParams base;
  std::int64_t target_batch = 256;
  OptimizerKind optimizer = OptimizerKind::sgd;
  EmaVariant ema_variant = EmaVariant::exponential;

  double kappa() const;
};

/// eta_hat = kappa eta, rho_hat = rho^kappa, coupled weight decay.
HyperParams scale_sgd(const ScalingRequest& req);

/// eta_hat = sqrt(kappa) eta, beta2_hat = 1 - kappa (1 - beta2) (beta2 plays
/// the role of RMSProp's gamma), eps_hat = eps / sqrt(kappa), rho_hat = rho^kappa.
HyperParams scale_rmsprop(const ScalingRequest& req);

/// eta_hat = sqrt(kappa) eta, both betas linear in (1 - beta),
/// eps_hat = eps / sqrt(kappa), rho_hat = rho^kappa. Weight decay is coupled
/// for adam and decoupled for adamw.
HyperParams scale_adam(const ScalingRequest& req);

/// Dispatches on req.optimizer.
HyperParams scale(const ScalingRequest& req);

/// Same rules for a real-valued kappa.
HyperParams scale(const HyperParams& base, double kappa, OptimizerKind optimizer,
                  EmaVariant ema_variant = EmaVariant::exponential);

/// exponential: rho^kappa; linear: 1 - kappa (1 - rho).
double scale_ema(double rho, double kappa, EmaVariant variant = EmaVariant::exponential);

/// coupled: (eta / eta_hat) kappa lambda; decoupled: 1 - (1 - lambda)^kappa.
double scale_weight_decay(double lambda, double eta, double eta_hat, double kappa,
                          bool coupled);

/// Learning-rate rule of an optimiser: kappa eta or sqrt(kappa) eta.
double scale_learning_rate(double eta, double kappa, OptimizerKind optimizer);

struct MomentumBounds {
  double kappa_min = 0.0;  // below this rho^kappa rounds above 1 - eps
  double kappa_max = 0.0;  // above this rho^kappa falls below eps
};

/// Range of kappa for which rho_base^kappa stays representable in [eps, 1 - eps].
MomentumBounds momentum_bounds(double rho_base, double machine_eps);

enum class TablePrecision {
  float64,
  /// Base hyperparameters are rounded to binary32 before scaling, which is
  /// how the commonly printed reference tables were produced.
  float32,
};

struct TableRow {
  std::int64_t batch_size = 0;
  double kappa = 1.0;
  HyperParams scaled;
};

/// One row per batch size with every hyperparameter scaled by `rule`. Cells
/// whose rule leaves the valid range (e.g. a negative beta) are NaN.
std::vector<TableRow> emit_hparam_table(const HyperParams& base,
                                        std::span<const std::int64_t> batch_sizes,
                                        OptimizerKind rule,
                                        TablePrecision precision = TablePrecision::float64);

inline constexpr std::string_view kTableCsvHeader =
    "batch_size,kappa,eta,rho,beta1,beta2,epsilon,weight_decay";

/// CSV with kTableCsvHeader. paper_rounding renders 5-decimal values;
/// otherwise shortest round-trip values.
std::string table_to_csv(std::span<const TableRow> rows, bool paper_rounding);

}  // namespace emascale
