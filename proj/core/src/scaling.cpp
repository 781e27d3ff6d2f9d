#include "emascale/scaling.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "emascale/error.hpp"
#include "emascale/format.hpp"

namespace emascale {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::heavy_ball: return "heavy_ball";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamw: return "adamw";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "heavy_ball" || text == "momentum") return OptimizerKind::heavy_ball;
  if (text == "rmsprop") return OptimizerKind::rmsprop;
  if (text == "adam") return OptimizerKind::adam;
  if (text == "adamw") return OptimizerKind::adamw;
  fail(ErrorCode::invalid_argument, "unknown optimizer '" + std::string(text) + "'");
}

double ScalingRequest::kappa() const {
  if (base.batch_size < 1 || target_batch < 1) {
    fail(ErrorCode::invalid_argument, "batch sizes must be positive");
  }
  return static_cast<double>(target_batch) / static_cast<double>(base.batch_size);
}

namespace {

void check_kappa(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorCode::invalid_argument, "kappa must be > 0");
}

bool uses_sqrt_rule(OptimizerKind kind) {
  return kind == OptimizerKind::rmsprop || kind == OptimizerKind::adam ||
         kind == OptimizerKind::adamw;
}

double scale_beta(double beta, double kappa, const char* name, bool strict = true) {
  const double scaled = 1.0 - kappa * (1.0 - beta);
  if (scaled < 0.0) {
    if (!strict) return std::numeric_limits<double>::quiet_NaN();
    fail(ErrorCode::scaling_out_of_range,
         std::string(name) + " scaled below 0 (1 - kappa (1 - " + name + ") = " +
             format_shortest(scaled) + ")");
  }
  return scaled;
}

// The volatile store keeps GCC 11 -O3 from vectorising these conversions,
// which it miscompiles (some fields come back unrounded).
double to_binary32(double x) {
  volatile float f = static_cast<float>(x);
  return f;
}

std::int64_t scaled_batch(std::int64_t base_batch, double kappa) {
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(base_batch) * kappa));
}

}  // namespace

double scale_learning_rate(double eta, double kappa, OptimizerKind optimizer) {
  check_kappa(kappa);
  return uses_sqrt_rule(optimizer) ? std::sqrt(kappa) * eta : kappa * eta;
}

double scale_ema(double rho, double kappa, EmaVariant variant) {
  check_kappa(kappa);
  if (!(rho >= 0.0 && rho < 1.0)) fail(ErrorCode::invalid_argument, "rho must lie in [0, 1)");
  if (variant == EmaVariant::exponential) return std::pow(rho, kappa);
  return scale_beta(rho, kappa, "rho");
}

double scale_weight_decay(double lambda, double eta, double eta_hat, double kappa,
                          bool coupled) {
  check_kappa(kappa);
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "weight decay must be >= 0");
  if (lambda == 0.0) return 0.0;
  if (coupled) {
    if (!(eta > 0.0 && eta_hat > 0.0)) fail(ErrorCode::invalid_argument, "learning rates must be > 0");
    return eta / eta_hat * kappa * lambda;
  }
  return -std::expm1(kappa * std::log1p(-lambda));
}

namespace {

HyperParams scale_fields(const HyperParams& base, double kappa, OptimizerKind optimizer,
                         EmaVariant ema_variant, bool strict) {
  check_kappa(kappa);
  base.validate();
  HyperParams out = base;
  out.batch_size = scaled_batch(base.batch_size, kappa);
  out.eta = scale_learning_rate(base.eta, kappa, optimizer);
  out.rho = ema_variant == EmaVariant::exponential ? scale_ema(base.rho, kappa, ema_variant)
                                                   : scale_beta(base.rho, kappa, "rho", strict);
  switch (optimizer) {
    case OptimizerKind::sgd:
    case OptimizerKind::heavy_ball:
      break;
    case OptimizerKind::rmsprop:
      out.beta2 = scale_beta(base.beta2, kappa, "beta2", strict);
      out.epsilon = base.epsilon / std::sqrt(kappa);
      break;
    case OptimizerKind::adam:
    case OptimizerKind::adamw:
      out.beta1 = scale_beta(base.beta1, kappa, "beta1", strict);
      out.beta2 = scale_beta(base.beta2, kappa, "beta2", strict);
      out.epsilon = base.epsilon / std::sqrt(kappa);
      break;
  }
  out.weight_decay = scale_weight_decay(base.weight_decay, base.eta, out.eta, kappa,
                                        optimizer != OptimizerKind::adamw);
  return out;
}

}  // namespace

HyperParams scale(const HyperParams& base, double kappa, OptimizerKind optimizer,
                  EmaVariant ema_variant) {
  return scale_fields(base, kappa, optimizer, ema_variant, true);
}

HyperParams scale_sgd(const ScalingRequest& req) {
  if (req.optimizer != OptimizerKind::sgd && req.optimizer != OptimizerKind::heavy_ball) {
    fail(ErrorCode::invalid_argument, "scale_sgd needs optimizer sgd or heavy_ball");
  }
  HyperParams out = scale(req.base, req.kappa(), req.optimizer, req.ema_variant);
  out.batch_size = req.target_batch;
  return out;
}

HyperParams scale_rmsprop(const ScalingRequest& req) {
  if (req.optimizer != OptimizerKind::rmsprop) {
    fail(ErrorCode::invalid_argument, "scale_rmsprop needs optimizer rmsprop");
  }
  HyperParams out = scale(req.base, req.kappa(), req.optimizer, req.ema_variant);
  out.batch_size = req.target_batch;
  return out;
}

HyperParams scale_adam(const ScalingRequest& req) {
  if (req.optimizer != OptimizerKind::adam && req.optimizer != OptimizerKind::adamw) {
    fail(ErrorCode::invalid_argument, "scale_adam needs optimizer adam or adamw");
  }
  HyperParams out = scale(req.base, req.kappa(), req.optimizer, req.ema_variant);
  out.batch_size = req.target_batch;
  return out;
}

HyperParams scale(const ScalingRequest& req) {
  switch (req.optimizer) {
    case OptimizerKind::sgd:
    case OptimizerKind::heavy_ball: return scale_sgd(req);
    case OptimizerKind::rmsprop: return scale_rmsprop(req);
    case OptimizerKind::adam:
    case OptimizerKind::adamw: return scale_adam(req);
  }
  return req.base;
}

MomentumBounds momentum_bounds(double rho_base, double machine_eps) {
  if (!(rho_base > 0.0 && rho_base < 1.0)) fail(ErrorCode::invalid_argument, "rho must lie in (0, 1)");
  if (!(machine_eps > 0.0 && machine_eps < 1.0)) {
    fail(ErrorCode::invalid_argument, "machine epsilon must lie in (0, 1)");
  }
  const double log_rho = std::log(rho_base);
  return {std::log1p(-machine_eps) / log_rho, std::log(machine_eps) / log_rho};
}

std::vector<TableRow> emit_hparam_table(const HyperParams& base,
                                        std::span<const std::int64_t> batch_sizes,
                                        OptimizerKind rule, TablePrecision precision) {
  HyperParams reference = base;
  if (precision == TablePrecision::float32) {
    for (double* field : {&reference.eta, &reference.rho, &reference.beta1, &reference.beta2,
                          &reference.epsilon, &reference.weight_decay}) {
      *field = to_binary32(*field);
    }
  }
  std::vector<TableRow> rows;
  rows.reserve(batch_sizes.size());
  for (std::int64_t b : batch_sizes) {
    if (b < 1) fail(ErrorCode::invalid_argument, "batch sizes must be positive");
    const double kappa = static_cast<double>(b) / static_cast<double>(reference.batch_size);
    // Cells whose rule leaves the valid range are reported as NaN.
    HyperParams scaled = scale_fields(reference, kappa, rule, EmaVariant::exponential, false);
    scaled.batch_size = b;
    rows.push_back({b, kappa, scaled});
  }
  return rows;
}

std::string table_to_csv(std::span<const TableRow> rows, bool paper_rounding) {
  auto fmt = [paper_rounding](double x) {
    return paper_rounding ? format_fixed5(x) : format_shortest(x);
  };
  std::ostringstream out;
  out << kTableCsvHeader << '\n';
  for (const TableRow& r : rows) {
    out << r.batch_size << ',' << format_shortest(r.kappa) << ',' << fmt(r.scaled.eta) << ','
        << fmt(r.scaled.rho) << ',' << fmt(r.scaled.beta1) << ',' << fmt(r.scaled.beta2) << ','
        << fmt(r.scaled.epsilon) << ',' << fmt(r.scaled.weight_decay) << '\n';
  }
  return out.str();
}

}  // namespace emascale
