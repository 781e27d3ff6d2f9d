#include "emascale/time_grid.hpp"

#include <algorithm>
#include <cmath>

#include "emascale/error.hpp"

namespace emascale {

std::string_view to_string(OptimizerFamily family) {
  return family == OptimizerFamily::sgd_like ? "sgd_like" : "adaptive";
}

double step_time(const HyperParams& hp, OptimizerFamily family, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    fail(ErrorCode::invalid_argument, "kappa must be > 0");
  }
  if (family == OptimizerFamily::sgd_like) return kappa * hp.eta;
  const double eta_hat = std::sqrt(kappa) * hp.eta;
  return eta_hat * eta_hat;
}

void TimeGrid::validate() const {
  if (!(total_time > 0.0) || !std::isfinite(total_time)) {
    fail(ErrorCode::invalid_argument, "total_time must be > 0");
  }
  if (!(base_eta > 0.0)) fail(ErrorCode::invalid_argument, "base_eta must be > 0");
}

std::int64_t iterations_for(const TimeGrid& grid, double kappa) {
  grid.validate();
  HyperParams hp;
  hp.eta = grid.base_eta;
  const double quotient = grid.total_time / step_time(hp, grid.family, kappa);
  const double nearest = std::round(quotient);
  const double snapped =
      std::abs(quotient - nearest) <= 1e-9 * std::max(1.0, quotient) ? nearest : std::floor(quotient);
  if (snapped < 1.0) {
    fail(ErrorCode::unsupported_scaling, "scaling leaves less than one iteration in the horizon");
  }
  return static_cast<std::int64_t>(snapped);
}

}  // namespace emascale
