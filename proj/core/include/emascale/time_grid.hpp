#pragma once

#include <cstdint>
#include <string_view>

#include "emascale/hyperparams.hpp"

namespace emascale {

enum class OptimizerFamily { sgd_like, adaptive };

std::string_view to_string(OptimizerFamily family);

/// Continuous-time increment of one iteration at scaling `kappa`: the
/// kappa-scaled learning rate for SGD-like optimisers (eta_hat = kappa * eta)
/// and its square for adaptive ones (eta_hat = sqrt(kappa) * eta).
double step_time(const HyperParams& hp, OptimizerFamily family, double kappa);

/// A fixed continuous-time horizon shared by every discretisation.
struct TimeGrid {
  double total_time = 1.0;
  double base_eta = 1e-4;
  OptimizerFamily family = OptimizerFamily::sgd_like;

  void validate() const;
};

/// floor(T / step_time(kappa)). Quotients within 1e-9 relative of an integer
/// snap to it so that e.g. 1 / (8 * 1e-4) gives 1250 rather than 1249.
std::int64_t iterations_for(const TimeGrid& grid, double kappa);

}  // namespace emascale
