#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "emascale/param_vector.hpp"
#include "emascale/rng.hpp"

namespace emascale {

/// Model EMA: zeta and its momentum rho in [0, 1).
struct EmaState {
  ParamVector zeta;
  double rho = 0.0;
};

/// zeta' = rho zeta + (1 - rho) theta, with theta the parameters the
/// gradient step started from.
EmaState ema_update(const EmaState& state, const ParamVector& theta);

/// Same formula applied to the post-step parameters theta_{t+1} (the BYOL
/// convention).
EmaState ema_update_post(const EmaState& state, const ParamVector& theta_next);

namespace inplace {
void ema_update(std::span<double> zeta, std::span<const double> theta, double rho);
}

/// 3x3 matrix acting on the stacked state (theta, zeta, g).
struct TransitionMatrix3 {
  std::array<std::array<double, 3>, 3> entries{};

  double operator()(int r, int c) const { return entries[r][c]; }
  double& operator()(int r, int c) { return entries[r][c]; }

  static TransitionMatrix3 identity();
  friend TransitionMatrix3 operator*(const TransitionMatrix3& a, const TransitionMatrix3& b);
  double max_abs_diff(const TransitionMatrix3& other) const;
};

/// One SGD step followed by one EMA step under a constant gradient:
/// rows (1, 0, -eta), (1 - rho, rho, 0), (0, 0, 1).
TransitionMatrix3 base_transition(double eta, double rho);

/// Closed form of base_transition(eta, rho)^kappa.
TransitionMatrix3 transition_power(double eta, double rho, std::int64_t kappa);

/// First-order error of the EMA scaling rule under constant gradients,
/// -eta (kappa - (1 - rho^kappa) / (1 - rho)). rho = 1 is rejected.
double delta_error(double eta, double rho, double kappa);

/// Variance reduction of an EMA over n iid inputs,
/// [(1 - rho^{2n}) / (1 + rho^{2n})] [(1 - rho) / (1 + rho)];
/// n = nullopt is the stationary limit (1 - rho) / (1 + rho).
double limiting_variance_prefactor(double rho, std::optional<std::uint64_t> n);

struct LimitingStats {
  double mean_ratio = 0.0;  // E[zeta*] / E[theta*]
  double var_ratio = 0.0;   // Var[zeta*] / Var[theta*]
  bool converged = true;    // false when horizon * (1 - rho) is too short
  std::uint64_t samples = 0;
};

struct LimitingStatsOptions {
  std::size_t replicates = 8;   // independent chains; horizon is split across them
  std::size_t threads = 1;
  double burn_in_horizons = 20.0;  // burn-in length in units of 1 / (1 - rho)
  double min_horizons = 100.0;     // horizon (1 - rho) below this sets converged = false
};

/// Runs the EMA over iid draws theta* ~ sampler and measures the stationary
/// mean and variance of zeta relative to those of theta*.
LimitingStats limiting_stats_check(const std::function<double(RngStream&)>& sampler,
                                   double rho, std::uint64_t horizon, std::uint64_t seed,
                                   const LimitingStatsOptions& options = {});

}  // namespace emascale
