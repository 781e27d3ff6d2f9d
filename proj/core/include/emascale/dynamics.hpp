#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emascale/hyperparams.hpp"
#include "emascale/moments.hpp"
#include "emascale/observable.hpp"
#include "emascale/optim.hpp"
#include "emascale/param_vector.hpp"
#include "emascale/rng.hpp"
#include "emascale/scaling.hpp"

namespace emascale {

enum class EmaConvention {
  pre_step,   // zeta_{k+1} = rho zeta_k + (1 - rho) theta_k
  post_step,  // zeta_{k+1} = rho zeta_k + (1 - rho) theta_{k+1}
};

struct CoupledConfig {
  OptimizerKind optimizer = OptimizerKind::sgd;
  HyperParams hp;               // already scaled; eta/rho/betas used as given
  double noise_kappa = 1.0;     // gradient covariance divisor
  EmaConvention ema = EmaConvention::pre_step;
  double divergence_norm = 1e12;
};

/// Discrete optimiser + model EMA driven by a noisy gradient oracle. One call
/// to step() draws a gradient at (theta_k, zeta_k), updates the EMA and takes
/// one optimiser step (with weight decay when hp.weight_decay > 0: coupled
/// for sgd/heavy_ball/rmsprop/adam, decoupled for adamw).
class CoupledProcess {
 public:
  CoupledProcess(const NgosSpec& spec, ParamVector theta0, ParamVector zeta0,
                 CoupledConfig config);

  void step(RngStream& rng);
  /// Step with caller-supplied standard normals (common random numbers).
  void step_with_noise(std::span<const double> xi);

  const ParamVector& theta() const noexcept { return theta_; }
  const ParamVector& zeta() const noexcept { return zeta_; }
  const OptimizerState& state() const noexcept { return state_; }
  std::int64_t iteration() const noexcept { return iteration_; }
  const CoupledConfig& config() const noexcept { return config_; }

  /// Change hyperparameters mid-run (progressive scaling).
  void set_hyperparams(const HyperParams& hp, double noise_kappa);

 private:
  void advance();

  const NgosSpec* spec_;
  NgosSampler sampler_;
  CoupledConfig config_;
  ParamVector theta_;
  ParamVector zeta_;
  ParamVector grad_;
  ParamVector theta_prev_;
  OptimizerState state_;
  std::int64_t iteration_ = 0;
};

/// Monte-Carlo run of many independent CoupledProcess replicates.
/// Replicate r draws from stream_id(role, first_replicate + r, variant).
struct EnsembleRequest {
  CoupledConfig config;
  ParamVector theta0;
  ParamVector zeta0;
  std::int64_t iterations = 0;
  std::int64_t record_stride = 1;  // observables recorded at k = 0, s, 2s, ...
  std::uint64_t seed = 0;
  StreamRole role = StreamRole::baseline;
  std::uint64_t variant = 0;
  std::size_t first_replicate = 0;
  std::size_t replicates = 0;
  std::size_t threads = 1;

  std::size_t record_count() const;
};

/// One TrajectoryMoments per observable, accumulated in replicate order.
std::vector<TrajectoryMoments> ensemble_moments(const NgosSpec& spec,
                                                const EnsembleRequest& request,
                                                const std::vector<Observable>& observables);

/// Runs the ensemble once per EMA momentum in `rhos` with common random
/// numbers across candidates. When the loss ignores the EMA, a single theta
/// path per replicate feeds every candidate EMA. Result is indexed
/// [candidate][observable].
std::vector<std::vector<TrajectoryMoments>> ensemble_moments_multi_rho(
    const NgosSpec& spec, const EnsembleRequest& request, const std::vector<double>& rhos,
    const std::vector<Observable>& observables);

}  // namespace emascale
