#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "emascale/experiments/parabola.hpp"
#include "emascale/hyperparams.hpp"
#include "emascale/moments.hpp"
#include "emascale/observable.hpp"

namespace emascale {

/// An NGOS-driven SGD + EMA problem for the Err comparisons. `key`
/// identifies the problem in the baseline cache.
struct ErrProblem {
  ErrProblem(const ParabolaProblem& parabola);  // NOLINT(google-explicit-constructor)
  ErrProblem(NgosSpec ngos, ParamVector theta0, std::string key);

  NgosSpec ngos;
  ParamVector theta0;  // zeta0 = theta0
  std::string key;
};

struct ErrSettings {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double total_time = 1.0;
  /// Throw insufficient_samples (instead of flagging) when ci > 10% of err.
  bool require_precision = false;
};

struct ErrResult {
  double rho_used = 0.0;
  double kappa = 1.0;
  Observable g;
  double err = 0.0;
  double ci_halfwidth = 0.0;
  bool insufficient = false;  // ci_halfwidth > 10% of err
};

/// Baseline (kappa = 1) mean trajectories keyed by problem, hyperparameters,
/// observable, replicate range and seed.
class BaselineCache {
 public:
  const TrajectoryMoments* find(const std::string& key) const;
  const TrajectoryMoments& insert(const std::string& key, TrajectoryMoments moments);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, TrajectoryMoments> entries_;
};

/// Aligned grid of a kappa-scaled run against the baseline: baseline steps
/// 0, kappa, 2 kappa, ... up to floor(N / kappa) kappa, where N = T / eta_B.
struct AlignedGrid {
  std::int64_t base_iterations = 0;
  std::int64_t kappa = 1;
  std::int64_t scaled_iterations = 0;
};

/// kappa must be a positive integer no larger than N.
AlignedGrid aligned_grid(const HyperParams& hp_base, double kappa, double total_time);

/// Err(rho, kappa, g) for SGD. The scaled run uses
/// eta_hat = kappa eta and noise covariance / kappa; rho_candidate is used
/// as given. Baseline and scaled replicates are independent.
ErrResult approximation_error(const ErrProblem& problem, const HyperParams& hp_base,
                              double rho_candidate, double kappa, const Observable& g,
                              const ErrSettings& settings, BaselineCache* cache = nullptr);

/// Err plus the aligned mean trajectories behind it.
struct ErrTrace {
  ErrResult result;
  std::vector<double> t;              // continuous time of each aligned point
  std::vector<double> baseline_mean;  // E g at baseline steps 0, kappa, 2 kappa, ...
  std::vector<double> scaled_mean;    // E g at scaled steps 0, 1, 2, ...
};

std::vector<ErrTrace> approximation_error_traces(const ErrProblem& problem,
                                                 const HyperParams& hp_base,
                                                 const std::vector<double>& rhos,
                                                 double kappa, const Observable& g,
                                                 const ErrSettings& settings,
                                                 BaselineCache* cache = nullptr);

/// Err for several candidate momenta from one set of scaled replicates
/// (common random numbers across candidates). Replicates
/// [first, first + count) of both processes are used.
std::vector<ErrResult> approximation_error_curve(const ErrProblem& problem,
                                                 const HyperParams& hp_base,
                                                 const std::vector<double>& rhos,
                                                 double kappa, const Observable& g,
                                                 const ErrSettings& settings,
                                                 std::size_t first, std::size_t count,
                                                 BaselineCache* cache = nullptr);

/// Candidate momenta uniform in log(1 - rho). The default span runs from
/// rho_B^{4 kappa} to 1 - (1 - rho_B) / 4.
struct RhoGrid {
  std::size_t points = 41;
  double log_lo = 0.0;  // log(1 - rho) at the low-momentum end
  double log_hi = 0.0;

  static RhoGrid around(double rho_base, double kappa, std::size_t points = 41);
  std::vector<double> rhos() const;
};

struct RhoSearchResult {
  double kappa = 1.0;
  double rho_star = 0.0;
  double rho_rule = 0.0;  // rho_B^kappa
  double log_gap = 0.0;   // |log(1 - rho*) - log(1 - rho_rule)|
  ErrResult holdout;      // Err at rho* on the holdout replicates
  double target_model_err = 0.0;  // same comparison on theta instead of zeta
  bool inconclusive = false;      // search curve flatter than 2 CI
  std::vector<ErrResult> curve;   // search replicates
};

/// Splits the replicates in half: the first half picks rho*, the second
/// half reports its error.
RhoSearchResult rho_star_search(const ErrProblem& problem, const HyperParams& hp_base,
                                double kappa, const Observable& g, const RhoGrid& grid,
                                const ErrSettings& settings, BaselineCache* cache = nullptr);

struct CorollaryResult {
  ErrResult with_rule;     // rho_hat = rho^kappa
  ErrResult without_rule;  // rho_hat = rho
};

/// Err with and without the EMA Scaling Rule at one kappa.
CorollaryResult corollary_check(const ErrProblem& problem, const HyperParams& hp_base,
                                double kappa, const Observable& g, const ErrSettings& settings,
                                BaselineCache* cache = nullptr);

}  // namespace emascale
