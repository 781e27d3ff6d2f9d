#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emascale/hyperparams.hpp"
#include "emascale/observable.hpp"
#include "emascale/optim.hpp"
#include "emascale/param_vector.hpp"
#include "emascale/rng.hpp"
#include "emascale/time_grid.hpp"

namespace emascale {

enum class SdeFamily { sgd_ema, rmsprop_ema, adam_ema };

std::string_view to_string(SdeFamily family);
SdeFamily parse_sde_family(std::string_view text);
OptimizerFamily optimizer_family(SdeFamily family);

/// Constants of the limiting SDEs. `ngos` supplies grad f and diag Sigma and
/// must outlive the spec. sigma0 already contains the NGOS noise scale.
struct SdeSpec {
  SdeFamily family = SdeFamily::sgd_ema;
  const NgosSpec* ngos = nullptr;
  double sigma0 = 0.0;
  double beta0 = 0.0;
  double gamma0 = 0.0;    // rmsprop: (1 - gamma) / eta^2
  double c1 = 0.0;        // adam: (1 - beta1) / eta^2
  double c2 = 0.0;        // adam: (1 - beta2) / eta^2
  double epsilon0 = 0.0;  // adaptive: epsilon * eta

  /// Constants matching a discrete run at `hp`. sgd_ema: sigma0 = sigma
  /// sqrt(eta / noise_kappa), beta0 = (1 - rho) / eta. Adaptive families use
  /// eta^2 as the time step and sigma0 = sigma eta / sqrt(noise_kappa).
  static SdeSpec from_discrete(SdeFamily family, const NgosSpec& ngos, const HyperParams& hp,
                               double noise_kappa = 1.0);

  void validate() const;
};

struct SdeState {
  SdeState() = default;
  explicit SdeState(ParamVector theta0)
      : theta(theta0), zeta(theta0), u(theta0.size()), m(theta0.size()) {}

  ParamVector theta;
  ParamVector zeta;
  ParamVector u;  // second-moment process (adaptive families)
  ParamVector m;  // first-moment process (adam)
};

/// Euler-Maruyama stepper. The Z update uses only the drift beta0 (Theta - Z).
class SdeIntegrator {
 public:
  SdeIntegrator(const SdeSpec& spec, SdeState x0, double h);

  /// Draws dW ~ N(0, h I) from `rng`.
  void step(RngStream& rng);
  /// Uses caller-supplied Brownian increments.
  void step_with_increments(std::span<const double> dw);

  const SdeState& state() const noexcept { return x_; }
  double time() const noexcept { return static_cast<double>(steps_) * h_; }
  double h() const noexcept { return h_; }
  std::int64_t steps() const noexcept { return steps_; }

 private:
  const SdeSpec* spec_;
  NgosSampler sampler_;
  SdeState x_;
  double h_;
  std::int64_t steps_ = 0;
  ParamVector grad_;
  ParamVector cov_;
  ParamVector dw_;
  ParamVector next_theta_;
};

struct SdePath {
  double h = 0.0;
  std::vector<SdeState> states;  // states[i] at time i * h
};

/// floor(T / h) + 1 states starting from x0.
SdePath integrate(const SdeSpec& spec, const SdeState& x0, double total_time, double h,
                  RngStream& rng);

enum class WeakErrorCoupling {
  common_noise,  // discrete noise built from the SDE's Brownian increments
  independent,   // separate streams for the two processes
};

/// Discrete optimiser + EMA and its SDE on [0, total_time]. The ladder keeps
/// the NGOS, the noise scale and beta0 (and gamma0 / c1 / c2) fixed while eta
/// varies; rho and the betas follow from them.
struct WeakErrorProblem {
  SdeFamily family = SdeFamily::sgd_ema;
  const NgosSpec* ngos = nullptr;
  ParamVector theta0;
  HyperParams hp;  // reference values; eta is replaced by each ladder entry
  double total_time = 1.0;
  double beta0 = 1.0;
  double gamma0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct WeakErrorOptions {
  double h_divisor = 16.0;  // SDE step h = min(eta_list) / h_divisor (sgd) or eta_min^2 / h_divisor
  WeakErrorCoupling coupling = WeakErrorCoupling::common_noise;
  std::size_t threads = 1;
  double ci_tolerance = 0.0;  // > 0: insufficient_samples when ci > tolerance * error
};

struct WeakErrorPoint {
  double eta = 0.0;
  double max_weak_error = 0.0;
  double ci_halfwidth = 0.0;
  std::size_t replicates = 0;
};

/// Discrete hyperparameters realising the problem's SDE constants at `eta`.
HyperParams ladder_hyperparams(const WeakErrorProblem& problem, double eta);

/// For each eta (strictly decreasing), max over discrete grid times of
/// |E g(Theta, Z) - E g(theta, zeta)|.
std::vector<WeakErrorPoint> weak_error(const WeakErrorProblem& problem, const Observable& g,
                                       const std::vector<double>& eta_list,
                                       std::size_t replicates, std::uint64_t seed,
                                       const WeakErrorOptions& options = {});

inline constexpr const char* kWeakErrorCsvHeader = "eta,max_weak_error,ci_halfwidth,replicates";

std::string weak_error_to_csv(const std::vector<WeakErrorPoint>& points);

}  // namespace emascale
