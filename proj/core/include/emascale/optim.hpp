#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "emascale/param_vector.hpp"
#include "emascale/rng.hpp"

namespace emascale {

/// out <- F(theta, zeta). Dimensions of all three spans are equal.
using VectorField = std::function<void(std::span<const double> theta,
                                       std::span<const double> zeta,
                                       std::span<double> out)>;

/// Noisy gradient oracle: g = grad f(theta, zeta) + sigma * eps with
/// eps ~ N(0, diag(Sigma(theta, zeta)) / kappa). Only diagonal Gaussian noise
/// is supported.
struct NgosSpec {
  VectorField mean_grad;
  VectorField cov_diag;
  double noise_scale = 1.0;
  /// False when f does not depend on zeta (Polyak-Ruppert averaging); lets
  /// runners share one theta path between several EMAs.
  bool depends_on_ema = true;
};

/// Allocation-free sampler over a fixed dimension.
class NgosSampler {
 public:
  NgosSampler(const NgosSpec& spec, std::size_t dim);

  /// Draws dim standard normals from `rng`.
  void sample(std::span<const double> theta, std::span<const double> zeta, double kappa,
              RngStream& rng, std::span<double> out);

  /// Uses caller-supplied standard normals `xi` (common random numbers).
  void sample_with(std::span<const double> theta, std::span<const double> zeta,
                   double kappa, std::span<const double> xi, std::span<double> out);

  /// Writes the noiseless gradient.
  void mean(std::span<const double> theta, std::span<const double> zeta,
            std::span<double> out);

 private:
  const NgosSpec* spec_;
  std::vector<double> cov_;
  std::vector<double> xi_;
};

ParamVector ngos_sample(const NgosSpec& spec, const ParamVector& theta,
                        const ParamVector& zeta, double kappa, RngStream& rng);

struct OptimizerState {
  OptimizerState() = default;
  explicit OptimizerState(std::size_t dim)
      : momentum_buf(dim), m(dim), v(dim) {}

  ParamVector momentum_buf;
  ParamVector m;
  ParamVector v;
  std::uint64_t step = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct StepResult {
  OptimizerState state;
  ParamVector theta;
};

enum class WeightDecayMode { coupled, decoupled };

// Pure steppers: same inputs give the same outputs; inputs are not modified.

/// theta - eta * g
ParamVector sgd_step(const ParamVector& theta, const ParamVector& g, double eta);

/// buf' = mu * buf + g; theta' = theta - eta * buf'
StepResult heavy_ball_step(const OptimizerState& state, const ParamVector& theta,
                           const ParamVector& g, double eta, double mu);

/// v' = gamma v + (1 - gamma) g^2; theta' = theta - eta g / (sqrt(v) + eps),
/// with the previous v in the denominator.
StepResult rmsprop_step(const OptimizerState& state, const ParamVector& theta,
                        const ParamVector& g, double eta, double gamma, double epsilon);

/// Bias-corrected Adam whose denominator uses the previous bias-corrected
/// second moment v~_k. The very first step has no previous v~ and uses v~_1.
StepResult adam_step(const OptimizerState& state, const ParamVector& theta,
                     const ParamVector& g, double eta, double beta1, double beta2,
                     double epsilon);

/// coupled: (1 - eta lambda) theta; decoupled: (1 - lambda) theta.
ParamVector apply_weight_decay(const ParamVector& theta, double eta, double lambda,
                               WeightDecayMode mode);

/// In-place kernels behind the pure steppers, for hot loops.
namespace inplace {

void sgd_step(std::span<double> theta, std::span<const double> g, double eta);
void heavy_ball_step(OptimizerState& state, std::span<double> theta,
                     std::span<const double> g, double eta, double mu);
void rmsprop_step(OptimizerState& state, std::span<double> theta,
                  std::span<const double> g, double eta, double gamma, double epsilon);
void adam_step(OptimizerState& state, std::span<double> theta, std::span<const double> g,
               double eta, double beta1, double beta2, double epsilon);
void apply_weight_decay(std::span<double> theta, double eta, double lambda,
                        WeightDecayMode mode);

}  // namespace inplace

}  // namespace emascale
