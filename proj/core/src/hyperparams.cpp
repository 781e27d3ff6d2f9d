#include "emascale/hyperparams.hpp"

#include <cmath>

#include "emascale/error.hpp"

namespace emascale {

namespace {

const char* first_violation(const HyperParams& hp) {
  if (!(std::isfinite(hp.eta) && hp.eta > 0.0)) return "eta must be > 0";
  if (!(hp.rho >= 0.0 && hp.rho < 1.0)) return "rho must lie in [0, 1)";
  if (hp.batch_size < 1) return "batch_size must be >= 1";
  if (!(hp.beta1 >= 0.0 && hp.beta1 < 1.0)) return "beta1 must lie in [0, 1)";
  if (!(hp.beta2 >= 0.0 && hp.beta2 < 1.0)) return "beta2 must lie in [0, 1)";
  if (!(std::isfinite(hp.epsilon) && hp.epsilon > 0.0)) return "epsilon must be > 0";
  if (!(std::isfinite(hp.weight_decay) && hp.weight_decay >= 0.0)) {
    return "weight_decay must be >= 0";
  }
  return nullptr;
}

}  // namespace

void HyperParams::validate() const {
  if (const char* why = first_violation(*this)) fail(ErrorCode::invalid_argument, why);
}

bool HyperParams::valid() const noexcept { return first_violation(*this) == nullptr; }

}  // namespace emascale
