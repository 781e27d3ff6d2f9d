#pragma once

#include <cstdint>

namespace emascale {

/// Base optimisation settings, defined at a reference batch size.
struct HyperParams {
  double eta = 0.1;            // learning rate
  double rho = 0.99;           // EMA momentum
  std::int64_t batch_size = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  /// Throws invalid_argument naming the first violated field.
  void validate() const;
  bool valid() const noexcept;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

}  // namespace emascale
