#include "emascale/param_vector.hpp"

#include <cmath>
#include <string>

#include "emascale/error.hpp"

namespace emascale {

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool ParamVector::all_finite() const noexcept { return emascale::all_finite(values_); }

double ParamVector::squared_norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double ParamVector::norm() const noexcept { return std::sqrt(squared_norm()); }

void check_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorCode::invalid_argument, std::string(what) + ": dimension mismatch (" +
                                          std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void check_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values)) fail(ErrorCode::diverged, std::string(what) + ": non-finite value");
}

}  // namespace emascale
