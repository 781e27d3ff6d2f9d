#include "emascale/error.hpp"

namespace emascale {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unsupported_scaling: return "unsupported-scaling";
    case ErrorCode::invalid_problem: return "invalid-problem";
    case ErrorCode::unstable_decay: return "unstable-decay";
    case ErrorCode::scaling_out_of_range: return "scaling-out-of-range";
    case ErrorCode::diverged: return "diverged";
    case ErrorCode::insufficient_samples: return "insufficient-samples";
    case ErrorCode::config_error: return "config-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<double> where)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      where_(where) {}

void fail(ErrorCode code, const std::string& message, std::optional<double> where) {
  throw Error(code, message, where);
}

}  // namespace emascale
