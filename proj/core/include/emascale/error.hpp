#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emascale {

enum class ErrorCode {
  invalid_argument,
  unsupported_scaling,
  invalid_problem,
  unstable_decay,
  scaling_out_of_range,
  diverged,
  insufficient_samples,
  config_error,
};

std::string_view to_string(ErrorCode code);

/// Exception type for every failure raised by the library. `where()` carries
/// the step, time or stage index at which the failure was detected, when
/// there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<double> where = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<double> where() const noexcept { return where_; }

 private:
  ErrorCode code_;
  std::optional<double> where_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message,
                       std::optional<double> where = std::nullopt);

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) fail(code, message);
}

}  // namespace emascale
