#pragma once

#include <string>

namespace emascale {

/// Shortest representation that parses back to the same double.
std::string format_shortest(double value);

/// Fixed 5-decimal rendering of the binary value with trailing zeros
/// removed, as in printed hyperparameter tables ("0.0125", "9.6").
std::string format_fixed5(double value);

}  // namespace emascale
