#include "emascale/observable.hpp"

#include <cmath>
#include <regex>

#include "emascale/error.hpp"
#include "emascale/param_vector.hpp"

namespace emascale {

std::string Observable::name() const {
  std::string prefix = target == Target::ema ? "ema." : "model.";
  switch (kind) {
    case Kind::identity_coord: return prefix + "identity_coord(" + std::to_string(index) + ")";
    case Kind::squared_norm: return prefix + "squared_norm";
    case Kind::coord_square: return prefix + "coord_square(" + std::to_string(index) + ")";
    case Kind::custom_moment: return prefix + "custom_moment(" + std::to_string(power) + ")";
  }
  return prefix + "unknown";
}

Observable Observable::parse(const std::string& text) {
  static const std::regex pattern(
      R"(^(?:(ema|model)\.)?(identity_coord|squared_norm|coord_square|custom_moment)(?:\((\d+)\))?$)");
  std::smatch match;
  if (!std::regex_match(text, match, pattern)) {
    fail(ErrorCode::invalid_argument, "unrecognised observable '" + text + "'");
  }
  Observable obs;
  obs.target = match[1] == "model" ? Target::model : Target::ema;
  const std::string kind = match[2];
  const bool has_arg = match[3].matched;
  const long arg = has_arg ? std::stol(match[3]) : 0;
  if (kind == "squared_norm") {
    if (has_arg) fail(ErrorCode::invalid_argument, "squared_norm takes no argument");
    obs.kind = Kind::squared_norm;
    return obs;
  }
  if (!has_arg) fail(ErrorCode::invalid_argument, kind + " needs an argument");
  if (kind == "identity_coord") {
    obs.kind = Kind::identity_coord;
    obs.index = static_cast<std::size_t>(arg);
    obs.power = 1;
  } else if (kind == "coord_square") {
    obs.kind = Kind::coord_square;
    obs.index = static_cast<std::size_t>(arg);
  } else {
    obs.kind = Kind::custom_moment;
    obs.power = static_cast<int>(arg);
    if (obs.power < 1) fail(ErrorCode::invalid_argument, "custom_moment power must be >= 1");
  }
  return obs;
}

double evaluate(const Observable& obs, std::span<const double> theta,
                std::span<const double> zeta) {
  check_same_dim(theta.size(), zeta.size(), "evaluate");
  const std::span<const double> x = obs.target == Observable::Target::ema ? zeta : theta;
  switch (obs.kind) {
    case Observable::Kind::identity_coord:
    case Observable::Kind::coord_square: {
      if (obs.index >= x.size()) fail(ErrorCode::invalid_argument, "observable index out of range");
      const double v = x[obs.index];
      return obs.kind == Observable::Kind::identity_coord ? v : v * v;
    }
    case Observable::Kind::squared_norm: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return s;
    }
    case Observable::Kind::custom_moment: {
      if (obs.power < 1) fail(ErrorCode::invalid_argument, "custom_moment power must be >= 1");
      if (x.empty()) return 0.0;
      double s = 0.0;
      for (double v : x) s += std::pow(v, obs.power);
      return s / static_cast<double>(x.size());
    }
  }
  return 0.0;
}

}  // namespace emascale
