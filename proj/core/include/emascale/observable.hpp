#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace emascale {

/// Test function g(theta, zeta). Reads the EMA by default; `Target::model`
/// evaluates the same function on theta instead.
struct Observable {
  enum class Kind { identity_coord, squared_norm, coord_square, custom_moment };
  enum class Target { ema, model };

  Kind kind = Kind::squared_norm;
  std::size_t index = 0;  // identity_coord / coord_square
  int power = 2;          // custom_moment: mean_i x_i^power
  Target target = Target::ema;

  static Observable identity_coord(std::size_t i, Target t = Target::ema) {
    return {Kind::identity_coord, i, 1, t};
  }
  static Observable squared_norm(Target t = Target::ema) {
    return {Kind::squared_norm, 0, 2, t};
  }
  static Observable coord_square(std::size_t i, Target t = Target::ema) {
    return {Kind::coord_square, i, 2, t};
  }
  static Observable custom_moment(int p, Target t = Target::ema) {
    return {Kind::custom_moment, 0, p, t};
  }

  Observable on(Target t) const {
    Observable o = *this;
    o.target = t;
    return o;
  }

  /// e.g. "ema.coord_square(0)"
  std::string name() const;

  /// Parses the form produced by name(); the "ema." prefix is optional.
  static Observable parse(const std::string& text);
};

/// Throws invalid_argument on dimension mismatch or out-of-range index.
double evaluate(const Observable& obs, std::span<const double> theta,
                std::span<const double> zeta);

}  // namespace emascale
