#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace emascale {

/// Dense real parameter vector (model parameters or their EMA). The
/// dimension is fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  operator std::span<double>() noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept;
  double squared_norm() const noexcept;
  double norm() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

bool all_finite(std::span<const double> values) noexcept;

/// Throws invalid_argument when the dimensions differ.
void check_same_dim(std::size_t a, std::size_t b, const char* what);

/// Throws diverged when any entry is NaN or infinite.
void check_finite(std::span<const double> values, const char* what);

}  // namespace emascale
