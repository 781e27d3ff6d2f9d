#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emascale {

/// Per-time sample moments of an observable across Monte-Carlo replicates.
/// Replicates are added one whole trajectory at a time, in replicate order.
class TrajectoryMoments {
 public:
  TrajectoryMoments() = default;
  explicit TrajectoryMoments(std::size_t times) : sum_(times, 0.0), sum_sq_(times, 0.0) {}

  void add(std::span<const double> trajectory);

  std::size_t times() const noexcept { return sum_.size(); }
  std::size_t count() const noexcept { return count_; }
  double mean(std::size_t t) const;
  /// Unbiased sample variance (0 with fewer than two replicates).
  double variance(std::size_t t) const;
  std::vector<double> means() const;

 private:
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
  std::size_t count_ = 0;
};

struct GapEstimate {
  double err = 0.0;           // max_t |mean_a(t) - mean_b(t)|
  double ci_halfwidth = 0.0;  // 95% normal interval at the arg-max time
  std::size_t argmax = 0;
};

/// Maximum absolute gap between two independently sampled mean trajectories
/// on the same aligned time grid.
GapEstimate max_gap(const TrajectoryMoments& a, const TrajectoryMoments& b);

/// Same, for paired samples (common random numbers): moments of the
/// per-replicate difference trajectory.
GapEstimate max_gap_paired(const TrajectoryMoments& difference);

inline constexpr double kZ95 = 1.959963984540054;

}  // namespace emascale
