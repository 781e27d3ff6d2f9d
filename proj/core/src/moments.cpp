#include "emascale/moments.hpp"

#include <cmath>

#include "emascale/error.hpp"
#include "emascale/param_vector.hpp"

namespace emascale {

void TrajectoryMoments::add(std::span<const double> trajectory) {
  check_same_dim(trajectory.size(), sum_.size(), "TrajectoryMoments::add");
  for (std::size_t t = 0; t < sum_.size(); ++t) {
    sum_[t] += trajectory[t];
    sum_sq_[t] += trajectory[t] * trajectory[t];
  }
  ++count_;
}

double TrajectoryMoments::mean(std::size_t t) const {
  if (count_ == 0) fail(ErrorCode::insufficient_samples, "no replicates recorded");
  return sum_[t] / static_cast<double>(count_);
}

double TrajectoryMoments::variance(std::size_t t) const {
  if (count_ < 2) return 0.0;
  const double n = static_cast<double>(count_);
  const double m = sum_[t] / n;
  return std::max(0.0, (sum_sq_[t] - n * m * m) / (n - 1.0));
}

std::vector<double> TrajectoryMoments::means() const {
  std::vector<double> out(sum_.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = mean(t);
  return out;
}

GapEstimate max_gap(const TrajectoryMoments& a, const TrajectoryMoments& b) {
  check_same_dim(a.times(), b.times(), "max_gap");
  GapEstimate best;
  for (std::size_t t = 0; t < a.times(); ++t) {
    const double gap = std::abs(a.mean(t) - b.mean(t));
    if (gap > best.err || t == 0) {
      best.err = gap;
      best.argmax = t;
    }
  }
  if (a.times() > 0) {
    const std::size_t t = best.argmax;
    const double se2 = a.variance(t) / static_cast<double>(a.count()) +
                       b.variance(t) / static_cast<double>(b.count());
    best.ci_halfwidth = kZ95 * std::sqrt(se2);
  }
  return best;
}

GapEstimate max_gap_paired(const TrajectoryMoments& difference) {
  GapEstimate best;
  for (std::size_t t = 0; t < difference.times(); ++t) {
    const double gap = std::abs(difference.mean(t));
    if (gap > best.err || t == 0) {
      best.err = gap;
      best.argmax = t;
    }
  }
  if (difference.times() > 0) {
    best.ci_halfwidth = kZ95 * std::sqrt(difference.variance(best.argmax) /
                                         static_cast<double>(difference.count()));
  }
  return best;
}

}  // namespace emascale
