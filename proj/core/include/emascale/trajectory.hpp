#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace emascale {

struct TrajectoryRow {
  double t = 0.0;
  std::int64_t step = 0;
  double kappa = 1.0;
  std::string metric_name;
  double value = 0.0;
};

/// Long-format time series: one row per (time, metric).
class TrajectoryRecord {
 public:
  void add(double t, std::int64_t step, double kappa, std::string metric, double value);
  void append(const TrajectoryRecord& other);

  const std::vector<TrajectoryRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  /// Values of one metric in insertion order.
  std::vector<double> values(const std::string& metric) const;

  std::string to_csv(bool header = true) const;

 private:
  std::vector<TrajectoryRow> rows_;
};

inline constexpr const char* kTrajectoryCsvHeader = "t,step,kappa,metric_name,value";

}  // namespace emascale
