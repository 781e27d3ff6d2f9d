#include "emascale/trajectory.hpp"

#include "emascale/format.hpp"

namespace emascale {

void TrajectoryRecord::add(double t, std::int64_t step, double kappa, std::string metric,
                           double value) {
  rows_.push_back({t, step, kappa, std::move(metric), value});
}

void TrajectoryRecord::append(const TrajectoryRecord& other) {
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

std::vector<double> TrajectoryRecord::values(const std::string& metric) const {
  std::vector<double> out;
  for (const TrajectoryRow& r : rows_) {
    if (r.metric_name == metric) out.push_back(r.value);
  }
  return out;
}

std::string TrajectoryRecord::to_csv(bool header) const {
  std::string out;
  if (header) out += std::string(kTrajectoryCsvHeader) + "\n";
  for (const TrajectoryRow& r : rows_) {
    out += format_shortest(r.t);
    out += ',';
    out += std::to_string(r.step);
    out += ',';
    out += format_shortest(r.kappa);
    out += ',';
    out += r.metric_name;
    out += ',';
    out += format_shortest(r.value);
    out += '\n';
  }
  return out;
}

}  // namespace emascale
