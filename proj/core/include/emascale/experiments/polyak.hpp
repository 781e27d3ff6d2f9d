#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "emascale/hyperparams.hpp"
#include "emascale/trajectory.hpp"

namespace emascale {

/// Gaussian-blob classification data: class means drawn once from
/// N(0, separation^2 / features I), samples x = mu_y + N(0, I).
struct BlobSpec {
  std::size_t classes = 10;
  std::size_t features = 32;
  std::size_t train_size = 50000;
  std::size_t test_size = 10000;
  double separation = 3.0;
  std::uint64_t seed = 20240601;

  void validate() const;
};

struct BlobDataset {
  std::size_t classes = 0;
  std::size_t features = 0;
  std::vector<double> train_x;  // row-major, train_size x features
  std::vector<int> train_y;
  std::vector<double> test_x;
  std::vector<int> test_y;

  static BlobDataset generate(const BlobSpec& spec);
  std::size_t train_size() const noexcept { return train_y.size(); }
  std::size_t test_size() const noexcept { return test_y.size(); }
};

/// Linear softmax classifier; parameters are [W (classes x features) | b].
class SoftmaxModel {
 public:
  SoftmaxModel(std::size_t classes, std::size_t features);

  std::size_t param_count() const noexcept { return classes_ * (features_ + 1); }

  /// Mean cross-entropy gradient over the rows in `batch`; returns the loss.
  double gradient(const std::vector<double>& params, const std::vector<double>& x,
                  const std::vector<int>& y, const std::size_t* batch, std::size_t count,
                  std::vector<double>& grad) const;
  double loss(const std::vector<double>& params, const std::vector<double>& x,
              const std::vector<int>& y) const;
  double accuracy(const std::vector<double>& params, const std::vector<double>& x,
                  const std::vector<int>& y) const;

 private:
  void logits(const std::vector<double>& params, const double* row, double* out) const;

  std::size_t classes_;
  std::size_t features_;
};

struct PolyakOptions {
  int epochs = 10;
  /// theta_0 = zeta_0 ~ N(0, init_scale^2 I), drawn from `init_seed` so every
  /// run in a comparison starts from the same point.
  double init_scale = 1.0;
  std::uint64_t init_seed = 7;
};

/// Metrics recorded per epoch (t = epoch, step = iterations so far).
inline constexpr const char* kTrainLoss = "train_loss";
inline constexpr const char* kModelTestAccuracy = "model_test_accuracy";
inline constexpr const char* kEmaTestAccuracy = "ema_test_accuracy";

/// Minibatch SGD with an EMA of the weights (zeta_{k+1} = rho zeta_k +
/// (1 - rho) theta_{k+1}). The learning rate
/// is always scaled by kappa; the EMA momentum only when use_rule is set.
/// Each epoch shuffles the training set and drops the last partial batch.
TrajectoryRecord toy_polyak_train(const BlobDataset& data, const HyperParams& hp_base,
                                  const PolyakOptions& options, double kappa, bool use_rule,
                                  std::uint64_t seed);

/// max over aligned rows of |a - b| for one metric.
double max_metric_gap(const TrajectoryRecord& a, const TrajectoryRecord& b,
                      const std::string& metric);

}  // namespace emascale
