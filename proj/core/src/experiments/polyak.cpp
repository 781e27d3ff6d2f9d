#include "emascale/experiments/polyak.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emascale/ema.hpp"
#include "emascale/error.hpp"
#include "emascale/optim.hpp"
#include "emascale/param_vector.hpp"
#include "emascale/rng.hpp"
#include "emascale/scaling.hpp"

namespace emascale {

void BlobSpec::validate() const {
  if (classes < 2 || features < 1) fail(ErrorCode::invalid_problem, "need >= 2 classes and >= 1 feature");
  if (train_size < 1 || test_size < 1) fail(ErrorCode::invalid_problem, "empty dataset");
  if (!(separation >= 0.0)) fail(ErrorCode::invalid_problem, "separation must be >= 0");
}

BlobDataset BlobDataset::generate(const BlobSpec& spec) {
  spec.validate();
  BlobDataset d;
  d.classes = spec.classes;
  d.features = spec.features;
  RngStream rng(spec.seed, stream_id(StreamRole::data, 0));
  std::vector<double> means(spec.classes * spec.features);
  const double scale = spec.separation / std::sqrt(static_cast<double>(spec.features));
  for (double& m : means) m = scale * rng.normal();

  auto fill = [&](std::size_t n, std::vector<double>& x, std::vector<int>& y) {
    x.resize(n * spec.features);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::size_t>(rng.next_u64() % spec.classes);
      y[i] = static_cast<int>(label);
      for (std::size_t j = 0; j < spec.features; ++j) {
        x[i * spec.features + j] = means[label * spec.features + j] + rng.normal();
      }
    }
  };
  fill(spec.train_size, d.train_x, d.train_y);
  fill(spec.test_size, d.test_x, d.test_y);
  return d;
}

SoftmaxModel::SoftmaxModel(std::size_t classes, std::size_t features)
    : classes_(classes), features_(features) {}

void SoftmaxModel::logits(const std::vector<double>& params, const double* row,
                          double* out) const {
  const double* bias = params.data() + classes_ * features_;
  for (std::size_t k = 0; k < classes_; ++k) {
    const double* w = params.data() + k * features_;
    double z = bias[k];
    for (std::size_t j = 0; j < features_; ++j) z += w[j] * row[j];
    out[k] = z;
  }
}

namespace {

// Softmax in place; returns log-sum-exp.
double softmax(double* z, std::size_t n) {
  const double mx = *std::max_element(z, z + n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = std::exp(z[k] - mx);
    sum += z[k];
  }
  for (std::size_t k = 0; k < n; ++k) z[k] /= sum;
  return mx + std::log(sum);
}

}  // namespace

double SoftmaxModel::gradient(const std::vector<double>& params, const std::vector<double>& x,
                              const std::vector<int>& y, const std::size_t* batch,
                              std::size_t count, std::vector<double>& grad) const {
  grad.assign(param_count(), 0.0);
  std::vector<double> z(classes_);
  double total = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    const double* row = x.data() + batch[n] * features_;
    const auto label = static_cast<std::size_t>(y[batch[n]]);
    logits(params, row, z.data());
    const double zy = z[label];
    total += softmax(z.data(), classes_) - zy;
    z[label] -= 1.0;
    for (std::size_t k = 0; k < classes_; ++k) {
      double* gw = grad.data() + k * features_;
      for (std::size_t j = 0; j < features_; ++j) gw[j] += z[k] * row[j];
      grad[classes_ * features_ + k] += z[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& g : grad) g *= inv;
  return total * inv;
}

double SoftmaxModel::loss(const std::vector<double>& params, const std::vector<double>& x,
                          const std::vector<int>& y) const {
  std::vector<double> z(classes_);
  double total = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    logits(params, x.data() + n * features_, z.data());
    const double zy = z[static_cast<std::size_t>(y[n])];
    total += softmax(z.data(), classes_) - zy;
  }
  return total / static_cast<double>(y.size());
}

double SoftmaxModel::accuracy(const std::vector<double>& params, const std::vector<double>& x,
                              const std::vector<int>& y) const {
  std::vector<double> z(classes_);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    logits(params, x.data() + n * features_, z.data());
    const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (pred == static_cast<std::size_t>(y[n])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

TrajectoryRecord toy_polyak_train(const BlobDataset& data, const HyperParams& hp_base,
                                  const PolyakOptions& options, double kappa, bool use_rule,
                                  std::uint64_t seed) {
  hp_base.validate();
  const int epochs = options.epochs;
  if (!(options.init_scale >= 0.0)) fail(ErrorCode::invalid_argument, "init scale must be >= 0");
  if (epochs < 0) fail(ErrorCode::invalid_argument, "epochs must be >= 0");
  HyperParams hp = scale(hp_base, kappa, OptimizerKind::sgd);
  if (!use_rule) hp.rho = hp_base.rho;
  const double batch_real = std::round(kappa * static_cast<double>(hp_base.batch_size));
  if (batch_real < 1.0 || batch_real > static_cast<double>(data.train_size())) {
    fail(ErrorCode::unsupported_scaling, "kappa * B must lie in [1, train size]");
  }
  const auto batch = static_cast<std::size_t>(batch_real);
  const std::size_t steps_per_epoch = data.train_size() / batch;

  SoftmaxModel model(data.classes, data.features);
  std::vector<double> theta(model.param_count(), 0.0);
  RngStream init(options.init_seed, stream_id(StreamRole::init, 0));
  for (double& v : theta) v = options.init_scale * init.normal();
  std::vector<double> zeta(theta);
  std::vector<double> grad;
  std::vector<std::size_t> order(data.train_size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(seed, stream_id(StreamRole::sampler, 0));

  TrajectoryRecord rec;
  std::int64_t step = 0;
  auto record = [&](int epoch) {
    const double t = epoch;
    rec.add(t, step, kappa, kTrainLoss, model.loss(theta, data.train_x, data.train_y));
    rec.add(t, step, kappa, kModelTestAccuracy, model.accuracy(theta, data.test_x, data.test_y));
    rec.add(t, step, kappa, kEmaTestAccuracy, model.accuracy(zeta, data.test_x, data.test_y));
  };
  record(0);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      model.gradient(theta, data.train_x, data.train_y, order.data() + s * batch, batch, grad);
      inplace::sgd_step(theta, grad, hp.eta);
      inplace::ema_update(zeta, theta, hp.rho);
      ++step;
    }
    if (!all_finite(theta)) {
      fail(ErrorCode::diverged, "training diverged in epoch " + std::to_string(epoch), epoch);
    }
    record(epoch);
  }
  return rec;
}

double max_metric_gap(const TrajectoryRecord& a, const TrajectoryRecord& b,
                      const std::string& metric) {
  const std::vector<double> va = a.values(metric);
  const std::vector<double> vb = b.values(metric);
  if (va.size() != vb.size()) fail(ErrorCode::invalid_argument, "records are not aligned");
  double gap = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) gap = std::max(gap, std::abs(va[i] - vb[i]));
  return gap;
}

}  // namespace emascale
