#include "emascale/optim.hpp"

#include <cmath>

#include "emascale/error.hpp"

namespace emascale {

NgosSampler::NgosSampler(const NgosSpec& spec, std::size_t dim)
    : spec_(&spec), cov_(dim), xi_(dim) {
  if (!spec.mean_grad) fail(ErrorCode::invalid_problem, "NGOS needs a mean gradient");
  if (!(spec.noise_scale >= 0.0)) fail(ErrorCode::invalid_problem, "noise scale must be >= 0");
}

void NgosSampler::mean(std::span<const double> theta, std::span<const double> zeta,
                       std::span<double> out) {
  spec_->mean_grad(theta, zeta, out);
}

void NgosSampler::sample_with(std::span<const double> theta, std::span<const double> zeta,
                              double kappa, std::span<const double> xi,
                              std::span<double> out) {
  if (!(kappa > 0.0)) fail(ErrorCode::invalid_argument, "kappa must be > 0");
  check_same_dim(theta.size(), cov_.size(), "ngos_sample");
  check_same_dim(zeta.size(), cov_.size(), "ngos_sample");
  spec_->mean_grad(theta, zeta, out);
  if (spec_->noise_scale == 0.0 || !spec_->cov_diag) return;
  spec_->cov_diag(theta, zeta, cov_);
  for (std::size_t i = 0; i < cov_.size(); ++i) {
    if (cov_[i] < 0.0) fail(ErrorCode::invalid_problem, "negative covariance entry");
    out[i] += spec_->noise_scale * std::sqrt(cov_[i] / kappa) * xi[i];
  }
}

void NgosSampler::sample(std::span<const double> theta, std::span<const double> zeta,
                         double kappa, RngStream& rng, std::span<double> out) {
  for (double& x : xi_) x = rng.normal();
  sample_with(theta, zeta, kappa, xi_, out);
}

ParamVector ngos_sample(const NgosSpec& spec, const ParamVector& theta,
                        const ParamVector& zeta, double kappa, RngStream& rng) {
  NgosSampler sampler(spec, theta.size());
  ParamVector g(theta.size());
  sampler.sample(theta, zeta, kappa, rng, g);
  return g;
}

namespace inplace {

void sgd_step(std::span<double> theta, std::span<const double> g, double eta) {
  check_same_dim(theta.size(), g.size(), "sgd_step");
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * g[i];
}

void heavy_ball_step(OptimizerState& state, std::span<double> theta,
                     std::span<const double> g, double eta, double mu) {
  if (!(mu >= 0.0 && mu < 1.0)) fail(ErrorCode::invalid_argument, "mu must lie in [0, 1)");
  check_same_dim(theta.size(), g.size(), "heavy_ball_step");
  check_same_dim(theta.size(), state.momentum_buf.size(), "heavy_ball_step");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.momentum_buf[i] = mu * state.momentum_buf[i] + g[i];
    theta[i] -= eta * state.momentum_buf[i];
  }
  ++state.step;
}

void rmsprop_step(OptimizerState& state, std::span<double> theta, std::span<const double> g,
                  double eta, double gamma, double epsilon) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::invalid_argument, "gamma must lie in [0, 1]");
  if (!(epsilon >= 0.0)) fail(ErrorCode::invalid_argument, "epsilon must be >= 0");
  check_same_dim(theta.size(), g.size(), "rmsprop_step");
  check_same_dim(theta.size(), state.v.size(), "rmsprop_step");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (g[i] != 0.0) theta[i] -= eta * g[i] / (std::sqrt(state.v[i]) + epsilon);
    state.v[i] = gamma * state.v[i] + (1.0 - gamma) * g[i] * g[i];
  }
  ++state.step;
  check_finite(theta, "rmsprop_step");
}

void adam_step(OptimizerState& state, std::span<double> theta, std::span<const double> g,
               double eta, double beta1, double beta2, double epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::invalid_argument, "Adam betas must lie in [0, 1)");
  }
  if (!(epsilon >= 0.0)) fail(ErrorCode::invalid_argument, "epsilon must be >= 0");
  check_same_dim(theta.size(), g.size(), "adam_step");
  check_same_dim(theta.size(), state.m.size(), "adam_step");
  check_same_dim(theta.size(), state.v.size(), "adam_step");

  const double k = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(beta1, k + 1.0);
  const double v_next_correction = 1.0 - std::pow(beta2, k + 1.0);
  const double v_prev_correction = 1.0 - std::pow(beta2, k);
  const bool first = state.step == 0;

  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double v_prev_hat = first ? 0.0 : state.v[i] / v_prev_correction;
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / m_correction;
    const double v_hat = first ? state.v[i] / v_next_correction : v_prev_hat;
    if (m_hat != 0.0) theta[i] -= eta * m_hat / (std::sqrt(v_hat) + epsilon);
  }
  ++state.step;
  check_finite(theta, "adam_step");
}

void apply_weight_decay(std::span<double> theta, double eta, double lambda,
                        WeightDecayMode mode) {
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "weight decay must be >= 0");
  double factor = 1.0;
  if (mode == WeightDecayMode::coupled) {
    if (eta * lambda >= 1.0) fail(ErrorCode::unstable_decay, "eta * lambda >= 1");
    factor = 1.0 - eta * lambda;
  } else {
    if (lambda >= 1.0) fail(ErrorCode::unstable_decay, "lambda >= 1");
    factor = 1.0 - lambda;
  }
  if (factor == 1.0) return;
  for (double& x : theta) x *= factor;
}

}  // namespace inplace

ParamVector sgd_step(const ParamVector& theta, const ParamVector& g, double eta) {
  if (!(eta > 0.0)) fail(ErrorCode::invalid_argument, "eta must be > 0");
  ParamVector out = theta;
  inplace::sgd_step(out, g, eta);
  check_finite(out, "sgd_step");
  return out;
}

StepResult heavy_ball_step(const OptimizerState& state, const ParamVector& theta,
                           const ParamVector& g, double eta, double mu) {
  StepResult r{state, theta};
  inplace::heavy_ball_step(r.state, r.theta, g, eta, mu);
  check_finite(r.theta, "heavy_ball_step");
  return r;
}

StepResult rmsprop_step(const OptimizerState& state, const ParamVector& theta,
                        const ParamVector& g, double eta, double gamma, double epsilon) {
  StepResult r{state, theta};
  inplace::rmsprop_step(r.state, r.theta, g, eta, gamma, epsilon);
  return r;
}

StepResult adam_step(const OptimizerState& state, const ParamVector& theta,
                     const ParamVector& g, double eta, double beta1, double beta2,
                     double epsilon) {
  StepResult r{state, theta};
  inplace::adam_step(r.state, r.theta, g, eta, beta1, beta2, epsilon);
  return r;
}

ParamVector apply_weight_decay(const ParamVector& theta, double eta, double lambda,
                               WeightDecayMode mode) {
  ParamVector out = theta;
  inplace::apply_weight_decay(out, eta, lambda, mode);
  return out;
}

}  // namespace emascale
