#include "emascale/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emascale/ema.hpp"
#include "emascale/error.hpp"
#include "emascale/parallel.hpp"

namespace emascale {

CoupledProcess::CoupledProcess(const NgosSpec& spec, ParamVector theta0, ParamVector zeta0,
                               CoupledConfig config)
    : spec_(&spec),
      sampler_(spec, theta0.size()),
      config_(config),
      theta_(std::move(theta0)),
      zeta_(std::move(zeta0)),
      grad_(theta_.size()),
      theta_prev_(theta_.size()),
      state_(theta_.size()) {
  check_same_dim(theta_.size(), zeta_.size(), "CoupledProcess");
  check_finite(theta_, "theta0");
  check_finite(zeta_, "zeta0");
  set_hyperparams(config.hp, config.noise_kappa);
}

void CoupledProcess::set_hyperparams(const HyperParams& hp, double noise_kappa) {
  if (!(hp.eta > 0.0)) fail(ErrorCode::invalid_argument, "eta must be > 0");
  if (!(hp.rho >= 0.0 && hp.rho < 1.0)) fail(ErrorCode::invalid_argument, "rho must lie in [0, 1)");
  if (!(noise_kappa > 0.0)) fail(ErrorCode::invalid_argument, "noise kappa must be > 0");
  config_.hp = hp;
  config_.noise_kappa = noise_kappa;
}

void CoupledProcess::step(RngStream& rng) {
  sampler_.sample(theta_.span(), zeta_.span(), config_.noise_kappa, rng, grad_.span());
  advance();
}

void CoupledProcess::step_with_noise(std::span<const double> xi) {
  check_same_dim(xi.size(), theta_.size(), "step_with_noise");
  sampler_.sample_with(theta_.span(), zeta_.span(), config_.noise_kappa, xi, grad_.span());
  advance();
}

void CoupledProcess::advance() {
  const HyperParams& hp = config_.hp;
  std::span<double> theta = theta_.span();
  if (config_.ema == EmaConvention::pre_step) inplace::ema_update(zeta_.span(), theta, hp.rho);

  if (hp.weight_decay > 0.0) {
    const auto mode = config_.optimizer == OptimizerKind::adamw ? WeightDecayMode::decoupled
                                                                : WeightDecayMode::coupled;
    inplace::apply_weight_decay(theta, hp.eta, hp.weight_decay, mode);
  }
  switch (config_.optimizer) {
    case OptimizerKind::sgd:
      inplace::sgd_step(theta, grad_.span(), hp.eta);
      break;
    case OptimizerKind::heavy_ball:
      inplace::heavy_ball_step(state_, theta, grad_.span(), hp.eta, hp.beta1);
      break;
    case OptimizerKind::rmsprop:
      inplace::rmsprop_step(state_, theta, grad_.span(), hp.eta, hp.beta2, hp.epsilon);
      break;
    case OptimizerKind::adam:
    case OptimizerKind::adamw:
      inplace::adam_step(state_, theta, grad_.span(), hp.eta, hp.beta1, hp.beta2, hp.epsilon);
      break;
  }
  if (config_.ema == EmaConvention::post_step) inplace::ema_update(zeta_.span(), theta, hp.rho);
  ++iteration_;

  if (!theta_.all_finite() || !zeta_.all_finite() ||
      theta_.norm() > config_.divergence_norm) {
    fail(ErrorCode::diverged, "iterates diverged at step " + std::to_string(iteration_),
         static_cast<double>(iteration_));
  }
}

std::size_t EnsembleRequest::record_count() const {
  if (iterations < 0) fail(ErrorCode::invalid_argument, "iterations must be >= 0");
  if (record_stride < 1) fail(ErrorCode::invalid_argument, "record stride must be >= 1");
  return static_cast<std::size_t>(iterations / record_stride) + 1;
}

namespace {

// Replicates are simulated in fixed-size blocks so memory stays bounded;
// the block size never depends on the thread count.
std::size_t block_size(std::size_t bytes_per_replicate) {
  constexpr std::size_t kBudget = std::size_t{64} << 20;
  return std::clamp<std::size_t>(kBudget / std::max<std::size_t>(bytes_per_replicate, 1), 1, 256);
}

void check_request(const EnsembleRequest& request, const std::vector<Observable>& observables) {
  if (observables.empty()) fail(ErrorCode::invalid_argument, "no observables requested");
  check_same_dim(request.theta0.size(), request.zeta0.size(), "ensemble");
  (void)request.record_count();
}

}  // namespace

std::vector<TrajectoryMoments> ensemble_moments(const NgosSpec& spec,
                                                const EnsembleRequest& request,
                                                const std::vector<Observable>& observables) {
  auto all = ensemble_moments_multi_rho(spec, request, {request.config.hp.rho}, observables);
  return std::move(all.front());
}

std::vector<std::vector<TrajectoryMoments>> ensemble_moments_multi_rho(
    const NgosSpec& spec, const EnsembleRequest& request, const std::vector<double>& rhos,
    const std::vector<Observable>& observables) {
  check_request(request, observables);
  if (rhos.empty()) fail(ErrorCode::invalid_argument, "no EMA momenta given");
  for (double rho : rhos) {
    if (!(rho >= 0.0 && rho < 1.0)) fail(ErrorCode::invalid_argument, "rho must lie in [0, 1)");
  }

  const std::size_t records = request.record_count();
  const std::size_t n_obs = observables.size();
  const std::size_t n_rho = rhos.size();
  const bool shared_theta = !spec.depends_on_ema;
  const std::size_t per_rep = n_rho * n_obs * records;

  std::vector<std::vector<TrajectoryMoments>> result(
      n_rho, std::vector<TrajectoryMoments>(n_obs, TrajectoryMoments(records)));

  const std::size_t block = block_size(per_rep * sizeof(double));
  std::vector<double> buffer;

  auto run_one = [&](std::size_t replicate, std::span<double> out) {
    const std::uint64_t sid = stream_id(request.role, request.first_replicate + replicate,
                                        request.variant);
    auto record = [&](std::size_t c, std::size_t slot, std::span<const double> theta,
                      std::span<const double> zeta) {
      for (std::size_t o = 0; o < n_obs; ++o) {
        out[(c * n_obs + o) * records + slot] = evaluate(observables[o], theta, zeta);
      }
    };

    if (shared_theta) {
      CoupledConfig cfg = request.config;
      cfg.hp.rho = rhos.front();
      CoupledProcess proc(spec, request.theta0, request.zeta0, cfg);
      std::vector<ParamVector> zetas(n_rho, request.zeta0);
      ParamVector theta_k(request.theta0.size());
      RngStream rng(request.seed, sid);
      for (std::size_t c = 0; c < n_rho; ++c) record(c, 0, proc.theta(), zetas[c]);
      for (std::int64_t k = 1; k <= request.iterations; ++k) {
        std::copy(proc.theta().begin(), proc.theta().end(), theta_k.begin());
        proc.step(rng);
        const ParamVector& src = cfg.ema == EmaConvention::pre_step ? theta_k : proc.theta();
        for (std::size_t c = 0; c < n_rho; ++c) inplace::ema_update(zetas[c].span(), src, rhos[c]);
        if (k % request.record_stride == 0) {
          const auto slot = static_cast<std::size_t>(k / request.record_stride);
          for (std::size_t c = 0; c < n_rho; ++c) record(c, slot, proc.theta(), zetas[c]);
        }
      }
      return;
    }

    for (std::size_t c = 0; c < n_rho; ++c) {
      CoupledConfig cfg = request.config;
      cfg.hp.rho = rhos[c];
      CoupledProcess proc(spec, request.theta0, request.zeta0, cfg);
      RngStream rng(request.seed, sid);
      record(c, 0, proc.theta(), proc.zeta());
      for (std::int64_t k = 1; k <= request.iterations; ++k) {
        proc.step(rng);
        if (k % request.record_stride == 0) {
          record(c, static_cast<std::size_t>(k / request.record_stride), proc.theta(),
                 proc.zeta());
        }
      }
    }
  };

  for (std::size_t start = 0; start < request.replicates; start += block) {
    const std::size_t count = std::min(block, request.replicates - start);
    buffer.assign(count * per_rep, 0.0);
    parallel_for(count, request.threads, [&](std::size_t i) {
      run_one(start + i, std::span<double>(buffer).subspan(i * per_rep, per_rep));
    });
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t c = 0; c < n_rho; ++c) {
        for (std::size_t o = 0; o < n_obs; ++o) {
          result[c][o].add(std::span<const double>(buffer).subspan(
              i * per_rep + (c * n_obs + o) * records, records));
        }
      }
    }
  }
  return result;
}

}  // namespace emascale
