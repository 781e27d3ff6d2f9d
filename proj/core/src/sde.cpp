#include "emascale/sde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emascale/dynamics.hpp"
#include "emascale/error.hpp"
#include "emascale/format.hpp"
#include "emascale/moments.hpp"
#include "emascale/parallel.hpp"

namespace emascale {

std::string_view to_string(SdeFamily family) {
  switch (family) {
    case SdeFamily::sgd_ema: return "sgd_ema";
    case SdeFamily::rmsprop_ema: return "rmsprop_ema";
    case SdeFamily::adam_ema: return "adam_ema";
  }
  return "unknown";
}

SdeFamily parse_sde_family(std::string_view text) {
  if (text == "sgd_ema" || text == "sgd") return SdeFamily::sgd_ema;
  if (text == "rmsprop_ema" || text == "rmsprop") return SdeFamily::rmsprop_ema;
  if (text == "adam_ema" || text == "adam") return SdeFamily::adam_ema;
  fail(ErrorCode::invalid_argument, "unknown SDE family '" + std::string(text) + "'");
}

OptimizerFamily optimizer_family(SdeFamily family) {
  return family == SdeFamily::sgd_ema ? OptimizerFamily::sgd_like : OptimizerFamily::adaptive;
}

SdeSpec SdeSpec::from_discrete(SdeFamily family, const NgosSpec& ngos, const HyperParams& hp,
                               double noise_kappa) {
  if (!(hp.eta > 0.0)) fail(ErrorCode::invalid_argument, "eta must be > 0");
  if (!(noise_kappa > 0.0)) fail(ErrorCode::invalid_argument, "noise kappa must be > 0");
  SdeSpec s;
  s.family = family;
  s.ngos = &ngos;
  const double eta = hp.eta;
  if (family == SdeFamily::sgd_ema) {
    s.sigma0 = ngos.noise_scale * std::sqrt(eta / noise_kappa);
    s.beta0 = (1.0 - hp.rho) / eta;
    return s;
  }
  const double eta2 = eta * eta;
  s.sigma0 = ngos.noise_scale * eta / std::sqrt(noise_kappa);
  s.beta0 = (1.0 - hp.rho) / eta2;
  s.epsilon0 = hp.epsilon * eta;
  if (family == SdeFamily::rmsprop_ema) {
    s.gamma0 = (1.0 - hp.beta2) / eta2;
  } else {
    s.c1 = (1.0 - hp.beta1) / eta2;
    s.c2 = (1.0 - hp.beta2) / eta2;
  }
  return s;
}

void SdeSpec::validate() const {
  if (ngos == nullptr || !ngos->mean_grad) fail(ErrorCode::invalid_problem, "SDE needs a drift");
  for (double v : {sigma0, beta0, gamma0, c1, c2, epsilon0}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      fail(ErrorCode::invalid_argument, "SDE constants must be finite and >= 0");
    }
  }
  if (family == SdeFamily::adam_ema && !(c1 > 0.0 && c2 > 0.0)) {
    fail(ErrorCode::invalid_argument, "adam SDE needs c1, c2 > 0");
  }
}

SdeIntegrator::SdeIntegrator(const SdeSpec& spec, SdeState x0, double h)
    : spec_(&spec),
      sampler_(*spec.ngos, x0.theta.size()),
      x_(std::move(x0)),
      h_(h),
      grad_(x_.theta.size()),
      cov_(x_.theta.size()),
      dw_(x_.theta.size()),
      next_theta_(x_.theta.size()) {
  spec.validate();
  if (!(h > 0.0)) fail(ErrorCode::invalid_argument, "h must be > 0");
  const std::size_t d = x_.theta.size();
  if (x_.zeta.size() != d) x_.zeta = x_.theta;
  if (x_.u.size() != d) x_.u = ParamVector(d);
  if (x_.m.size() != d) x_.m = ParamVector(d);
}

void SdeIntegrator::step(RngStream& rng) {
  const double sq = std::sqrt(h_);
  for (double& w : dw_) w = sq * rng.normal();
  step_with_increments(dw_.span());
}

void SdeIntegrator::step_with_increments(std::span<const double> dw) {
  const SdeSpec& s = *spec_;
  const std::size_t d = x_.theta.size();
  check_same_dim(dw.size(), d, "SdeIntegrator");
  sampler_.mean(x_.theta.span(), x_.zeta.span(), grad_.span());
  if (s.ngos->cov_diag) {
    s.ngos->cov_diag(x_.theta.span(), x_.zeta.span(), cov_.span());
  } else {
    std::fill(cov_.begin(), cov_.end(), 0.0);
  }

  switch (s.family) {
    case SdeFamily::sgd_ema:
      for (std::size_t i = 0; i < d; ++i) {
        next_theta_[i] = x_.theta[i] - grad_[i] * h_ + s.sigma0 * std::sqrt(cov_[i]) * dw[i];
      }
      break;
    case SdeFamily::rmsprop_ema:
      for (std::size_t i = 0; i < d; ++i) {
        const double p = s.sigma0 * std::sqrt(x_.u[i]) + s.epsilon0;
        next_theta_[i] =
            x_.theta[i] - (grad_[i] * h_ + s.sigma0 * std::sqrt(cov_[i]) * dw[i]) / p;
        x_.u[i] += s.gamma0 * (cov_[i] - x_.u[i]) * h_;
      }
      break;
    case SdeFamily::adam_ema: {
      // Bias corrections at the end of the step so that t = 0 never occurs.
      const double t = time() + h_;
      const double g1 = -std::expm1(-s.c1 * t);
      const double g2 = -std::expm1(-s.c2 * t);
      const double r2 = std::sqrt(g2);
      for (std::size_t i = 0; i < d; ++i) {
        const double p = s.sigma0 * std::sqrt(x_.u[i]) + s.epsilon0 * r2;
        next_theta_[i] = x_.m[i] == 0.0 ? x_.theta[i]
                                        : x_.theta[i] - (r2 / g1) * x_.m[i] / p * h_;
        x_.m[i] += s.c1 * ((grad_[i] - x_.m[i]) * h_ + s.sigma0 * std::sqrt(cov_[i]) * dw[i]);
        x_.u[i] += s.c2 * (cov_[i] - x_.u[i]) * h_;
      }
      break;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    x_.zeta[i] += s.beta0 * (x_.theta[i] - x_.zeta[i]) * h_;
    x_.theta[i] = next_theta_[i];
  }
  ++steps_;
  if (!x_.theta.all_finite() || !x_.zeta.all_finite() || !x_.u.all_finite() ||
      !x_.m.all_finite()) {
    fail(ErrorCode::diverged, "SDE state diverged at t=" + format_shortest(time()), time());
  }
}

namespace {

// round(q) when q is within 1e-9 relative of an integer, floor(q) otherwise.
std::int64_t snapped_floor(double q) {
  const double nearest = std::round(q);
  const double v = std::abs(q - nearest) <= 1e-9 * std::max(1.0, q) ? nearest : std::floor(q);
  return static_cast<std::int64_t>(v);
}

}  // namespace

SdePath integrate(const SdeSpec& spec, const SdeState& x0, double total_time, double h,
                  RngStream& rng) {
  if (!(total_time > 0.0)) fail(ErrorCode::invalid_argument, "T must be > 0");
  SdeIntegrator integ(spec, x0, h);
  const std::int64_t n = snapped_floor(total_time / h);
  SdePath path;
  path.h = h;
  path.states.reserve(static_cast<std::size_t>(n) + 1);
  path.states.push_back(integ.state());
  for (std::int64_t k = 0; k < n; ++k) {
    integ.step(rng);
    path.states.push_back(integ.state());
  }
  return path;
}

HyperParams ladder_hyperparams(const WeakErrorProblem& problem, double eta) {
  if (!(eta > 0.0)) fail(ErrorCode::invalid_argument, "eta must be > 0");
  HyperParams hp = problem.hp;
  hp.eta = eta;
  const double s = problem.family == SdeFamily::sgd_ema ? eta : eta * eta;
  hp.rho = 1.0 - problem.beta0 * s;
  if (problem.family == SdeFamily::rmsprop_ema) hp.beta2 = 1.0 - problem.gamma0 * s;
  if (problem.family == SdeFamily::adam_ema) {
    hp.beta1 = 1.0 - problem.c1 * s;
    hp.beta2 = 1.0 - problem.c2 * s;
  }
  if (!(hp.rho >= 0.0 && hp.rho < 1.0) || !(hp.beta1 >= 0.0 && hp.beta1 < 1.0) ||
      !(hp.beta2 >= 0.0 && hp.beta2 < 1.0)) {
    fail(ErrorCode::invalid_argument,
         "eta=" + format_shortest(eta) + " puts a discrete momentum outside [0, 1)", eta);
  }
  return hp;
}

std::vector<WeakErrorPoint> weak_error(const WeakErrorProblem& problem, const Observable& g,
                                       const std::vector<double>& eta_list,
                                       std::size_t replicates, std::uint64_t seed,
                                       const WeakErrorOptions& options) {
  if (problem.ngos == nullptr) fail(ErrorCode::invalid_problem, "weak error needs an NGOS");
  if (eta_list.empty()) fail(ErrorCode::invalid_argument, "empty eta list");
  for (std::size_t i = 1; i < eta_list.size(); ++i) {
    if (!(eta_list[i] < eta_list[i - 1])) {
      fail(ErrorCode::invalid_argument, "eta list must be strictly decreasing");
    }
  }
  if (replicates < 2) fail(ErrorCode::insufficient_samples, "need at least two replicates");
  if (!(options.h_divisor >= 1.0)) fail(ErrorCode::invalid_argument, "h divisor must be >= 1");

  const OptimizerFamily fam = optimizer_family(problem.family);
  auto time_step = [&](double eta) { return fam == OptimizerFamily::sgd_like ? eta : eta * eta; };
  const double h = time_step(eta_list.back()) / options.h_divisor;
  const OptimizerKind optimizer = problem.family == SdeFamily::sgd_ema     ? OptimizerKind::sgd
                                  : problem.family == SdeFamily::rmsprop_ema ? OptimizerKind::rmsprop
                                                                             : OptimizerKind::adam;
  const std::size_t d = problem.theta0.size();
  const bool common = options.coupling == WeakErrorCoupling::common_noise;

  std::vector<WeakErrorPoint> out;
  for (std::size_t li = 0; li < eta_list.size(); ++li) {
    const double eta = eta_list[li];
    const HyperParams hp = ladder_hyperparams(problem, eta);
    const SdeSpec spec = SdeSpec::from_discrete(problem.family, *problem.ngos, hp);
    const double s = time_step(eta);
    const std::int64_t sub = snapped_floor(s / h);
    if (std::abs(static_cast<double>(sub) * h - s) > 1e-9 * s) {
      fail(ErrorCode::invalid_argument, "each step time must be a multiple of the SDE step", eta);
    }
    const std::int64_t n = snapped_floor(problem.total_time / s);
    if (n < 1) fail(ErrorCode::unsupported_scaling, "horizon shorter than one step", eta);
    const std::size_t records = static_cast<std::size_t>(n) + 1;

    CoupledConfig cfg;
    cfg.optimizer = optimizer;
    cfg.hp = hp;
    const double sign = problem.family == SdeFamily::sgd_ema ? -1.0 : 1.0;
    const double inv_sqrt_s = 1.0 / std::sqrt(s);

    // Slot layout per replicate: [discrete trajectory | SDE trajectory].
    std::vector<double> buffer;
    TrajectoryMoments diff(records), disc(records), cont(records);
    const std::size_t block = std::clamp<std::size_t>((std::size_t{32} << 20) / (16 * records), 1, 256);

    auto run_one = [&](std::size_t r, std::span<double> slot) {
      CoupledProcess proc(*problem.ngos, problem.theta0, problem.theta0, cfg);
      SdeIntegrator integ(spec, SdeState(problem.theta0), h);
      RngStream sde_rng(seed, stream_id(StreamRole::sde, r, li));
      RngStream disc_rng(seed, stream_id(StreamRole::baseline, r, li));
      std::vector<double> dw(d), acc(d);
      slot[0] = evaluate(g, proc.theta(), proc.zeta());
      slot[records] = evaluate(g, integ.state().theta, integ.state().zeta);
      for (std::int64_t k = 1; k <= n; ++k) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const double sq = std::sqrt(h);
        for (std::int64_t j = 0; j < sub; ++j) {
          for (std::size_t i = 0; i < d; ++i) {
            dw[i] = sq * sde_rng.normal();
            acc[i] += dw[i];
          }
          integ.step_with_increments(dw);
        }
        if (common) {
          for (double& a : acc) a *= sign * inv_sqrt_s;
          proc.step_with_noise(acc);
        } else {
          proc.step(disc_rng);
        }
        const auto idx = static_cast<std::size_t>(k);
        slot[idx] = evaluate(g, proc.theta(), proc.zeta());
        slot[records + idx] = evaluate(g, integ.state().theta, integ.state().zeta);
      }
    };

    for (std::size_t start = 0; start < replicates; start += block) {
      const std::size_t count = std::min(block, replicates - start);
      buffer.assign(count * 2 * records, 0.0);
      parallel_for(count, options.threads, [&](std::size_t i) {
        run_one(start + i, std::span<double>(buffer).subspan(i * 2 * records, 2 * records));
      });
      std::vector<double> delta(records);
      for (std::size_t i = 0; i < count; ++i) {
        const double* base = buffer.data() + i * 2 * records;
        if (common) {
          for (std::size_t t = 0; t < records; ++t) delta[t] = base[records + t] - base[t];
          diff.add(delta);
        } else {
          disc.add(std::span<const double>(base, records));
          cont.add(std::span<const double>(base + records, records));
        }
      }
    }

    const GapEstimate gap = common ? max_gap_paired(diff) : max_gap(cont, disc);
    WeakErrorPoint p{eta, gap.err, gap.ci_halfwidth, replicates};
    if (options.ci_tolerance > 0.0 && p.ci_halfwidth > options.ci_tolerance * p.max_weak_error) {
      fail(ErrorCode::insufficient_samples,
           "confidence half-width " + format_shortest(p.ci_halfwidth) + " exceeds " +
               format_shortest(options.ci_tolerance) + " of the error at eta=" +
               format_shortest(eta),
           eta);
    }
    out.push_back(p);
  }
  return out;
}

std::string weak_error_to_csv(const std::vector<WeakErrorPoint>& points) {
  std::string out = std::string(kWeakErrorCsvHeader) + "\n";
  for (const WeakErrorPoint& p : points) {
    out += format_shortest(p.eta) + "," + format_shortest(p.max_weak_error) + "," +
           format_shortest(p.ci_halfwidth) + "," + std::to_string(p.replicates) + "\n";
  }
  return out;
}

}  // namespace emascale
