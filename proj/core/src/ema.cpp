#include "emascale/ema.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "emascale/error.hpp"
#include "emascale/parallel.hpp"

namespace emascale {

namespace {

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) fail(ErrorCode::invalid_argument, "rho must lie in [0, 1)");
}

struct Welford {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Welford& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
};

}  // namespace

namespace inplace {

void ema_update(std::span<double> zeta, std::span<const double> theta, double rho) {
  check_same_dim(zeta.size(), theta.size(), "ema_update");
  const double w = 1.0 - rho;
  for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] = rho * zeta[i] + w * theta[i];
}

}  // namespace inplace

EmaState ema_update(const EmaState& state, const ParamVector& theta) {
  check_rho(state.rho);
  EmaState next = state;
  inplace::ema_update(next.zeta, theta, state.rho);
  check_finite(next.zeta, "ema_update");
  return next;
}

EmaState ema_update_post(const EmaState& state, const ParamVector& theta_next) {
  return ema_update(state, theta_next);
}

TransitionMatrix3 TransitionMatrix3::identity() {
  TransitionMatrix3 m;
  for (int i = 0; i < 3; ++i) m(i, i) = 1.0;
  return m;
}

TransitionMatrix3 operator*(const TransitionMatrix3& a, const TransitionMatrix3& b) {
  TransitionMatrix3 c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

double TransitionMatrix3::max_abs_diff(const TransitionMatrix3& other) const {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs((*this)(i, j) - other(i, j)));
  }
  return d;
}

TransitionMatrix3 base_transition(double eta, double rho) {
  TransitionMatrix3 m;
  m.entries = {{{1.0, 0.0, -eta}, {1.0 - rho, rho, 0.0}, {0.0, 0.0, 1.0}}};
  return m;
}

TransitionMatrix3 transition_power(double eta, double rho, std::int64_t kappa) {
  check_rho(rho);
  if (kappa < 1) fail(ErrorCode::invalid_argument, "kappa must be >= 1");
  const double rho_k = std::pow(rho, static_cast<double>(kappa));
  TransitionMatrix3 m;
  m.entries = {{{1.0, 0.0, -static_cast<double>(kappa) * eta},
                {1.0 - rho_k, rho_k, delta_error(eta, rho, static_cast<double>(kappa))},
                {0.0, 0.0, 1.0}}};
  return m;
}

double delta_error(double eta, double rho, double kappa) {
  if (rho == 1.0) fail(ErrorCode::invalid_argument, "rho = 1 freezes the EMA; delta is singular");
  // (1 - rho^kappa) / (1 - rho) = sum_{i<kappa} rho^i, computed without cancellation.
  const double geometric = -std::expm1(kappa * std::log(rho)) / (1.0 - rho);
  return -eta * (kappa - (rho == 0.0 ? 1.0 : geometric));
}

double limiting_variance_prefactor(double rho, std::optional<std::uint64_t> n) {
  check_rho(rho);
  const double stationary = (1.0 - rho) / (1.0 + rho);
  if (!n) return stationary;
  if (*n == 0) fail(ErrorCode::invalid_argument, "n must be >= 1");
  const double r2n = std::pow(rho, 2.0 * static_cast<double>(*n));
  return (1.0 - r2n) / (1.0 + r2n) * stationary;
}

LimitingStats limiting_stats_check(const std::function<double(RngStream&)>& sampler,
                                   double rho, std::uint64_t horizon, std::uint64_t seed,
                                   const LimitingStatsOptions& options) {
  check_rho(rho);
  if (horizon == 0) fail(ErrorCode::invalid_argument, "horizon must be >= 1");
  const std::size_t chains = std::max<std::size_t>(1, options.replicates);
  const auto burn_in =
      static_cast<std::uint64_t>(std::ceil(options.burn_in_horizons / (1.0 - rho)));

  std::vector<Welford> theta_stats(chains);
  std::vector<Welford> zeta_stats(chains);

  parallel_for(chains, options.threads, [&](std::size_t c) {
    RngStream rng(seed, stream_id(StreamRole::sampler, c));
    const std::uint64_t length = horizon / chains + (c < horizon % chains ? 1 : 0);
    double zeta = sampler(rng);
    for (std::uint64_t i = 0; i < burn_in; ++i) zeta = rho * zeta + (1.0 - rho) * sampler(rng);
    for (std::uint64_t i = 0; i < length; ++i) {
      const double theta = sampler(rng);
      zeta = rho * zeta + (1.0 - rho) * theta;
      theta_stats[c].add(theta);
      zeta_stats[c].add(zeta);
    }
  });

  Welford theta_all;
  Welford zeta_all;
  for (std::size_t c = 0; c < chains; ++c) {
    theta_all.merge(theta_stats[c]);
    zeta_all.merge(zeta_stats[c]);
  }

  LimitingStats out;
  out.samples = static_cast<std::uint64_t>(theta_all.n);
  out.mean_ratio = zeta_all.mean / theta_all.mean;
  out.var_ratio = zeta_all.variance() / theta_all.variance();
  out.converged = static_cast<double>(horizon / chains) * (1.0 - rho) >= options.min_horizons;
  return out;
}

}  // namespace emascale
