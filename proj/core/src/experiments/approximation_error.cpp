#include "emascale/experiments/approximation_error.hpp"

#include <algorithm>
#include <cmath>

#include "emascale/dynamics.hpp"
#include "emascale/error.hpp"
#include "emascale/format.hpp"
#include "emascale/scaling.hpp"
#include "emascale/time_grid.hpp"

namespace emascale {

ErrProblem::ErrProblem(const ParabolaProblem& parabola)
    : ngos(parabola.ngos()), theta0(parabola.initial()) {
  key = "parabola";
  for (double v : {parabola.a, parabola.b, parabola.c, static_cast<double>(parabola.dim),
                   parabola.theta0}) {
    key += "|" + format_shortest(v);
  }
}

ErrProblem::ErrProblem(NgosSpec ngos_, ParamVector theta0_, std::string key_)
    : ngos(std::move(ngos_)), theta0(std::move(theta0_)), key(std::move(key_)) {
  if (!ngos.mean_grad) fail(ErrorCode::invalid_problem, "problem needs a mean gradient");
  if (theta0.size() == 0) fail(ErrorCode::invalid_problem, "problem needs a dimension");
}

const TrajectoryMoments* BaselineCache::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const TrajectoryMoments& BaselineCache::insert(const std::string& key, TrajectoryMoments moments) {
  return entries_.insert_or_assign(key, std::move(moments)).first->second;
}

AlignedGrid aligned_grid(const HyperParams& hp_base, double kappa, double total_time) {
  const double rounded = std::round(kappa);
  if (!(kappa >= 1.0) || std::abs(kappa - rounded) > 1e-9 * rounded) {
    fail(ErrorCode::unsupported_scaling, "experiment runners need an integer kappa >= 1");
  }
  AlignedGrid grid;
  grid.base_iterations = iterations_for({total_time, hp_base.eta, OptimizerFamily::sgd_like}, 1.0);
  grid.kappa = static_cast<std::int64_t>(rounded);
  grid.scaled_iterations = grid.base_iterations / grid.kappa;
  if (grid.scaled_iterations < 1) {
    fail(ErrorCode::unsupported_scaling, "kappa exceeds the baseline iteration count");
  }
  return grid;
}

namespace {

std::string baseline_key(const ErrProblem& p, const HyperParams& hp, const Observable& g,
                         const ErrSettings& s, std::size_t first, std::size_t count) {
  std::string key = p.key + "|";
  for (double v : {hp.eta, hp.rho, s.total_time}) {
    key += format_shortest(v) + "|";
  }
  key += g.name() + "|" + std::to_string(s.seed) + "|" + std::to_string(first) + "|" +
         std::to_string(count);
  return key;
}

// Baseline moments at every step (stride 1), one entry per observable.
std::vector<const TrajectoryMoments*> baseline_moments(
    const ErrProblem& problem, const HyperParams& hp_base, const AlignedGrid& grid,
    const std::vector<Observable>& obs, const ErrSettings& settings, std::size_t first,
    std::size_t count, BaselineCache& cache) {
  std::vector<std::string> keys;
  std::vector<Observable> missing;
  for (const Observable& o : obs) {
    keys.push_back(baseline_key(problem, hp_base, o, settings, first, count));
    if (cache.find(keys.back()) == nullptr) missing.push_back(o);
  }
  if (!missing.empty()) {
    const NgosSpec& spec = problem.ngos;
    EnsembleRequest req;
    req.config.optimizer = OptimizerKind::sgd;
    req.config.hp = hp_base;
    req.theta0 = problem.theta0;
    req.zeta0 = problem.theta0;
    req.iterations = grid.base_iterations;
    req.seed = settings.seed;
    req.role = StreamRole::baseline;
    req.first_replicate = first;
    req.replicates = count;
    req.threads = settings.threads;
    auto moments = ensemble_moments(spec, req, missing);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      cache.insert(baseline_key(problem, hp_base, missing[i], settings, first, count),
                   std::move(moments[i]));
    }
  }
  std::vector<const TrajectoryMoments*> out;
  for (const std::string& k : keys) out.push_back(cache.find(k));
  return out;
}

ErrTrace compare(const TrajectoryMoments& base, const TrajectoryMoments& scaled,
                 std::int64_t stride, double rho, double kappa, const Observable& g,
                 const ErrSettings& settings, double dt) {
  ErrTrace trace;
  ErrResult& r = trace.result;
  r.rho_used = rho;
  r.kappa = kappa;
  r.g = g;
  const double nb = static_cast<double>(base.count());
  const double ns = static_cast<double>(scaled.count());
  std::size_t argmax = 0;
  for (std::size_t t = 0; t < scaled.times(); ++t) {
    const std::size_t tb = t * static_cast<std::size_t>(stride);
    trace.t.push_back(static_cast<double>(t) * dt);
    trace.baseline_mean.push_back(base.mean(tb));
    trace.scaled_mean.push_back(scaled.mean(t));
    const double gap = std::abs(trace.baseline_mean.back() - trace.scaled_mean.back());
    if (gap > r.err) {
      r.err = gap;
      argmax = t;
    }
  }
  const std::size_t tb = argmax * static_cast<std::size_t>(stride);
  r.ci_halfwidth =
      kZ95 * std::sqrt(base.variance(tb) / nb + scaled.variance(argmax) / ns);
  r.insufficient = r.ci_halfwidth > 0.1 * r.err;
  if (r.insufficient && settings.require_precision) {
    fail(ErrorCode::insufficient_samples,
         "Err confidence half-width " + format_shortest(r.ci_halfwidth) +
             " exceeds 10% of Err " + format_shortest(r.err) + " at rho=" + format_shortest(rho),
         rho);
  }
  return trace;
}

// [observable][candidate]
std::vector<std::vector<ErrTrace>> error_curves(const ErrProblem& problem,
                                                 const HyperParams& hp_base,
                                                 const std::vector<double>& rhos, double kappa,
                                                 const std::vector<Observable>& obs,
                                                 const ErrSettings& settings, std::size_t first,
                                                 std::size_t count, BaselineCache* cache) {
  hp_base.validate();
  if (count < 2) fail(ErrorCode::insufficient_samples, "need at least two replicates");
  const AlignedGrid grid = aligned_grid(hp_base, kappa, settings.total_time);
  BaselineCache local;
  BaselineCache& c = cache != nullptr ? *cache : local;
  const auto base = baseline_moments(problem, hp_base, grid, obs, settings, first, count, c);

  const NgosSpec& spec = problem.ngos;
  EnsembleRequest req;
  req.config.optimizer = OptimizerKind::sgd;
  req.config.hp = hp_base;
  req.config.hp.eta = scale_learning_rate(hp_base.eta, static_cast<double>(grid.kappa),
                                          OptimizerKind::sgd);
  req.config.noise_kappa = static_cast<double>(grid.kappa);
  req.theta0 = problem.theta0;
  req.zeta0 = problem.theta0;
  req.iterations = grid.scaled_iterations;
  req.seed = settings.seed;
  req.role = StreamRole::scaled;
  req.variant = static_cast<std::uint64_t>(grid.kappa);
  req.first_replicate = first;
  req.replicates = count;
  req.threads = settings.threads;
  const auto scaled = ensemble_moments_multi_rho(spec, req, rhos, obs);

  const double dt = req.config.hp.eta;
  std::vector<std::vector<ErrTrace>> out(obs.size());
  for (std::size_t o = 0; o < obs.size(); ++o) {
    for (std::size_t c2 = 0; c2 < rhos.size(); ++c2) {
      out[o].push_back(compare(*base[o], scaled[c2][o], grid.kappa, rhos[c2],
                               static_cast<double>(grid.kappa), obs[o], settings, dt));
    }
  }
  return out;
}

}  // namespace

std::vector<ErrResult> approximation_error_curve(const ErrProblem& problem,
                                                 const HyperParams& hp_base,
                                                 const std::vector<double>& rhos,
                                                 double kappa, const Observable& g,
                                                 const ErrSettings& settings,
                                                 std::size_t first, std::size_t count,
                                                 BaselineCache* cache) {
  const auto curves = error_curves(problem, hp_base, rhos, kappa, {g}, settings, first, count, cache);
  std::vector<ErrResult> out;
  for (const auto& trace : curves.front()) out.push_back(trace.result);
  return out;
}

std::vector<ErrTrace> approximation_error_traces(const ErrProblem& problem,
                                                 const HyperParams& hp_base,
                                                 const std::vector<double>& rhos,
                                                 double kappa, const Observable& g,
                                                 const ErrSettings& settings,
                                                 BaselineCache* cache) {
  return error_curves(problem, hp_base, rhos, kappa, {g}, settings, 0, settings.replicates,
                      cache)
      .front();
}

ErrResult approximation_error(const ErrProblem& problem, const HyperParams& hp_base,
                              double rho_candidate, double kappa, const Observable& g,
                              const ErrSettings& settings, BaselineCache* cache) {
  return approximation_error_curve(problem, hp_base, {rho_candidate}, kappa, g, settings, 0,
                                   settings.replicates, cache)
      .front();
}

RhoGrid RhoGrid::around(double rho_base, double kappa, std::size_t points) {
  if (!(rho_base > 0.0 && rho_base < 1.0)) {
    fail(ErrorCode::invalid_argument, "rho search needs 0 < rho_B < 1");
  }
  RhoGrid grid;
  grid.points = points;
  grid.log_lo = std::log(-std::expm1(4.0 * kappa * std::log(rho_base)));
  grid.log_hi = std::log((1.0 - rho_base) / 4.0);
  return grid;
}

std::vector<double> RhoGrid::rhos() const {
  if (points < 2) fail(ErrorCode::invalid_argument, "rho grid needs at least two points");
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(points - 1);
    out[i] = -std::expm1(log_lo + w * (log_hi - log_lo));
  }
  return out;
}

RhoSearchResult rho_star_search(const ErrProblem& problem, const HyperParams& hp_base,
                                double kappa, const Observable& g, const RhoGrid& grid,
                                const ErrSettings& settings, BaselineCache* cache) {
  const std::size_t half = settings.replicates / 2;
  if (half < 2) fail(ErrorCode::insufficient_samples, "rho search needs at least four replicates");
  const std::vector<double> rhos = grid.rhos();
  ErrSettings lenient = settings;
  lenient.require_precision = false;

  RhoSearchResult res;
  res.kappa = kappa;
  res.rho_rule = scale_ema(hp_base.rho, kappa);
  res.curve = approximation_error_curve(problem, hp_base, rhos, kappa, g, lenient, 0, half, cache);

  std::size_t best = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < res.curve.size(); ++i) {
    if (res.curve[i].err < res.curve[best].err) best = i;
    worst = std::max(worst, res.curve[i].err);
  }
  res.rho_star = rhos[best];
  res.inconclusive = worst - res.curve[best].err < 2.0 * res.curve[best].ci_halfwidth;
  res.log_gap = std::abs(std::log1p(-res.rho_star) - std::log1p(-res.rho_rule));

  const auto holdout = error_curves(problem, hp_base, {res.rho_star}, kappa,
                                    {g, g.on(Observable::Target::model)}, lenient, half,
                                    settings.replicates - half, cache);
  res.holdout = holdout[0][0].result;
  res.target_model_err = holdout[1][0].result.err;
  if (settings.require_precision && res.holdout.insufficient) {
    fail(ErrorCode::insufficient_samples, "holdout Err is not resolved by the replicates",
         res.rho_star);
  }
  return res;
}

CorollaryResult corollary_check(const ErrProblem& problem, const HyperParams& hp_base,
                                double kappa, const Observable& g, const ErrSettings& settings,
                                BaselineCache* cache) {
  const double rule = scale_ema(hp_base.rho, kappa);
  ErrSettings lenient = settings;
  lenient.require_precision = false;
  auto curve = approximation_error_curve(problem, hp_base, {rule, hp_base.rho}, kappa, g,
                                         lenient, 0, settings.replicates, cache);
  return {curve[0], curve[1]};
}

}  // namespace emascale
