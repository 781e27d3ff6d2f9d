#include "cli.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "emascale/error.hpp"
#include "emascale/experiments/approximation_error.hpp"
#include "emascale/experiments/distill.hpp"
#include "emascale/experiments/parabola.hpp"
#include "emascale/experiments/polyak.hpp"
#include "emascale/format.hpp"
#include "emascale/parallel.hpp"
#include "emascale/progressive.hpp"
#include "emascale/scaling.hpp"
#include "emascale/sde.hpp"

#ifndef EMASCALE_VERSION
#define EMASCALE_VERSION "unknown"
#endif

namespace emascale::cli {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kUnhashedKeys[] = {"threads", "output_dir"};

[[noreturn]] void config_fail(const std::string& message) {
  fail(ErrorCode::config_error, message);
}

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  Json defaults = Json::object();
  std::vector<std::function<void(Json&)>> overrides;
  std::string config_path;
  std::function<int(const Json&, std::ostream&)> body;
};

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

template <class T>
void option(Command& c, const std::string& flags, const std::string& key, T def,
            const std::string& help) {
  c.defaults[key] = def;
  auto store = std::make_shared<T>(def);
  CLI::Option* opt = c.app->add_option(flags, *store, help);
  if constexpr (is_vector<T>::value) opt->delimiter(',');
  c.overrides.push_back([opt, store, key](Json& cfg) {
    if (opt->count() > 0) cfg[key] = *store;
  });
}

void flag(Command& c, const std::string& flags, const std::string& key, bool def,
          const std::string& help) {
  c.defaults[key] = def;
  auto store = std::make_shared<bool>(def);
  CLI::Option* opt = c.app->add_flag(flags, *store, help);
  c.overrides.push_back([opt, store, key](Json& cfg) {
    if (opt->count() > 0) cfg[key] = *store;
  });
}

void common_options(Command& c, std::size_t replicates, bool stochastic) {
  c.app->add_option("--config", c.config_path, "JSON config; command-line flags override it");
  option<std::string>(c, "--output-dir", "output_dir", "out", "Directory for CSV and manifest");
  if (!stochastic) return;
  option<std::uint64_t>(c, "--seed", "seed", 0, "Random seed");
  option<std::size_t>(c, "--replicates", "replicates", replicates, "Monte-Carlo replicates");
  option<std::size_t>(c, "--threads", "threads", 0, "Worker threads (0 = all cores)");
}

// Line and column of a byte offset, for parse diagnostics.
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

bool compatible(const Json& def, const Json& value) {
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_number_unsigned() || def.is_number_integer()) {
    return value.is_number_integer() || value.is_number_unsigned();
  }
  if (def.is_number()) return value.is_number();
  return false;
}

Json effective_config(const Command& c) {
  Json cfg = c.defaults;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) config_fail("cannot open config file " + c.config_path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Json file;
    try {
      file = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
      config_fail(c.config_path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                  ": " + e.what());
    }
    if (!file.is_object()) config_fail(c.config_path + ": top level must be an object");
    for (const auto& [key, value] : file.items()) {
      if (key == "command") {
        if (value != c.name) config_fail(c.config_path + ": config is for command " + value.dump());
        continue;
      }
      if (!cfg.contains(key)) config_fail(c.config_path + ": unknown field '" + key + "'");
      if (!compatible(c.defaults[key], value)) {
        config_fail(c.config_path + ": field '" + key + "' should look like " +
                    c.defaults[key].dump() + ", got " + value.dump());
      }
      cfg[key] = value;
    }
  }
  for (const auto& apply : c.overrides) apply(cfg);
  return cfg;
}

Json hashed_view(const Json& config) {
  Json view = config;
  for (const char* key : kUnhashedKeys) view.erase(key);
  return view;
}

template <class T>
T get(const Json& cfg, const std::string& key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_fail("field '" + key + "': " + e.what());
  }
}

HyperParams hyperparams(const Json& cfg, const std::string& batch_key) {
  HyperParams hp;
  hp.eta = get<double>(cfg, "lr");
  hp.rho = get<double>(cfg, "rho");
  hp.batch_size = get<std::int64_t>(cfg, batch_key);
  if (cfg.contains("beta1")) hp.beta1 = get<double>(cfg, "beta1");
  if (cfg.contains("beta2")) hp.beta2 = get<double>(cfg, "beta2");
  if (cfg.contains("eps")) hp.epsilon = get<double>(cfg, "eps");
  if (cfg.contains("weight_decay")) hp.weight_decay = get<double>(cfg, "weight_decay");
  try {
    hp.validate();
  } catch (const Error& e) {
    config_fail(std::string("hyperparameters: ") + e.what());
  }
  return hp;
}

void hyperparam_options(Command& c, const std::string& batch_flag, const std::string& batch_key,
                        std::int64_t batch, double lr, double rho, bool adaptive) {
  option<std::int64_t>(c, batch_flag, batch_key, batch, "Reference batch size B");
  option<double>(c, "--lr", "lr", lr, "Learning rate at the reference batch size");
  option<double>(c, "--rho", "rho", rho, "EMA momentum at the reference batch size");
  if (!adaptive) return;
  option<double>(c, "--beta1", "beta1", 0.9, "Adam first-moment coefficient");
  option<double>(c, "--beta2", "beta2", 0.999, "Second-moment coefficient");
  option<double>(c, "--eps", "eps", 1e-8, "Adaptivity parameter epsilon");
  option<double>(c, "--weight-decay", "weight_decay", 0.0, "Weight decay lambda");
}

void parabola_options(Command& c) {
  option<double>(c, "--a", "a", 1.0, "Curvature");
  option<double>(c, "--b", "b", 0.5, "Scaled additive noise coefficient");
  option<double>(c, "--c", "c", 0.0, "Additive noise");
  option<std::size_t>(c, "--dim", "dim", 1, "Dimension");
  option<double>(c, "--theta0", "theta0", 1.0, "Initial value of every coordinate");
  option<double>(c, "--total-time", "total_time", 1.0, "Continuous-time horizon T");
}

ParabolaProblem parabola(const Json& cfg) {
  ParabolaProblem p;
  p.a = get<double>(cfg, "a");
  p.b = get<double>(cfg, "b");
  p.c = get<double>(cfg, "c");
  p.dim = get<std::size_t>(cfg, "dim");
  p.theta0 = get<double>(cfg, "theta0");
  try {
    p.validate();
  } catch (const Error& e) {
    config_fail(std::string("problem: ") + e.what());
  }
  return p;
}

Observable observable(const Json& cfg) {
  try {
    return Observable::parse(get<std::string>(cfg, "observable"));
  } catch (const Error& e) {
    config_fail(std::string("field 'observable': ") + e.what());
  }
}

ErrSettings err_settings(const Json& cfg) {
  ErrSettings s;
  s.replicates = get<std::size_t>(cfg, "replicates");
  s.seed = get<std::uint64_t>(cfg, "seed");
  s.threads = resolve_threads(get<std::size_t>(cfg, "threads"));
  s.total_time = get<double>(cfg, "total_time");
  if (cfg.contains("require_precision")) s.require_precision = get<bool>(cfg, "require_precision");
  return s;
}

std::vector<ScheduleEntry> parse_schedule(const std::string& text) {
  std::vector<ScheduleEntry> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      config_fail("field 'schedule': expected epoch:batch pairs, got '" + item + "'");
    }
    try {
      std::size_t used = 0;
      ScheduleEntry e;
      e.epoch = std::stod(item.substr(0, colon), &used);
      e.batch_size = std::stoll(item.substr(colon + 1));
      out.push_back(e);
    } catch (const std::logic_error&) {
      config_fail("field 'schedule': cannot parse '" + item + "'");
    }
  }
  if (out.empty()) config_fail("field 'schedule' is empty");
  return out;
}

class Outputs {
 public:
  Outputs(const Json& cfg, const std::string& command)
      : cfg_(cfg), command_(command), hash_(config_hash(cfg)) {
    dir_ = get<std::string>(cfg, "output_dir");
  }

  const std::string& hash() const { return hash_; }
  std::string stem() const { return command_ + "_" + hash_; }

  void write(const std::string& extension, const std::string& content, std::ostream& out) {
    const std::string name = stem() + extension;
    write_raw(name, content);
    files_.push_back(name);
    out << "wrote " << (std::filesystem::path(dir_) / name).string() << "\n";
  }

  void manifest(const Json& results, std::ostream& out) {
    Json m;
    m["command"] = command_;
    m["config_hash"] = hash_;
    if (cfg_.contains("seed")) m["seed"] = cfg_["seed"];
    m["version"] = EMASCALE_VERSION;
    m["config"] = hashed_view(cfg_);
    m["outputs"] = files_;
    m["results"] = results;
    const std::string name = stem() + ".manifest.json";
    write_raw(name, m.dump(2) + "\n");
    out << "wrote " << (std::filesystem::path(dir_) / name).string() << "\n";
  }

 private:
  void write_raw(const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir_);
    std::ofstream f(std::filesystem::path(dir_) / name, std::ios::binary);
    if (!f) config_fail("cannot write " + name + " in " + dir_);
    f << content;
  }

  Json cfg_;
  std::string command_;
  std::string hash_;
  std::string dir_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------- scale

int cmd_scale(const Json& cfg, std::ostream& out) {
  const OptimizerKind optimizer = parse_optimizer(get<std::string>(cfg, "optimizer"));
  const HyperParams base = hyperparams(cfg, "base_batch");
  ScalingRequest req;
  req.base = base;
  req.target_batch = get<std::int64_t>(cfg, "target_batch");
  req.optimizer = optimizer;
  const std::string variant = get<std::string>(cfg, "ema_variant");
  if (variant != "exponential" && variant != "linear") {
    config_fail("field 'ema_variant' must be exponential or linear");
  }
  req.ema_variant = variant == "linear" ? EmaVariant::linear : EmaVariant::exponential;
  const double kappa = req.kappa();
  const HyperParams s = scale(req);

  const bool adaptive = optimizer == OptimizerKind::rmsprop || optimizer == OptimizerKind::adam ||
                        optimizer == OptimizerKind::adamw;
  auto line = [&](const char* name, double from, double to, const char* rule) {
    out << name << ": " << format_shortest(from) << " -> " << format_shortest(to) << "  ["
        << rule << "]\n";
  };
  out << "optimizer: " << to_string(optimizer) << "\n";
  out << "kappa: " << format_shortest(kappa) << "\n";
  out << "batch_size: " << base.batch_size << " -> " << s.batch_size << "\n";
  line("eta", base.eta, s.eta, adaptive ? "sqrt(kappa) * eta" : "kappa * eta");
  line("rho", base.rho, s.rho,
       req.ema_variant == EmaVariant::linear ? "1 - kappa (1 - rho)" : "rho^kappa");
  if (optimizer == OptimizerKind::adam || optimizer == OptimizerKind::adamw) {
    line("beta1", base.beta1, s.beta1, "1 - kappa (1 - beta1)");
  }
  if (adaptive) {
    line("beta2", base.beta2, s.beta2, "1 - kappa (1 - beta2)");
    line("epsilon", base.epsilon, s.epsilon, "epsilon / sqrt(kappa)");
  }
  line("weight_decay", base.weight_decay, s.weight_decay,
       optimizer == OptimizerKind::adamw ? "1 - (1 - lambda)^kappa"
                                         : "(eta / eta_hat) kappa lambda");

  if (!get<std::string>(cfg, "output_dir").empty()) {
    Outputs files(cfg, "scale");
    const TableRow row{s.batch_size, kappa, s};
    files.write(".csv", table_to_csv(std::span<const TableRow>(&row, 1), false), out);
    files.manifest(Json::object(), out);
  }
  return kOk;
}

// ---------------------------------------------------------------- table

int cmd_table(const Json& cfg, std::ostream& out) {
  const std::string rule_name = get<std::string>(cfg, "rule");
  const OptimizerKind rule = rule_name == "ema" ? OptimizerKind::sgd : parse_optimizer(rule_name);
  const HyperParams base = hyperparams(cfg, "base_batch");
  const auto batches = get<std::vector<std::int64_t>>(cfg, "batch_sizes");
  const std::string precision = get<std::string>(cfg, "precision");
  if (precision != "float64" && precision != "float32") {
    config_fail("field 'precision' must be float64 or float32");
  }
  const auto rows = emit_hparam_table(
      base, batches, rule, precision == "float32" ? TablePrecision::float32 : TablePrecision::float64);
  const std::string csv = table_to_csv(rows, get<bool>(cfg, "paper_rounding"));
  out << csv;
  Outputs files(cfg, "table");
  files.write(".csv", csv, out);
  files.manifest(Json::object(), out);
  return kOk;
}

// ---------------------------------------------------------------- parabola

int cmd_parabola(const Json& cfg, std::ostream& out) {
  const ParabolaProblem problem = parabola(cfg);
  const HyperParams base = hyperparams(cfg, "batch_size");
  const double kappa = get<double>(cfg, "kappa");
  const bool use_rule = get<bool>(cfg, "use_rule");
  const Observable g = observable(cfg);
  const ErrSettings settings = err_settings(cfg);
  const double rho = use_rule ? scale_ema(base.rho, kappa) : base.rho;

  const auto trace =
      approximation_error_traces(problem, base, {rho}, kappa, g, settings).front();
  TrajectoryRecord rec;
  const auto stride = static_cast<std::int64_t>(std::llround(kappa));
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    const auto step = static_cast<std::int64_t>(i);
    rec.add(trace.t[i], step * stride, 1.0, "baseline.mean." + g.name(), trace.baseline_mean[i]);
    rec.add(trace.t[i], step, kappa, "scaled.mean." + g.name(), trace.scaled_mean[i]);
  }
  const ErrResult& r = trace.result;
  out << "kappa=" << format_shortest(kappa) << " rho_used=" << format_shortest(r.rho_used)
      << " (" << (use_rule ? "with" : "without") << " rule)\n";
  out << "Err=" << format_shortest(r.err) << " ci_halfwidth=" << format_shortest(r.ci_halfwidth)
      << (r.insufficient ? " (insufficient samples)" : "") << "\n";
  Outputs files(cfg, "parabola");
  files.write(".csv", rec.to_csv(), out);
  files.manifest({{"rho_used", r.rho_used},
                  {"err", r.err},
                  {"ci_halfwidth", r.ci_halfwidth},
                  {"insufficient", r.insufficient}},
                 out);
  return kOk;
}

// ---------------------------------------------------------------- rho-search

int cmd_rho_search(const Json& cfg, std::ostream& out) {
  const ParabolaProblem problem = parabola(cfg);
  const HyperParams base = hyperparams(cfg, "batch_size");
  const double kappa = get<double>(cfg, "kappa");
  const Observable g = observable(cfg);
  const ErrSettings settings = err_settings(cfg);
  const RhoGrid grid = RhoGrid::around(base.rho, kappa, get<std::size_t>(cfg, "grid_points"));
  const RhoSearchResult r = rho_star_search(problem, base, kappa, g, grid, settings);

  std::string csv = "rho,log_one_minus_rho,err,ci_halfwidth\n";
  for (const ErrResult& e : r.curve) {
    csv += format_shortest(e.rho_used) + "," + format_shortest(std::log1p(-e.rho_used)) + "," +
           format_shortest(e.err) + "," + format_shortest(e.ci_halfwidth) + "\n";
  }
  out << "kappa=" << format_shortest(kappa) << " rho*=" << format_shortest(r.rho_star)
      << " rule=" << format_shortest(r.rho_rule) << " |log gap|=" << format_shortest(r.log_gap)
      << "\n";
  out << "holdout Err=" << format_shortest(r.holdout.err)
      << " ci_halfwidth=" << format_shortest(r.holdout.ci_halfwidth)
      << " target-model Err=" << format_shortest(r.target_model_err)
      << (r.inconclusive ? " (inconclusive: flat error curve)" : "") << "\n";
  Outputs files(cfg, "rho-search");
  files.write(".csv", csv, out);
  files.manifest({{"rho_star", r.rho_star},
                  {"rho_rule", r.rho_rule},
                  {"log_gap", r.log_gap},
                  {"holdout_err", r.holdout.err},
                  {"holdout_ci_halfwidth", r.holdout.ci_halfwidth},
                  {"target_model_err", r.target_model_err},
                  {"inconclusive", r.inconclusive}},
                 out);
  return kOk;
}

// ---------------------------------------------------------------- sde-check

int cmd_sde_check(const Json& cfg, std::ostream& out) {
  const ParabolaProblem parab = parabola(cfg);
  const NgosSpec ngos = parab.ngos();
  WeakErrorProblem problem;
  problem.family = parse_sde_family(get<std::string>(cfg, "family"));
  problem.ngos = &ngos;
  problem.theta0 = parab.initial();
  problem.hp.epsilon = get<double>(cfg, "eps");
  problem.total_time = get<double>(cfg, "total_time");
  problem.beta0 = get<double>(cfg, "beta0");
  problem.gamma0 = get<double>(cfg, "gamma0");
  problem.c1 = get<double>(cfg, "c1");
  problem.c2 = get<double>(cfg, "c2");
  WeakErrorOptions options;
  options.h_divisor = get<double>(cfg, "h_divisor");
  const std::string coupling = get<std::string>(cfg, "coupling");
  if (coupling != "common_noise" && coupling != "independent") {
    config_fail("field 'coupling' must be common_noise or independent");
  }
  options.coupling = coupling == "independent" ? WeakErrorCoupling::independent
                                               : WeakErrorCoupling::common_noise;
  options.threads = resolve_threads(get<std::size_t>(cfg, "threads"));
  options.ci_tolerance = get<double>(cfg, "ci_tolerance");
  const auto points =
      weak_error(problem, observable(cfg), get<std::vector<double>>(cfg, "etas"),
                 get<std::size_t>(cfg, "replicates"), get<std::uint64_t>(cfg, "seed"), options);

  Json ratios = Json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << "eta=" << format_shortest(points[i].eta)
        << " weak_error=" << format_shortest(points[i].max_weak_error)
        << " ci_halfwidth=" << format_shortest(points[i].ci_halfwidth);
    if (i > 0) {
      const double ratio = points[i - 1].max_weak_error / points[i].max_weak_error;
      ratios.push_back(ratio);
      out << " ratio=" << format_shortest(ratio);
    }
    out << "\n";
  }
  Outputs files(cfg, "sde-check");
  files.write(".csv", weak_error_to_csv(points), out);
  files.manifest({{"ratios", ratios}}, out);
  return kOk;
}

// ---------------------------------------------------------------- train-toy

TrajectoryRecord prefixed(const TrajectoryRecord& rec, const std::string& prefix) {
  TrajectoryRecord out;
  for (const TrajectoryRow& r : rec.rows()) out.add(r.t, r.step, r.kappa, prefix + r.metric_name, r.value);
  return out;
}

int cmd_train_toy(const Json& cfg, std::ostream& out) {
  BlobSpec spec;
  spec.classes = get<std::size_t>(cfg, "classes");
  spec.features = get<std::size_t>(cfg, "features");
  spec.train_size = get<std::size_t>(cfg, "train_size");
  spec.test_size = get<std::size_t>(cfg, "test_size");
  spec.separation = get<double>(cfg, "separation");
  spec.seed = get<std::uint64_t>(cfg, "data_seed");
  const HyperParams base = hyperparams(cfg, "batch_size");
  PolyakOptions options;
  options.epochs = get<int>(cfg, "epochs");
  options.init_scale = get<double>(cfg, "init_scale");
  options.init_seed = get<std::uint64_t>(cfg, "init_seed");
  const double kappa = get<double>(cfg, "kappa");
  const bool use_rule = get<bool>(cfg, "use_rule");
  const std::uint64_t seed = get<std::uint64_t>(cfg, "seed");

  const BlobDataset data = BlobDataset::generate(spec);
  const auto baseline = toy_polyak_train(data, base, options, 1.0, true, seed);
  const auto scaled = toy_polyak_train(data, base, options, kappa, use_rule, seed + 1);
  const double gap = max_metric_gap(baseline, scaled, kEmaTestAccuracy);
  const double model_gap = max_metric_gap(baseline, scaled, kModelTestAccuracy);
  out << "kappa=" << format_shortest(kappa) << " (" << (use_rule ? "with" : "without")
      << " EMA rule) max EMA test-accuracy gap=" << format_shortest(gap)
      << " model gap=" << format_shortest(model_gap) << "\n";

  TrajectoryRecord rec = prefixed(baseline, "baseline.");
  rec.append(prefixed(scaled, "scaled."));
  Outputs files(cfg, "train-toy");
  files.write(".csv", rec.to_csv(), out);
  files.manifest({{"max_ema_accuracy_gap", gap}, {"max_model_accuracy_gap", model_gap}}, out);
  return kOk;
}

// ---------------------------------------------------------------- distill

int cmd_distill(const Json& cfg, std::ostream& out) {
  DistillProblem problem;
  problem.target = ParamVector(get<std::vector<double>>(cfg, "target"));
  problem.supervised_weight = get<double>(cfg, "supervised_weight");
  problem.distill_weight = get<double>(cfg, "distill_weight");
  problem.b = get<double>(cfg, "b");
  problem.c = get<double>(cfg, "c");
  problem.theta0 = get<double>(cfg, "theta0");
  const HyperParams base = hyperparams(cfg, "batch_size");
  const double kappa = get<double>(cfg, "kappa");
  const bool use_rule = get<bool>(cfg, "use_rule");
  DistillRun run;
  run.total_time = get<double>(cfg, "total_time");
  run.epoch_time = get<double>(cfg, "epoch_time");
  run.record_stride = get<std::int64_t>(cfg, "record_stride");
  std::optional<ScalingPlan> plan;
  const std::string schedule = get<std::string>(cfg, "schedule");
  if (!schedule.empty()) {
    plan = progressive_schedule(base, OptimizerKind::sgd, parse_schedule(schedule),
                                parse_transition(get<std::string>(cfg, "transition")));
  }
  RngStream rng(get<std::uint64_t>(cfg, "seed"), stream_id(StreamRole::scaled, 0));
  const auto rec = toy_distill_train(problem, base, kappa, use_rule, plan, run, rng);
  const auto loss = rec.values(kDistillLoss);
  out << "steps=" << rec.rows().back().step << " final loss=" << format_shortest(loss.back())
      << "\n";
  Outputs files(cfg, "distill");
  files.write(".csv", rec.to_csv(), out);
  files.manifest({{"final_loss", loss.back()}, {"steps", rec.rows().back().step}}, out);
  return kOk;
}

// ---------------------------------------------------------------- progressive

int cmd_progressive(const Json& cfg, std::ostream& out) {
  const OptimizerKind optimizer = parse_optimizer(get<std::string>(cfg, "optimizer"));
  const HyperParams base = hyperparams(cfg, "base_batch");
  const ScalingPlan plan =
      progressive_schedule(base, optimizer, parse_schedule(get<std::string>(cfg, "schedule")),
                           parse_transition(get<std::string>(cfg, "transition")));
  const int epochs = get<int>(cfg, "epochs");
  std::string csv = "epoch,batch_size,kappa,eta,rho,beta1,beta2,epsilon,weight_decay\n";
  for (int e = 0; e < epochs; ++e) {
    const PlanStage s = plan.stage_at(e);
    csv += std::to_string(e) + "," + std::to_string(s.batch_size) + "," +
           format_shortest(s.kappa) + "," + format_shortest(s.scaled.eta) + "," +
           format_shortest(s.scaled.rho) + "," + format_shortest(s.scaled.beta1) + "," +
           format_shortest(s.scaled.beta2) + "," + format_shortest(s.scaled.epsilon) + "," +
           format_shortest(s.scaled.weight_decay) + "\n";
  }
  Outputs files(cfg, "progressive");
  files.write(".json", plan.to_json(), out);
  files.write(".csv", csv, out);
  files.manifest({{"stages", plan.stages.size()}}, out);
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::diverged:
    case ErrorCode::unstable_decay:
      return kDiverged;
    case ErrorCode::insufficient_samples:
      return kInsufficientSamples;
    default:
      return kConfigError;
  }
}

}  // namespace

std::string config_hash(const nlohmann::ordered_json& config) {
  const std::string text = hashed_view(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"EMA Scaling Rule toolbox and optimisation simulator", "emascale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EMASCALE_VERSION);

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help,
                 std::function<int(const Json&, std::ostream&)> body) -> Command& {
    auto c = std::make_unique<Command>();
    c->name = name;
    c->app = app.add_subcommand(name, help);
    c->body = std::move(body);
    commands.push_back(std::move(c));
    return *commands.back();
  };

  {
    Command& c = add("scale", "Scale hyperparameters to a new batch size", cmd_scale);
    c.app->add_option("--config", c.config_path, "JSON config; command-line flags override it");
    option<std::string>(c, "--output-dir", "output_dir", "", "Also write CSV + manifest here");
    option<std::string>(c, "--optimizer", "optimizer", "sgd", "sgd|heavy_ball|rmsprop|adam|adamw");
    hyperparam_options(c, "--base-batch", "base_batch", 256, 0.1, 0.99, true);
    option<std::int64_t>(c, "--target-batch", "target_batch", 256, "Target batch size");
    option<std::string>(c, "--ema-variant", "ema_variant", "exponential", "exponential|linear");
  }
  {
    Command& c = add("table", "Emit a table of scaled hyperparameters", cmd_table);
    common_options(c, 0, false);
    option<std::string>(c, "--rule", "rule", "sgd", "sgd|heavy_ball|rmsprop|adam|adamw|ema");
    hyperparam_options(c, "--base-batch", "base_batch", 256, 0.1, 0.99, true);
    option<std::vector<std::int64_t>>(
        c, "--batch-sizes", "batch_sizes",
        {32, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384, 32768, 65536}, "Batch sizes");
    flag(c, "--paper-rounding", "paper_rounding", false, "Round values to 5 decimals");
    option<std::string>(c, "--precision", "precision", "float64",
                        "float64|float32 (round base values to binary32 first)");
  }
  {
    Command& c = add("parabola", "Err of a scaled noisy-parabola run against its baseline",
                     cmd_parabola);
    common_options(c, 1000, true);
    parabola_options(c);
    hyperparam_options(c, "--batch-size", "batch_size", 1, 1e-4, 0.9999, false);
    option<double>(c, "--kappa", "kappa", 8.0, "Scaling factor (integer)");
    flag(c, "--use-rule,!--no-rule", "use_rule", true, "Apply the EMA Scaling Rule");
    option<std::string>(c, "--observable", "observable", "ema.coord_square(0)", "Test function g");
    flag(c, "--require-precision", "require_precision", false,
         "Fail when the CI exceeds 10% of Err");
  }
  {
    Command& c = add("rho-search", "Search the momentum minimising Err", cmd_rho_search);
    common_options(c, 1000, true);
    parabola_options(c);
    hyperparam_options(c, "--batch-size", "batch_size", 1, 1e-4, 0.9999, false);
    option<double>(c, "--kappa", "kappa", 8.0, "Scaling factor (integer)");
    option<std::size_t>(c, "--grid-points", "grid_points", 41, "Candidates, uniform in log(1-rho)");
    option<std::string>(c, "--observable", "observable", "ema.coord_square(0)", "Test function g");
    flag(c, "--require-precision", "require_precision", false,
         "Fail when the holdout CI exceeds 10% of Err");
  }
  {
    Command& c = add("sde-check", "Weak error of the discrete process against its SDE",
                     cmd_sde_check);
    common_options(c, 200, true);
    parabola_options(c);
    option<std::string>(c, "--family", "family", "sgd_ema", "sgd_ema|rmsprop_ema|adam_ema");
    option<std::vector<double>>(c, "--etas", "etas", {4e-4, 2e-4, 1e-4}, "Decreasing step sizes");
    option<double>(c, "--beta0", "beta0", 1.0, "EMA rate, held fixed along the ladder");
    option<double>(c, "--gamma0", "gamma0", 0.0, "RMSProp second-moment rate");
    option<double>(c, "--c1", "c1", 0.0, "Adam first-moment rate");
    option<double>(c, "--c2", "c2", 0.0, "Adam second-moment rate");
    option<double>(c, "--eps", "eps", 1e-8, "Adaptivity parameter");
    option<double>(c, "--h-divisor", "h_divisor", 16.0, "SDE step = smallest step time / this");
    option<std::string>(c, "--coupling", "coupling", "common_noise", "common_noise|independent");
    option<double>(c, "--ci-tolerance", "ci_tolerance", 0.0,
                   "Fail when CI > tolerance * error (0 disables)");
    option<std::string>(c, "--observable", "observable", "ema.coord_square(0)", "Test function g");
  }
  {
    Command& c = add("train-toy", "Polyak-Ruppert averaging on a synthetic classifier",
                     cmd_train_toy);
    common_options(c, 1, true);
    option<std::size_t>(c, "--classes", "classes", 10, "Classes");
    option<std::size_t>(c, "--features", "features", 32, "Features");
    option<std::size_t>(c, "--train-size", "train_size", 50000, "Training samples");
    option<std::size_t>(c, "--test-size", "test_size", 10000, "Test samples");
    option<double>(c, "--separation", "separation", 2.0, "Class-mean spread");
    option<std::uint64_t>(c, "--data-seed", "data_seed", 20240601, "Dataset seed");
    hyperparam_options(c, "--batch-size", "batch_size", 128, 0.02, 0.999, false);
    option<int>(c, "--epochs", "epochs", 10, "Epochs");
    option<double>(c, "--init-scale", "init_scale", 0.5, "Initial weight scale");
    option<std::uint64_t>(c, "--init-seed", "init_seed", 7, "Initial weight seed");
    option<double>(c, "--kappa", "kappa", 2.0, "Scaling factor");
    flag(c, "--use-rule,!--no-rule", "use_rule", true, "Apply the EMA Scaling Rule");
  }
  {
    Command& c = add("distill", "Self-distillation toy where the loss reads the EMA", cmd_distill);
    common_options(c, 1, true);
    option<std::vector<double>>(c, "--target", "target", {1.0}, "Target y");
    option<double>(c, "--supervised-weight", "supervised_weight", 1.0, "Weight of |theta - y|^2");
    option<double>(c, "--distill-weight", "distill_weight", 1.0, "Weight mu of |theta - zeta|^2");
    option<double>(c, "--b", "b", 0.0, "Scaled additive noise coefficient");
    option<double>(c, "--c", "c", 0.0, "Additive noise");
    option<double>(c, "--theta0", "theta0", 0.0, "Initial value of every coordinate");
    hyperparam_options(c, "--batch-size", "batch_size", 64, 1e-3, 0.999, false);
    option<double>(c, "--kappa", "kappa", 1.0, "Scaling factor (ignored with a schedule)");
    flag(c, "--use-rule,!--no-rule", "use_rule", true, "Apply the EMA Scaling Rule");
    option<double>(c, "--total-time", "total_time", 1.0, "Continuous-time horizon");
    option<double>(c, "--epoch-time", "epoch_time", 0.05, "Continuous time per epoch");
    option<std::int64_t>(c, "--record-stride", "record_stride", 1, "Record every n steps");
    option<std::string>(c, "--schedule", "schedule", "", "Progressive plan, e.g. 0:64,5:1024");
    option<std::string>(c, "--transition", "transition", "step", "step|smooth_linear");
  }
  {
    Command& c = add("progressive", "Emit a progressive batch-size scaling plan", cmd_progressive);
    common_options(c, 0, false);
    option<std::string>(c, "--optimizer", "optimizer", "sgd", "sgd|heavy_ball|rmsprop|adam|adamw");
    hyperparam_options(c, "--base-batch", "base_batch", 1024, 0.02, 0.992, true);
    option<std::string>(c, "--schedule", "schedule", "0:1024,30:8192", "epoch:batch pairs");
    option<std::string>(c, "--transition", "transition", "step", "step|smooth_linear");
    option<int>(c, "--epochs", "epochs", 40, "Epochs in the per-epoch CSV");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  for (const auto& c : commands) {
    if (!c->app->parsed()) continue;
    try {
      const Json cfg = effective_config(*c);
      return c->body(cfg, out);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return exit_code(e);
    } catch (const nlohmann::json::exception& e) {
      err << "error: " << e.what() << "\n";
      return kConfigError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kFailure;
    }
  }
  return kConfigError;
}

}  // namespace emascale::cli
