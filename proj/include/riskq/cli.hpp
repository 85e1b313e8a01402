#pragma once

// Command-line front end. Each subcommand drives one quantifier operation:
//
//   robustness    lipschitz_metric with a confidence-interval property
//   targeted      targeted_robustness
//   uncertainty   uncertainty_search
//   reachability  reach_range
//   certify       certify_radius on stored reports
//   baseline-rs   random_sampling_baseline
//   oracle-grid   grid_oracle
//   inspect-model load_model summary
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 model
// error, 4 risk found with --fail-on-risk.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskq/csv.hpp"
#include "riskq/error.hpp"
#include "riskq/model_io.hpp"
#include "riskq/parallel.hpp"
#include "riskq/quantifier.hpp"

namespace riskq::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kModelError = 3, kRiskFound = 4 };

inline constexpr const char* kThreadsEnv = "RISKQ_THREADS";
inline constexpr std::uint64_t kDefaultBudget = 20000;
inline constexpr std::uint64_t kDefaultSeed = 0;
inline constexpr double kDefaultLabelEpsilon = 0.05;
inline constexpr std::uint64_t kDefaultPointsPerDim = 101;

namespace detail {

// Raw flag storage shared by every subcommand; only one subcommand parses.
struct Flags {
  std::string config, model, inputs, out, p, csv, trace_csv, report;
  std::vector<std::size_t> input_index;
  std::vector<double> center;
  double d = 0.0;
  double epsilon = 0.0;
  double label_epsilon = 0.0;
  std::uint64_t budget = 0, seed = 0, samples = 0, points_per_dim = 0;
  std::size_t threads = 0;
  int ci_case = 1;
  int target = 0;
  int label = 0;
  bool fail_on_risk = false;
  bool no_timing = false;
};

inline void add_run_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "JSON run configuration; flags override its fields");
  sub.add_option("--model", f.model, "model file");
  sub.add_option("--inputs", f.inputs, "inputs file");
  sub.add_option("--input-index", f.input_index, "indices into the inputs file (default: all)");
  sub.add_option("--center", f.center, "inline ball centre")->delimiter(',');
  sub.add_option("--d", f.d, "ball radius");
  sub.add_option("--p", f.p, "norm order: 1, 2 or inf");
  sub.add_option("--budget", f.budget, "function-evaluation budget (default 20000)");
  sub.add_option("--seed", f.seed, "random seed (default 0)");
  sub.add_option("--out", f.out, "report output path");
  sub.add_option("--threads", f.threads, "worker threads (fallback: RISKQ_THREADS)");
  sub.add_option("--label-epsilon", f.label_epsilon, "labelling margin threshold");
  sub.add_flag("--fail-on-risk", f.fail_on_risk, "exit 4 when a risk witness is found");
  sub.add_flag("--no-timing", f.no_timing, "write wall_time_ms as 0");
}

inline void add_ci_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--case", f.ci_case, "1 untargeted, 2 targeted, 3 extreme")->check(CLI::Range(1, 3));
  sub.add_option("--target", f.target, "target label for case 2");
  sub.add_option("--epsilon", f.epsilon, "property threshold");
  sub.add_option("--csv", f.csv, "CSV summary path");
}

inline bool given(const CLI::App& sub, const std::string& flag) {
  try {
    return sub.count(flag) > 0;
  } catch (const CLI::OptionNotFound&) {
    return false;
  }
}

// Config file first, flags on top.
inline RunConfig merge(const CLI::App& sub, const Flags& f, const std::string& command) {
  RunConfig cfg = given(sub, "--config") ? load_config(f.config) : RunConfig{};
  if (given(sub, "--model"))
    cfg.model = f.model;
  if (given(sub, "--inputs"))
    cfg.inputs = f.inputs;
  if (given(sub, "--input-index"))
    cfg.input_index = f.input_index;
  if (given(sub, "--center")) {
    for (std::size_t i = 0; i < f.center.size(); ++i)
      if (!(f.center[i] >= 0.0 && f.center[i] <= 1.0))
        throw ConfigError("--center[" + std::to_string(i) + "] must lie in [0, 1]");
    cfg.center = f.center;
  }
  if (given(sub, "--d")) {
    if (!(f.d > 0.0) || !std::isfinite(f.d))
      throw ConfigError("--d must be positive");
    cfg.d = f.d;
  }
  if (given(sub, "--p")) {
    try {
      cfg.p = parse_norm_order(f.p);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--p: ") + e.what());
    }
  }
  if (given(sub, "--budget")) {
    if (f.budget == 0)
      throw ConfigError("--budget must be positive");
    cfg.budget = f.budget;
  }
  if (given(sub, "--seed"))
    cfg.seed = f.seed;
  if (given(sub, "--out"))
    cfg.out = f.out;
  if (given(sub, "--threads"))
    cfg.threads = f.threads;
  if (given(sub, "--label-epsilon")) {
    if (!(f.label_epsilon >= 0.0 && f.label_epsilon < 1.0))
      throw ConfigError("--label-epsilon must lie in [0, 1)");
    cfg.label_epsilon = f.label_epsilon;
  }
  if (given(sub, "--samples")) {
    if (f.samples == 0)
      throw ConfigError("--samples must be positive");
    cfg.samples = f.samples;
  }
  if (given(sub, "--points-per-dim")) {
    if (f.points_per_dim < 2)
      throw ConfigError("--points-per-dim must be at least 2");
    cfg.points_per_dim = f.points_per_dim;
  }
  if (given(sub, "--csv"))
    cfg.csv = f.csv;
  if (given(sub, "--trace-csv"))
    cfg.trace_csv = f.trace_csv;
  if (given(sub, "--report"))
    cfg.report = f.report;
  if (given(sub, "--fail-on-risk"))
    cfg.fail_on_risk = f.fail_on_risk;
  if (given(sub, "--no-timing"))
    cfg.no_timing = f.no_timing;

  PropertySpec prop = cfg.property.value_or(PropertySpec{});
  if (command == "uncertainty")
    prop.kind = "uncertainty";
  else if (command == "reachability")
    prop.kind = "reachability";
  else if (command == "targeted") {
    prop.kind = "confidence_interval";
    prop.ci_case = CiCase::Targeted;
  }
  if (given(sub, "--case"))
    prop.ci_case = static_cast<CiCase>(f.ci_case);
  if (given(sub, "--target"))
    prop.target = f.target;
  if (given(sub, "--label"))
    prop.label = f.label;
  if (given(sub, "--epsilon")) {
    if (!(f.epsilon >= 0.0) || !std::isfinite(f.epsilon))
      throw ConfigError("--epsilon must be non-negative");
    prop.epsilon = f.epsilon;
  }
  cfg.property = prop;
  return cfg;
}

struct Center {
  long long id = -1;
  Vector x;
  std::optional<Label> oracle;
};

// Flag-level checks that need no model.
inline void require_run_fields(const RunConfig& cfg, const std::string& command) {
  if (!cfg.model)
    throw ConfigError("--model is required");
  if (!cfg.d)
    throw ConfigError("--d is required");
  if (!cfg.center && !cfg.inputs)
    throw ConfigError("a centre is required: --center or --inputs");
  if (cfg.center && cfg.inputs)
    throw ConfigError("--center and --inputs are mutually exclusive");
  if (!cfg.inputs && !cfg.input_index.empty())
    throw ConfigError("--input-index needs --inputs");
  const PropertySpec& prop = *cfg.property;
  if (command == "uncertainty" && !prop.epsilon)
    throw ConfigError("--epsilon is required for uncertainty (no default)");
  if (command == "reachability" && !prop.label)
    throw ConfigError("--label is required for reachability");
  if (prop.kind == "confidence_interval" && prop.ci_case == CiCase::Targeted && !prop.target)
    throw ConfigError("--target is required for a targeted property");
}

inline std::vector<Center> resolve_centers(const RunConfig& cfg) {
  std::vector<Center> centers;
  if (cfg.center) {
    centers.push_back({-1, *cfg.center, std::nullopt});
    return centers;
  }
  const std::vector<InputRecord> records = load_inputs(*cfg.inputs);
  if (records.empty())
    throw ConfigError("inputs file '" + *cfg.inputs + "' holds no inputs");
  std::vector<std::size_t> indices = cfg.input_index;
  if (indices.empty())
    for (std::size_t i = 0; i < records.size(); ++i)
      indices.push_back(i);
  for (std::size_t i : indices) {
    if (i >= records.size())
      throw ConfigError("--input-index " + std::to_string(i) + " is out of range (inputs file has " +
                        std::to_string(records.size()) + " entries)");
    centers.push_back({static_cast<long long>(i), records[i].x, records[i].label});
  }
  return centers;
}

inline PropertyExpr resolve_property(const PropertySpec& spec, const Network& net, const Vector& x) {
  const double eps = spec.epsilon.value_or(0.0);
  if (spec.kind == "uncertainty")
    return UncertaintyUniform{eps};
  if (spec.kind == "reachability")
    return Reachability{*spec.label, eps};
  return make_ci_case(spec.ci_case, net.forward_single(x), eps, spec.target);
}

inline void write_text(const std::string& path, const std::string& text) {
  riskq::detail::write_file(path, text);
}

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

inline std::string center_name(long long id) {
  return id < 0 ? std::string("centre") : "input " + std::to_string(id);
}

inline void print_report(std::ostream& out, const QuantReport& r) {
  out << center_name(r.input_id) << ": " << to_string(r.method) << " p=" << to_string(r.ball.p)
      << " d=" << fmt(r.ball.radius) << " Q=" << fmt(r.q_estimate) << " s(x)=" << fmt(r.s_at_x)
      << " d'=" << fmt(r.safe_radius) << (r.radius_clamped ? " (clamped)" : "")
      << " fevals=" << r.fevals << " batches=" << r.batches << "\n";
  if (r.risk_found)
    out << "  risk: s=" << fmt(r.risk_found->s) << " inside the ball\n";
}

class Runner {
public:
  Runner(RunConfig cfg, std::ostream& out) : cfg_(std::move(cfg)), out_(out) {}

  void apply_threads() const {
    if (cfg_.threads) {
      if (*cfg_.threads == 0)
        throw ConfigError("--threads must be positive");
      set_worker_threads(*cfg_.threads);
    } else if (const char* env = std::getenv(kThreadsEnv)) {
      char* end = nullptr;
      const unsigned long v = std::strtoul(env, &end, 10);
      if (end == env || *end != '\0' || v == 0)
        throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer");
      set_worker_threads(v);
    }
  }

  QuantOptions options() const {
    QuantOptions opts;
    opts.budget = cfg_.budget.value_or(kDefaultBudget);
    opts.seed = cfg_.seed.value_or(kDefaultSeed);
    return opts;
  }

  NormBall ball(const Vector& x) const { return {x, *cfg_.d, cfg_.p.value_or(NormOrder::Inf)}; }

  // Shared driver for the commands producing one QuantReport per centre.
  template <typename Compute>
  int quantify(Compute compute) {
    require_run_fields(cfg_, command_);
    const std::vector<Center> centers = resolve_centers(cfg_);
    apply_threads();
    const ModelFile model = load_model(*cfg_.model);
    std::vector<QuantReport> reports;
    bool risk = false;
    for (const Center& c : centers) {
      if (c.x.size() != model.network.input_dim())
        throw ConfigError(center_name(c.id) + " has dimension " + std::to_string(c.x.size()) +
                          ", the model expects " + std::to_string(model.network.input_dim()));
      QuantReport r = compute(model.network, c);
      r.model_digest = model.digest;
      r.input_id = c.id;
      if (cfg_.no_timing.value_or(false))
        r.wall_time_ms = 0.0;
      risk = risk || r.risk_found.has_value();
      print_report(out_, r);
      reports.push_back(std::move(r));
    }
    if (cfg_.out)
      save_reports(reports, *cfg_.out);
    if (cfg_.csv)
      emit_csv(reports, *cfg_.csv);
    return risk && cfg_.fail_on_risk.value_or(false) ? kRiskFound : kOk;
  }

  int robustness() {
    return quantify([this](const Network& net, const Center& c) {
      const PropertyExpr expr = resolve_property(*cfg_.property, net, c.x);
      return lipschitz_metric(net, expr, ball(c.x), options());
    });
  }

  int targeted() {
    return quantify([this](const Network& net, const Center& c) {
      return targeted_robustness(net, *cfg_.property->target, ball(c.x), options(),
                                 cfg_.property->epsilon.value_or(0.0));
    });
  }

  int baseline() {
    return quantify([this](const Network& net, const Center& c) {
      const PropertyExpr expr = resolve_property(*cfg_.property, net, c.x);
      const QuantOptions opts = options();
      return random_sampling_baseline(net, expr, ball(c.x), cfg_.samples.value_or(opts.budget), opts.seed);
    });
  }

  int oracle() {
    return quantify([this](const Network& net, const Center& c) {
      const PropertyExpr expr = resolve_property(*cfg_.property, net, c.x);
      return grid_oracle(net, expr, ball(c.x),
                         static_cast<std::size_t>(cfg_.points_per_dim.value_or(kDefaultPointsPerDim)));
    });
  }

  int uncertainty() {
    std::ostringstream trace;
    trace << "input_id,iteration,fevals,kl\n";
    bool any_example = false;
    const double label_eps = cfg_.label_epsilon.value_or(kDefaultLabelEpsilon);
    const int code = quantify([&](const Network& net, const Center& c) {
      UncertaintyResult u = uncertainty_search(net, ball(c.x), *cfg_.property->epsilon, options(), label_eps);
      for (std::size_t i = 0; i < u.trajectory.size(); ++i)
        trace << c.id << "," << i << "," << u.trajectory[i].fevals << ","
              << csv_number(u.trajectory[i].kl) << "\n";
      out_ << center_name(c.id) << ": min KL=" << fmt(u.min_kl) << " label="
           << u.closest_label.label << (u.example_found ? " -> uncertainty example" : "") << "\n";
      any_example = any_example || u.example_found;
      return std::move(u.report);
    });
    if (cfg_.trace_csv)
      write_text(*cfg_.trace_csv, trace.str());
    if (code == kOk && any_example && cfg_.fail_on_risk.value_or(false))
      return kRiskFound;
    return code;
  }

  int reachability() {
    require_run_fields(cfg_, command_);
    const std::vector<Center> centers = resolve_centers(cfg_);
    apply_threads();
    const ModelFile model = load_model(*cfg_.model);
    const QuantOptions opts = options();
    const Label l = *cfg_.property->label;
    const double eps = cfg_.property->epsilon.value_or(0.0);
    Json docs = Json::array();
    bool any = false;
    for (const Center& c : centers) {
      if (c.x.size() != model.network.input_dim())
        throw ConfigError(center_name(c.id) + " has dimension " + std::to_string(c.x.size()) +
                          ", the model expects " + std::to_string(model.network.input_dim()));
      const ReachResult r = reach_range(model.network, ball(c.x), l, eps, opts);
      out_ << center_name(c.id) << ": max f_" << l << "=" << fmt(r.max_value) << " f_" << l
           << "(x)=" << fmt(r.value_at_x) << (r.reachable ? " reachable" : " not reachable")
           << " fevals=" << r.fevals << "\n";
      any = any || r.reachable;
      const NormBall b = ball(c.x);
      docs.push_back({{"schema_version", kReportSchemaVersion},
                      {"kind", "reachability"},
                      {"label", l},
                      {"epsilon", eps},
                      {"ball", {{"center", encode_f64(b.center)}, {"dim", b.dim()}, {"d", b.radius},
                                {"p", to_string(b.p)}}},
                      {"max_value", r.max_value},
                      {"value_at_x", r.value_at_x},
                      {"witness", encode_f64(r.witness)},
                      {"reachable", r.reachable},
                      {"fevals", r.fevals},
                      {"batches", r.batches},
                      {"method", to_string(r.method)},
                      {"budget", opts.budget},
                      {"seed", opts.seed},
                      {"model_digest", model.digest},
                      {"input_id", c.id}});
    }
    if (cfg_.out)
      write_text(*cfg_.out, (docs.size() == 1 ? docs[0] : Json{{"reports", docs}}).dump(2) + "\n");
    return any && cfg_.fail_on_risk.value_or(false) ? kRiskFound : kOk;
  }

  int certify() {
    if (!cfg_.report)
      throw ConfigError("--report is required");
    const std::vector<QuantReport> reports = load_reports(*cfg_.report);
    Json docs = Json::array();
    bool at_risk = false;
    for (const QuantReport& r : reports) {
      try {
        const Certificate c = certify_radius(r);
        out_ << center_name(r.input_id) << ": safe radius " << fmt(c.radius)
             << (c.clamped ? " (clamped to d)" : "") << " from Q=" << fmt(c.q) << " ("
             << c.q_provenance << ")\n";
        docs.push_back({{"input_id", r.input_id}, {"d_prime", c.radius}, {"clamped", c.clamped},
                        {"Q", c.q}, {"s_at_x", c.s_at_x}, {"d", c.d}, {"p", to_string(c.p)},
                        {"method", to_string(c.method)}, {"q_provenance", c.q_provenance},
                        {"model_digest", r.model_digest}});
      } catch (const CenterAtRiskError& e) {
        out_ << center_name(r.input_id) << ": not certifiable, " << e.what() << "\n";
        at_risk = true;
      }
    }
    if (cfg_.out)
      write_text(*cfg_.out, (docs.size() == 1 ? docs[0] : Json{{"certificates", docs}}).dump(2) + "\n");
    if (at_risk)
      return cfg_.fail_on_risk.value_or(false) ? kRiskFound : kFailure;
    return kOk;
  }

  int inspect() {
    if (!cfg_.model)
      throw ConfigError("--model is required");
    const ModelFile model = load_model(*cfg_.model);
    const Network& net = model.network;
    out_ << "name: " << (model.name.empty() ? "(unnamed)" : model.name) << "\n"
         << "format_version: " << model.format_version << "\n"
         << "digest: " << model.digest << "\n"
         << "input: " << to_string(net.input_shape()) << " (" << net.input_dim() << ")\n"
         << "outputs: " << net.output_dim() << "\n";
    if (model.training_accuracy)
      out_ << "training accuracy: " << fmt(*model.training_accuracy) << "\n";
    Json layers = Json::array();
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      const Layer& layer = net.layers()[i];
      out_ << "  " << i << " " << layer_name(layer.kind) << " " << to_string(layer.input) << " -> "
           << to_string(layer.output) << "\n";
      layers.push_back({{"index", i}, {"type", layer_name(layer.kind)},
                        {"input", to_string(layer.input)}, {"output", to_string(layer.output)}});
    }
    if (cfg_.out)
      write_text(*cfg_.out, Json{{"name", model.name},
                                 {"format_version", model.format_version},
                                 {"digest", model.digest},
                                 {"input_dim", net.input_dim()},
                                 {"output_dim", net.output_dim()},
                                 {"layers", layers}}
                                    .dump(2) + "\n");
    return kOk;
  }

  void set_command(std::string c) { command_ = std::move(c); }

private:
  static std::string csv_number(double v) { return riskq::detail::format_double(v); }

  RunConfig cfg_;
  std::ostream& out_;
  std::string command_;
};

} // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app("Black-box safety risk quantification for feedforward networks", "riskq");
  app.require_subcommand(1);
  detail::Flags f;

  auto* robustness = app.add_subcommand("robustness", "Lipschitz metric of a confidence-interval property");
  detail::add_run_flags(*robustness, f);
  detail::add_ci_flags(*robustness, f);

  auto* targeted = app.add_subcommand("targeted", "targeted robustness towards one label");
  detail::add_run_flags(*targeted, f);
  targeted->add_option("--target", f.target, "target label");
  targeted->add_option("--epsilon", f.epsilon, "property threshold");
  targeted->add_option("--csv", f.csv, "CSV summary path");

  auto* uncertainty = app.add_subcommand("uncertainty", "search for uncertainty examples");
  detail::add_run_flags(*uncertainty, f);
  uncertainty->add_option("--epsilon", f.epsilon, "KL threshold (required)");
  uncertainty->add_option("--trace-csv", f.trace_csv, "KL trajectory CSV path");
  uncertainty->add_option("--csv", f.csv, "CSV summary path");

  auto* reach = app.add_subcommand("reachability", "maximize one output over the ball");
  detail::add_run_flags(*reach, f);
  reach->add_option("--label", f.label, "output label (1-based)");
  reach->add_option("--epsilon", f.epsilon, "required increase over f_l(x)");

  auto* certify = app.add_subcommand("certify", "safe radius from stored reports");
  certify->add_option("--config", f.config, "JSON run configuration");
  certify->add_option("--report", f.report, "report file");
  certify->add_option("--out", f.out, "certificate output path");
  certify->add_flag("--fail-on-risk", f.fail_on_risk, "exit 4 when a centre is already at risk");

  auto* baseline = app.add_subcommand("baseline-rs", "random-sampling baseline");
  detail::add_run_flags(*baseline, f);
  detail::add_ci_flags(*baseline, f);
  baseline->add_option("--samples", f.samples, "sample count (default: budget)");

  auto* oracle = app.add_subcommand("oracle-grid", "exhaustive grid oracle (n <= 4)");
  detail::add_run_flags(*oracle, f);
  detail::add_ci_flags(*oracle, f);
  oracle->add_option("--points-per-dim", f.points_per_dim, "grid points per axis (default 101)");

  auto* inspect = app.add_subcommand("inspect-model", "print a model summary");
  inspect->add_option("--model", f.model, "model file");
  inspect->add_option("--out", f.out, "JSON summary path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    detail::Runner runner(detail::merge(*sub, f, command), out);
    runner.set_command(command);
    if (command == "robustness")
      return runner.robustness();
    if (command == "targeted")
      return runner.targeted();
    if (command == "uncertainty")
      return runner.uncertainty();
    if (command == "reachability")
      return runner.reachability();
    if (command == "certify")
      return runner.certify();
    if (command == "baseline-rs")
      return runner.baseline();
    if (command == "oracle-grid")
      return runner.oracle();
    return runner.inspect();
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kModelError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace riskq::cli
