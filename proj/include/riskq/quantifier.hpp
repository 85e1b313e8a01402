#pragma once

// Safety-risk quantification: Lipschitzian metric estimation over a norm
// ball, conservative safe radii, targeted robustness, uncertainty and
// reachability searches, plus the random-sampling baseline and the
// exhaustive grid oracle.
//
// The routines are written against a BatchProperty, a callable mapping a
// batch of inputs to property values s(x). NetworkProperty adapts a network
// and a PropertyExpr to that interface.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "riskq/constrained.hpp"
#include "riskq/error.hpp"
#include "riskq/mads.hpp"
#include "riskq/network.hpp"
#include "riskq/norm.hpp"
#include "riskq/property.hpp"

namespace riskq {

template <typename F>
concept BatchProperty = requires(F& f, std::span<const Vector> points) {
  { f(points) } -> std::convertible_to<std::vector<double>>;
};

struct NormBall {
  Vector center;
  double radius = 0.0;
  NormOrder p = NormOrder::Inf;

  std::size_t dim() const { return center.size(); }

  void validate() const {
    if (center.empty())
      throw ConfigError("ball centre is empty");
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw ConfigError("d must be positive");
    for (std::size_t i = 0; i < center.size(); ++i)
      if (!(center[i] >= 0.0 && center[i] <= 1.0))
        throw InputError("ball centre coordinate " + std::to_string(i) +
                         " lies outside [0,1]; inputs must be normalised");
  }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    return x.size() == center.size() && distance(x, center, p) <= radius + tol;
  }
};

enum class Method { Mads, AugLagMads, RandomSampling, GridOracle };

inline std::string to_string(Method m) {
  switch (m) {
  case Method::Mads:
    return "MADS";
  case Method::AugLagMads:
    return "AugLag+MADS";
  case Method::RandomSampling:
    return "RandomSampling";
  case Method::GridOracle:
    return "GridOracle";
  }
  return "?";
}

inline Method parse_method(std::string_view text) {
  for (Method m : {Method::Mads, Method::AugLagMads, Method::RandomSampling, Method::GridOracle})
    if (to_string(m) == text)
      return m;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

struct RiskWitness {
  Vector x;
  double s = 0.0;
};

struct QuantReport {
  std::optional<PropertyExpr> property;
  NormBall ball;
  double q_estimate = 0.0;
  Vector witness;             // equals the centre when no change of s was observed
  double s_at_x = 0.0;
  double s_at_witness = 0.0;
  double safe_radius = 0.0;
  bool radius_clamped = false;
  std::uint64_t fevals = 0;
  std::uint64_t batches = 0;
  Method method = Method::Mads;
  std::optional<RiskWitness> risk_found;
  // provenance
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  std::string model_digest;
  long long input_id = -1;
  double wall_time_ms = 0.0;
};

/// d' = min(s(x)/Q, d); d when Q = 0 (clamped); 0 when s(x) < 0.
inline std::pair<double, bool> safe_radius(double s_at_x, double q, double d) {
  if (s_at_x < 0.0)
    return {0.0, false};
  if (q <= 0.0)
    return {d, true};
  const double r = s_at_x / q;
  return r >= d ? std::pair{d, true} : std::pair{r, false};
}

struct Certificate {
  double radius = 0.0;
  bool clamped = false;
  double q = 0.0;
  double s_at_x = 0.0;
  double d = 0.0;
  NormOrder p = NormOrder::Inf;
  Method method = Method::Mads;
  // Q comes from a search, so it is a lower bound on the true supremum and
  // the radius is only as safe as that estimate.
  std::string q_provenance = "estimated";
};

inline Certificate certify_radius(const QuantReport& report) {
  if (report.s_at_x < 0.0)
    throw CenterAtRiskError("s(x) = " + std::to_string(report.s_at_x) +
                            " < 0: the centre already violates the property");
  Certificate c;
  std::tie(c.radius, c.clamped) = safe_radius(report.s_at_x, report.q_estimate, report.ball.radius);
  c.q = report.q_estimate;
  c.s_at_x = report.s_at_x;
  c.d = report.ball.radius;
  c.p = report.ball.p;
  c.method = report.method;
  c.q_provenance = report.method == Method::GridOracle ? "grid_maximum" : "estimated";
  return c;
}

/// Network + expression as a batched property.
class NetworkProperty {
public:
  NetworkProperty(const Network& net, PropertyExpr expr) : net_(&net), expr_(std::move(expr)) {
    validate(expr_, net.output_dim());
  }

  std::vector<double> operator()(std::span<const Vector> points) const {
    const std::vector<Vector> outs = net_->forward(points);
    std::vector<double> s(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i)
      s[i] = evaluate(expr_, outs[i]);
    return s;
  }

  const PropertyExpr& expr() const { return expr_; }
  const Network& network() const { return *net_; }

private:
  const Network* net_;
  PropertyExpr expr_;
};

/// The objective w(x_hat) = ||x_hat - x||_p / |s(x_hat) - s(x)| (+inf on 0/0
/// or no change). While evaluating it keeps the largest in-ball changing
/// rate, the most negative in-ball s, and evaluation counters.
template <BatchProperty Prop>
class RatioObjective {
public:
  RatioObjective(Prop property, NormBall ball, double s_at_x, double ball_tol = 0.0)
      : property_(std::move(property)), ball_(std::move(ball)), s_at_x_(s_at_x), tol_(ball_tol),
        witness_(ball_.center) {}

  std::vector<double> operator()(std::span<const Vector> points) {
    const std::vector<double> s = property_(points);
    evals_ += points.size();
    batches_ += 1;
    std::vector<double> w(points.size(), kInfinity);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double dist = distance(points[i], ball_.center, ball_.p);
      const double change = std::abs(s[i] - s_at_x_);
      if (dist > 0.0 && change > 0.0 && std::isfinite(change))
        w[i] = dist / change;
      if (dist <= ball_.radius + tol_) {
        if (dist > 0.0 && std::isfinite(change)) {
          const double rate = change / dist;
          if (rate > q_) {
            q_ = rate;
            witness_ = points[i];
            s_witness_ = s[i];
          }
        }
        if (s[i] < 0.0 && (!risk_ || s[i] < risk_->s))
          risk_ = RiskWitness{points[i], s[i]};
      }
    }
    return w;
  }

  double s_at_x() const { return s_at_x_; }
  double q() const { return q_; }
  const Vector& witness() const { return witness_; }
  double s_at_witness() const { return q_ > 0.0 ? s_witness_ : s_at_x_; }
  const std::optional<RiskWitness>& risk() const { return risk_; }
  std::uint64_t evals() const { return evals_; }
  std::uint64_t batches() const { return batches_; }
  Prop& property() { return property_; }

private:
  Prop property_;
  NormBall ball_;
  double s_at_x_;
  double tol_;
  double q_ = 0.0;
  Vector witness_;
  double s_witness_ = 0.0;
  std::optional<RiskWitness> risk_;
  std::uint64_t evals_ = 0;
  std::uint64_t batches_ = 0;
};

inline RatioObjective<NetworkProperty> objective_w(const Network& net, const PropertyExpr& expr,
                                                   const Vector& x, NormOrder p, double d = kInfinity) {
  NetworkProperty prop(net, expr);
  const double s_x = prop(std::span<const Vector>(&x, 1)).front();
  return RatioObjective<NetworkProperty>(std::move(prop), NormBall{x, d, p}, s_x);
}

struct QuantOptions {
  std::uint64_t budget = 20000;
  std::uint64_t seed = 0;
  MadsConfig mads{};    // max_fun_evals and seed are taken from budget/seed
  AugLagConfig auglag{}; // subproblem_evals = 0 picks a per-dimension budget
  double ball_tolerance = 1e-4; // for p = 1, 2 witnesses
  bool restarts = true;          // spend leftover budget on random restarts
};

namespace detail {

// Sub-problem budgets depend on the dimension only, never on the total
// budget, so a run with a larger budget replays a smaller one as a prefix.
inline AugLagConfig auglag_for(const QuantOptions& opts, std::size_t n) {
  AugLagConfig c = opts.auglag;
  if (c.subproblem_evals == 0)
    c.subproblem_evals = std::max<std::uint64_t>(200, 5 * (opts.mads.search_points_for(n) + 2 * n));
  return c;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

// Axis points centre +- (d/2) e_i clipped to the box, without duplicates of
// the centre. All lie inside the ball for every p.
inline std::vector<Vector> axis_design(const NormBall& ball) {
  std::vector<Vector> design;
  const BoxBounds box = BoxBounds::around(ball.center, ball.radius);
  for (std::size_t i = 0; i < ball.dim(); ++i)
    for (double sign : {1.0, -1.0}) {
      Vector x = ball.center;
      x[i] = std::clamp(x[i] + sign * ball.radius / 2.0, box.lower[i], box.upper[i]);
      if (x[i] != ball.center[i])
        design.push_back(std::move(x));
    }
  return design;
}

struct BallSampler {
  const NormBall& ball;
  BoxBounds box;

  explicit BallSampler(const NormBall& b) : ball(b), box(BoxBounds::around(b.center, b.radius)) {}

  template <typename Rng>
  Vector operator()(Rng& rng) const {
    const std::size_t n = ball.dim();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (true) {
      Vector x(n);
      if (ball.p == NormOrder::Inf) {
        for (std::size_t i = 0; i < n; ++i)
          x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
        return x;
      }
      Vector dir(n);
      if (ball.p == NormOrder::L2) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double& v : dir)
          v = gauss(rng);
      } else {
        std::exponential_distribution<double> expo(1.0);
        for (double& v : dir)
          v = unit(rng) < 0.5 ? -expo(rng) : expo(rng);
      }
      const double len = norm(dir, ball.p);
      if (!(len > 0.0))
        continue;
      const double r = ball.radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i)
        x[i] = std::clamp(ball.center[i] + r * dir[i] / len, 0.0, 1.0);
      if (ball.contains(x))
        return x;
    }
  }
};

template <BatchProperty Prop>
QuantReport finish_report(RatioObjective<Prop>& objective, const NormBall& ball, Method method,
                          std::uint64_t extra_evals, std::uint64_t extra_batches) {
  QuantReport r;
  r.ball = ball;
  r.method = method;
  r.s_at_x = objective.s_at_x();
  r.q_estimate = objective.q();
  r.witness = objective.witness();
  r.s_at_witness = objective.s_at_witness();
  r.risk_found = objective.risk();
  std::tie(r.safe_radius, r.radius_clamped) = safe_radius(r.s_at_x, r.q_estimate, ball.radius);
  r.fevals = objective.evals() + extra_evals;
  r.batches = objective.batches() + extra_batches;
  return r;
}

template <BatchProperty Prop>
double property_at(Prop& prop, const Vector& x) {
  return prop(std::span<const Vector>(&x, 1)).front();
}

} // namespace detail

/// Estimates Q(s, x, d, p) by minimizing w over the ball: MADS over the
/// clipped box for p = inf, the augmented-Lagrangian solver for p = 1, 2.
/// The result is a lower bound on the supremum.
template <BatchProperty Prop>
QuantReport lipschitz_metric(Prop prop, const NormBall& ball, const QuantOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  ball.validate();
  const std::size_t n = ball.dim();
  if (opts.budget < 2 * n + 1)
    throw ConfigError("budget " + std::to_string(opts.budget) + " is smaller than the poll set (" +
                      std::to_string(2 * n) + ") plus the centre evaluation");

  const double s_x = detail::property_at(prop, ball.center);
  const double tol = ball.p == NormOrder::Inf ? 0.0 : opts.ball_tolerance;
  RatioObjective<Prop> objective(std::move(prop), ball, s_x, tol);
  const Method method = ball.p == NormOrder::Inf ? Method::Mads : Method::AugLagMads;
  const std::uint64_t mads_budget = opts.budget - 1;

  // Initial design; falls back to random in-ball points when s does not
  // change on the axis points.
  std::vector<Vector> design = detail::axis_design(ball);
  std::mt19937_64 design_rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  const detail::BallSampler sampler(ball);
  std::vector<double> w;
  if (!design.empty())
    w = objective(std::span<const Vector>(design));
  if (std::none_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); })) {
    const std::uint64_t left = mads_budget - objective.evals();
    const std::size_t extra = static_cast<std::size_t>(std::min<std::uint64_t>(left, 2 * n));
    design.clear();
    for (std::size_t i = 0; i < extra; ++i)
      design.push_back(sampler(design_rng));
    w = design.empty() ? std::vector<double>{} : objective(std::span<const Vector>(design));
  }
  const auto best = std::min_element(w.begin(), w.end());
  if (best == w.end() || !std::isfinite(*best)) {
    QuantReport r = detail::finish_report(objective, ball, method, 1, 1);
    r.budget = opts.budget;
    r.seed = opts.seed;
    r.wall_time_ms = detail::elapsed_ms(started);
    return r;
  }
  const Vector start = design[static_cast<std::size_t>(best - w.begin())];

  // One search from the best design point, then restarts from the best of a
  // few random in-ball points while the budget lasts.
  MadsConfig cfg = opts.mads;
  cfg.seed = opts.seed;
  Vector from = start;
  for (std::uint64_t round = 0;; ++round) {
    const std::uint64_t left = mads_budget - objective.evals();
    if (left == 0 || (round > 0 && (!opts.restarts || left < 2 * n + 1)))
      break;
    cfg.max_fun_evals = left;
    cfg.seed = opts.seed + round;
    if (ball.p == NormOrder::Inf) {
      minimize(objective, from, BoxBounds::around(ball.center, ball.radius), cfg);
    } else {
      const ConstraintFn constraint{ball.center, ball.radius, ball.p};
      minimize_constrained(objective, constraint, from, detail::auglag_for(opts, ball.dim()), cfg);
    }
    const std::uint64_t after = mads_budget - objective.evals();
    if (after < 4 * n + 1)
      break;
    // Draw until some point changes s; give up when the budget runs short.
    bool found = false;
    while (!found && mads_budget - objective.evals() >= 4 * n + 1) {
      design.clear();
      for (std::size_t i = 0; i < 2 * n; ++i)
        design.push_back(sampler(design_rng));
      w = objective(std::span<const Vector>(design));
      const auto it = std::min_element(w.begin(), w.end());
      found = std::isfinite(*it);
      if (found)
        from = design[static_cast<std::size_t>(it - w.begin())];
    }
    if (!found)
      break;
  }
  QuantReport r = detail::finish_report(objective, ball, method, 1, 1);
  r.budget = opts.budget;
  r.seed = opts.seed;
  r.wall_time_ms = detail::elapsed_ms(started);
  return r;
}

inline QuantReport lipschitz_metric(const Network& net, const PropertyExpr& expr,
                                    const NormBall& ball, const QuantOptions& opts) {
  if (ball.dim() != net.input_dim())
    throw ShapeError("ball centre has dimension " + std::to_string(ball.dim()) +
                     ", network expects " + std::to_string(net.input_dim()));
  QuantReport r = lipschitz_metric(NetworkProperty(net, expr), ball, opts);
  r.property = expr;
  return r;
}

inline QuantReport lipschitz_metric(const Network& net, const PropertyExpr& expr,
                                    const NormBall& ball, std::uint64_t budget, std::uint64_t seed) {
  QuantOptions opts;
  opts.budget = budget;
  opts.seed = seed;
  return lipschitz_metric(net, expr, ball, opts);
}

inline QuantReport targeted_robustness(const Network& net, Label target, const NormBall& ball,
                                       const QuantOptions& opts, double epsilon = 0.0) {
  const Vector out = net.forward_single(ball.center);
  const ConfidenceInterval ci = make_ci_case(CiCase::Targeted, out, epsilon, target);
  return lipschitz_metric(net, ci, ball, opts);
}

/// Uniform samples from the ball (clipped to the unit box); Q is the largest
/// observed changing rate. The centre itself is never counted.
template <BatchProperty Prop>
QuantReport random_sampling_baseline(Prop prop, const NormBall& ball, std::uint64_t sample_count,
                                     std::uint64_t seed, std::size_t batch_size = 1024) {
  const auto started = std::chrono::steady_clock::now();
  ball.validate();
  if (sample_count < 1)
    throw ConfigError("sample_count must be at least 1");
  const double s_x = detail::property_at(prop, ball.center);
  RatioObjective<Prop> objective(std::move(prop), ball, s_x);
  std::mt19937_64 rng(seed);
  const detail::BallSampler sampler(ball);
  std::vector<Vector> chunk;
  for (std::uint64_t drawn = 0; drawn < sample_count;) {
    chunk.clear();
    while (chunk.size() < batch_size && drawn < sample_count) {
      chunk.push_back(sampler(rng));
      ++drawn;
    }
    objective(std::span<const Vector>(chunk));
  }
  QuantReport r = detail::finish_report(objective, ball, Method::RandomSampling, 1, 1);
  r.budget = sample_count;
  r.seed = seed;
  r.wall_time_ms = detail::elapsed_ms(started);
  return r;
}

inline QuantReport random_sampling_baseline(const Network& net, const PropertyExpr& expr,
                                            const NormBall& ball, std::uint64_t sample_count,
                                            std::uint64_t seed) {
  QuantReport r = random_sampling_baseline(NetworkProperty(net, expr), ball, sample_count, seed);
  r.property = expr;
  return r;
}

inline constexpr std::size_t kGridOracleMaxDim = 4;

/// Calls visit(batch) over every point of the regular grid with
/// points_per_dim points per axis on the ball's clipped box, keeping only
/// points inside the ball.
template <typename Visit>
void for_each_grid_batch(const NormBall& ball, std::size_t points_per_dim, Visit&& visit,
                         std::size_t batch_size = 4096) {
  const std::size_t n = ball.dim();
  const BoxBounds box = BoxBounds::around(ball.center, ball.radius);
  std::vector<std::size_t> idx(n, 0);
  std::vector<Vector> chunk;
  chunk.reserve(batch_size);
  const double steps = static_cast<double>(points_per_dim - 1);
  while (true) {
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * static_cast<double>(idx[i]) / steps;
    if (ball.p == NormOrder::Inf || ball.contains(x, 1e-12))
      chunk.push_back(std::move(x));
    if (chunk.size() == batch_size) {
      visit(std::span<const Vector>(chunk));
      chunk.clear();
    }
    std::size_t d = 0;
    while (d < n && ++idx[d] == points_per_dim)
      idx[d++] = 0;
    if (d == n)
      break;
  }
  if (!chunk.empty())
    visit(std::span<const Vector>(chunk));
}

/// Exhaustive grid maximum of the changing rate; only for n <= 4.
template <BatchProperty Prop>
QuantReport grid_oracle(Prop prop, const NormBall& ball, std::size_t points_per_dim) {
  const auto started = std::chrono::steady_clock::now();
  ball.validate();
  if (ball.dim() > kGridOracleMaxDim)
    throw ConfigError("grid oracle supports at most " + std::to_string(kGridOracleMaxDim) +
                      " input dimensions (got " + std::to_string(ball.dim()) + ")");
  if (points_per_dim < 2)
    throw ConfigError("points_per_dim must be at least 2");
  const double s_x = detail::property_at(prop, ball.center);
  RatioObjective<Prop> objective(std::move(prop), ball, s_x, 1e-12);
  for_each_grid_batch(ball, points_per_dim,
                      [&](std::span<const Vector> batch) { objective(batch); });
  QuantReport r = detail::finish_report(objective, ball, Method::GridOracle, 1, 1);
  r.budget = r.fevals;
  r.wall_time_ms = detail::elapsed_ms(started);
  return r;
}

inline QuantReport grid_oracle(const Network& net, const PropertyExpr& expr, const NormBall& ball,
                               std::size_t points_per_dim) {
  QuantReport r = grid_oracle(NetworkProperty(net, expr), ball, points_per_dim);
  r.property = expr;
  return r;
}

// ---------------------------------------------------------------------------

struct UncertaintyStep {
  std::uint64_t fevals = 0;
  double kl = 0.0;
  Vector x;
};

struct UncertaintyResult {
  QuantReport report;                   // Lipschitz metric of the uncertainty property
  std::vector<UncertaintyStep> trajectory; // incumbents of the KL minimization
  double min_kl = kInfinity;
  Vector closest;                       // input with the smallest KL found
  LabelDecision closest_label;
  bool example_found = false;           // KL < epsilon and label 0 at `closest`
};

/// Minimizes KL(uniform || f) over the ball (half the budget), then estimates
/// the Lipschitz metric of the uncertainty property (the other half).
inline UncertaintyResult uncertainty_search(const Network& net, const NormBall& ball, double epsilon,
                                            const QuantOptions& opts, double epsilon_label) {
  ball.validate();
  const UncertaintyUniform expr{epsilon};
  validate(expr, net.output_dim());
  if (ball.dim() != net.input_dim())
    throw ShapeError("ball centre dimension does not match the network input");
  if (opts.budget < 2 * (2 * ball.dim() + 1))
    throw ConfigError("budget too small for an uncertainty search");

  UncertaintyResult result;
  std::uint64_t kl_evals = 0;
  std::uint64_t kl_batches = 0;
  auto kl_objective = [&](std::span<const Vector> points) {
    const std::vector<Vector> outs = net.forward(points);
    kl_evals += points.size();
    kl_batches += 1;
    std::vector<double> v(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i)
      v[i] = kl_from_uniform(outs[i]);
    return v;
  };

  const std::uint64_t kl_budget = opts.budget / 2;
  MadsConfig cfg = opts.mads;
  cfg.seed = opts.seed;
  cfg.max_fun_evals = kl_budget;
  cfg.record_path = true;
  std::vector<PathEntry> path;
  if (ball.p == NormOrder::Inf) {
    path = minimize(kl_objective, ball.center, BoxBounds::around(ball.center, ball.radius), cfg).path;
  } else {
    const ConstraintFn constraint{ball.center, ball.radius, ball.p};
    path = minimize_constrained(kl_objective, constraint, ball.center, detail::auglag_for(opts, ball.dim()),
                                cfg)
               .path;
  }
  for (PathEntry& step : path)
    result.trajectory.push_back({step.fevals, step.value, std::move(step.x)});
  if (!result.trajectory.empty()) {
    result.min_kl = result.trajectory.back().kl;
    result.closest = result.trajectory.back().x;
    result.closest_label = label(net.forward_single(result.closest), epsilon_label);
    result.example_found = result.min_kl - epsilon < 0.0 && result.closest_label.label == 0;
  }

  QuantOptions metric_opts = opts;
  metric_opts.budget = opts.budget - kl_budget;
  result.report = lipschitz_metric(net, expr, ball, metric_opts);
  result.report.fevals += kl_evals;
  result.report.batches += kl_batches;
  result.report.budget = opts.budget;
  return result;
}

struct ReachResult {
  double max_value = 0.0;   // largest f_l found in the ball
  Vector witness;
  double value_at_x = 0.0;  // f_l(x)
  bool reachable = false;   // max_value >= f_l(x) + epsilon
  std::uint64_t fevals = 0;
  std::uint64_t batches = 0;
  Method method = Method::Mads;
};

/// Maximizes f_l over the ball; reachable when f_l(x) + epsilon is attained.
inline ReachResult reach_range(const Network& net, const NormBall& ball, Label l, double epsilon,
                               const QuantOptions& opts) {
  ball.validate();
  if (ball.dim() != net.input_dim())
    throw ShapeError("ball centre dimension does not match the network input");
  detail::check_label(l, net.output_dim(), "label");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("epsilon must be non-negative");
  if (opts.budget < 2 * ball.dim() + 1)
    throw ConfigError("budget is smaller than the poll set plus the start point");

  ReachResult result;
  auto neg_output = [&](std::span<const Vector> points) {
    const std::vector<Vector> outs = net.forward(points);
    result.fevals += points.size();
    result.batches += 1;
    std::vector<double> v(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i)
      v[i] = -outs[i][static_cast<std::size_t>(l - 1)];
    return v;
  };

  // Start from the best of the centre and the axis design.
  std::vector<Vector> design{ball.center};
  for (Vector& x : detail::axis_design(ball))
    design.push_back(std::move(x));
  MadsConfig cfg = opts.mads;
  cfg.seed = opts.seed;
  cfg.max_fun_evals = opts.budget;
  if (ball.p == NormOrder::Inf) {
    const MadsResult r =
        minimize(neg_output, std::span<const Vector>(design), BoxBounds::around(ball.center, ball.radius), cfg);
    result.max_value = -r.value;
    result.witness = r.x_end;
    result.method = Method::Mads;
  } else {
    const std::vector<double> v = neg_output(std::span<const Vector>(design));
    const std::size_t best = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    cfg.max_fun_evals = opts.budget - design.size();
    const ConstraintFn constraint{ball.center, ball.radius, ball.p};
    const Vector start = best == 0 ? ball.center : design[best];
    const ConstrainedResult r =
        minimize_constrained(neg_output, constraint, start, detail::auglag_for(opts, ball.dim()), cfg);
    const bool better = r.feasible && -r.value > -v[best];
    result.max_value = better ? -r.value : -v[best];
    result.witness = better ? r.x_end : design[best];
    result.method = Method::AugLagMads;
  }
  result.value_at_x = net.forward_single(ball.center)[static_cast<std::size_t>(l - 1)];
  result.fevals += 1;
  result.batches += 1;
  result.reachable = result.max_value >= result.value_at_x + epsilon;
  return result;
}

} // namespace riskq
