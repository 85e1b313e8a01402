#pragma once

// Augmented-Lagrangian outer loop for a single norm-ball constraint
// ||x - x0||_p <= d. Each sub-problem minimizes the shifted-log merit over a
// box with MADS.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskq/error.hpp"
#include "riskq/mads.hpp"
#include "riskq/norm.hpp"

namespace riskq {

struct AugLagConfig {
  double initial_lambda = 1.0;
  double initial_shift = 1.0;
  double penalty_growth = 10.0;
  double shift_decay = 0.5;
  double tolerance = 1e-4;    // a point is feasible when c(x) <= tolerance
  double barrier_tol = 1e-3;  // stop once lambda * q falls below this
  std::size_t max_outer = 12;
  std::uint64_t subproblem_evals = 0; // 0 splits the MADS budget evenly

  void validate() const {
    if (!(initial_lambda > 0.0) || !(initial_shift > 0.0))
      throw ConfigError("initial lambda and shift must be positive");
    if (!(penalty_growth > 1.0))
      throw ConfigError("penalty growth factor must be greater than 1");
    if (!(shift_decay > 0.0 && shift_decay < 1.0))
      throw ConfigError("shift decay must lie in (0, 1)");
    if (!(tolerance > 0.0) || !(barrier_tol > 0.0))
      throw ConfigError("tolerances must be positive");
    if (max_outer < 1)
      throw ConfigError("max_outer must be at least 1");
  }
};

/// c(x) = ||x - center||_p - radius; feasible where c(x) <= 0.
struct ConstraintFn {
  Vector center;
  double radius = 0.0;
  NormOrder p = NormOrder::L2;

  double operator()(std::span<const double> x) const { return distance(x, center, p) - radius; }

  void validate() const {
    if (p == NormOrder::Inf)
      throw ConfigError("the constrained solver handles p = 1 or 2; use box bounds for inf");
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw ConfigError("constraint radius must be positive");
  }
};

/// w - lambda * q * log(q + c); +inf outside the domain q + c > 0.
inline double merit(double w_val, double c_val, double lambda, double q) {
  const double shifted = q + c_val;
  if (!(shifted > 0.0) || !std::isfinite(w_val))
    return kInfinity;
  return w_val - lambda * q * std::log(shifted);
}

struct OuterIterate {
  double lambda = 0.0;
  double shift = 0.0;
  double value = kInfinity;      // w at the sub-problem solution
  double constraint = kInfinity; // c at the sub-problem solution
  bool feasible = false;
  std::uint64_t fevals = 0;
};

struct ConstrainedResult {
  Vector x_end;              // best feasible point, or best infeasible when none was found
  double value = kInfinity;  // w(x_end)
  bool feasible = false;
  std::uint64_t fevals = 0;
  std::uint64_t batches = 0;
  std::vector<OuterIterate> outer;
  std::vector<TraceEntry> trace; // sub-problem traces, concatenated
  std::vector<PathEntry> path;   // improvements of the best feasible value
};

template <BatchObjective Obj>
ConstrainedResult minimize_constrained(Obj&& obj, const ConstraintFn& constraint, const Vector& x0,
                                       const AugLagConfig& cfg, const MadsConfig& mads_cfg) {
  cfg.validate();
  mads_cfg.validate();
  constraint.validate();
  const std::size_t n = x0.size();
  if (constraint.center.size() != n)
    throw ConfigError("constraint centre dimension does not match the start point");
  if (!BoxBounds::unit(n).contains(x0))
    throw StartError("start point must lie in [0,1]^n");
  if (!(constraint(x0) < 0.0))
    throw StartError("start point must be strictly feasible");

  // The feasible set lies inside the L-infinity box of the same radius.
  const BoxBounds bounds = BoxBounds::around(constraint.center, constraint.radius);
  const std::uint64_t total = mads_cfg.max_fun_evals;
  const std::uint64_t per_sub =
      cfg.subproblem_evals > 0 ? cfg.subproblem_evals : std::max<std::uint64_t>(1, total / cfg.max_outer);

  ConstrainedResult result;
  Vector best_infeasible;
  double best_infeasible_c = kInfinity;
  double best_infeasible_w = kInfinity;
  double lambda = cfg.initial_lambda;
  double q = cfg.initial_shift;
  Vector start = x0;
  std::uint64_t seen = 0;

  for (std::size_t k = 0; k < cfg.max_outer && result.fevals < total; ++k) {
    // Once the shift falls below the start's constraint value the barrier
    // domain no longer contains it; nothing further can be solved.
    if (!(q - constraint(start) > 0.0))
      break;
    double sub_best_theta = kInfinity;
    double sub_best_w = kInfinity;
    auto subproblem = [&](std::span<const Vector> points) {
      const std::vector<double> w = obj(points);
      if (w.size() != points.size())
        throw ContractError("objective returned the wrong number of values");
      std::vector<double> theta(points.size());
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double c = constraint(points[i]);
        const double wi = std::isfinite(w[i]) ? w[i] : kInfinity;
        if (c <= cfg.tolerance) {
          if (wi < result.value) {
            result.value = wi;
            result.x_end = points[i];
            result.feasible = true;
            result.path.push_back({seen + i + 1, wi,
                                   mads_cfg.record_path ? points[i] : Vector{}});
          }
        } else if (!result.feasible &&
                   (c < best_infeasible_c || (c == best_infeasible_c && wi < best_infeasible_w))) {
          best_infeasible = points[i];
          best_infeasible_c = c;
          best_infeasible_w = wi;
        }
        // The barrier is applied to the slack -c(x), so it grows toward the
        // boundary from the inside and the merit is finite up to c(x) < q.
        theta[i] = merit(wi, -c, lambda, q);
        if (theta[i] < sub_best_theta) {
          sub_best_theta = theta[i];
          sub_best_w = wi;
        }
      }
      seen += points.size();
      return theta;
    };

    MadsConfig sub_cfg = mads_cfg;
    const double shrink = std::ldexp(1.0, -static_cast<int>(k));
    sub_cfg.initial_poll_size = mads_cfg.initial_poll_size * shrink;
    sub_cfg.initial_mesh_size = mads_cfg.initial_mesh_size * shrink;
    sub_cfg.max_fun_evals = std::min<std::uint64_t>(per_sub, total - result.fevals);
    sub_cfg.seed = mads_cfg.seed + k;

    MadsResult sub = minimize(subproblem, start, bounds, sub_cfg);
    result.fevals += sub.fevals;
    result.batches += sub.batches;
    result.trace.insert(result.trace.end(), sub.trace.begin(), sub.trace.end());

    const double c_end = constraint(sub.x_end);
    const bool feasible = c_end <= cfg.tolerance;
    OuterIterate it;
    it.lambda = lambda;
    it.shift = q;
    it.constraint = c_end;
    it.feasible = feasible;
    it.fevals = sub.fevals;
    it.value = sub_best_w;
    result.outer.push_back(it);

    const bool stationary = sub.stop == MadsStop::PollSize;
    if (!feasible)
      lambda *= cfg.penalty_growth;
    if (stationary && feasible && lambda * q <= cfg.barrier_tol)
      break;
    q *= cfg.shift_decay;
    if (result.feasible)
      start = result.x_end;
  }

  if (!result.feasible) {
    result.x_end = best_infeasible.empty() ? x0 : best_infeasible;
    result.value = best_infeasible_w;
  }
  return result;
}

} // namespace riskq
