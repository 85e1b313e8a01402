#pragma once

// Mesh Adaptive Direct Search with batched SEARCH and POLL stages.
//
// Every stage builds its whole candidate set first and hands it to the
// objective as one batch, so a network behind the objective sees one forward
// call per stage. When the evaluation budget cuts a stage short, a prefix of
// the candidate set is evaluated; a run with a larger budget therefore
// evaluates a superset of the points of a smaller-budget run with the same
// seed.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "riskq/error.hpp"
#include "riskq/norm.hpp"

namespace riskq {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct BoxBounds {
  Vector lower;
  Vector upper;

  static BoxBounds unit(std::size_t n) { return {Vector(n, 0.0), Vector(n, 1.0)}; }

  /// The L-infinity ball of radius d around center, intersected with [0,1]^n.
  static BoxBounds around(std::span<const double> center, double d) {
    BoxBounds b{Vector(center.size()), Vector(center.size())};
    for (std::size_t i = 0; i < center.size(); ++i) {
      b.lower[i] = std::max(center[i] - d, 0.0);
      b.upper[i] = std::min(center[i] + d, 1.0);
    }
    return b;
  }

  std::size_t dim() const { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size() || lower.empty())
      throw ConfigError("box bounds must be non-empty and of equal length");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]) || lower[i] < 0.0 || upper[i] > 1.0)
        throw ConfigError("box bounds coordinate " + std::to_string(i) +
                          " must satisfy 0 <= lower <= upper <= 1");
  }

  bool contains(std::span<const double> x) const {
    if (x.size() != lower.size())
      return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= lower[i] && x[i] <= upper[i]))
        return false;
    return true;
  }
};

struct MadsConfig {
  double initial_mesh_size = 1.0 / 1024.0; // 2^-10
  double initial_poll_size = 1.0;
  double expansion = 2.0;
  std::uint64_t max_fun_evals = 20000;
  double min_poll_size = 1e-6;
  std::size_t search_points = 0; // 0 selects max(2n, 32)
  std::uint64_t seed = 0;
  bool record_path = false; // keep every incumbent point, not only its value

  void validate() const {
    if (!(initial_mesh_size > 0.0) || !(initial_poll_size > 0.0))
      throw ConfigError("mesh and poll sizes must be positive");
    if (initial_mesh_size > initial_poll_size)
      throw ConfigError("initial mesh size must not exceed the initial poll size");
    if (!(expansion > 1.0))
      throw ConfigError("expansion factor must be greater than 1");
    if (max_fun_evals < 1)
      throw ConfigError("max_fun_evals must be at least 1");
    if (!(min_poll_size > 0.0))
      throw ConfigError("min_poll_size must be positive");
  }

  std::size_t search_points_for(std::size_t n) const {
    return search_points > 0 ? search_points : std::max<std::size_t>(2 * n, 32);
  }
};

/// A callable scoring a batch of points; one value per point, in order.
/// Non-finite values mark points that can never become the incumbent.
template <typename F>
concept BatchObjective = requires(F& f, std::span<const Vector> points) {
  { f(points) } -> std::convertible_to<std::vector<double>>;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double value = 0.0;
  double poll_size = 0.0;
};

struct PathEntry {
  std::uint64_t fevals = 0;
  double value = 0.0;
  Vector x;
};

enum class MadsStop { Budget, PollSize };

struct MadsState {
  Vector incumbent;
  double value = kInfinity;
  double mesh_size = 0.0;
  double poll_size = 0.0;
  double max_poll_size = 0.0;
  std::size_t iteration = 0;
  std::uint64_t fevals = 0;
  std::uint64_t batches = 0;
  std::uint64_t max_fun_evals = 0;
  std::size_t search_points = 0;
  std::vector<TraceEntry> trace;

  std::size_t dim() const { return incumbent.size(); }
  std::uint64_t remaining() const { return fevals >= max_fun_evals ? 0 : max_fun_evals - fevals; }
};

struct StageOutcome {
  bool success = false;
  Vector best;
  double value = kInfinity;
  std::size_t evaluated = 0;
};

struct MadsResult {
  Vector x_end;
  double value = kInfinity;
  std::vector<TraceEntry> trace;
  std::vector<PathEntry> path; // incumbents in order; points kept when record_path is set
  std::uint64_t fevals = 0;
  std::uint64_t batches = 0;
  std::size_t iterations = 0;
  MadsStop stop = MadsStop::Budget;
};

namespace detail {

// Moves candidate coordinate i back inside the box, then onto the mesh
// anchored at the incumbent, rounding toward the incumbent.
inline void clip_to_mesh(Vector& candidate, const Vector& anchor, const BoxBounds& bounds,
                         double mesh_size) {
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    double v = candidate[i];
    if (v >= bounds.lower[i] && v <= bounds.upper[i])
      continue;
    v = std::clamp(v, bounds.lower[i], bounds.upper[i]);
    const double steps = (v - anchor[i]) / mesh_size;
    const double snapped = steps >= 0 ? std::floor(steps + 1e-9) : std::ceil(steps - 1e-9);
    candidate[i] = std::clamp(anchor[i] + snapped * mesh_size, bounds.lower[i], bounds.upper[i]);
  }
}

inline double sanitize(double v) { return std::isfinite(v) ? v : kInfinity; }

template <BatchObjective Obj>
StageOutcome evaluate_stage(MadsState& state, Obj& obj, std::vector<Vector> candidates) {
  StageOutcome outcome;
  const auto allowed = static_cast<std::size_t>(
      std::min<std::uint64_t>(candidates.size(), state.remaining()));
  if (allowed == 0)
    return outcome;
  candidates.resize(allowed);
  const std::vector<double> raw = obj(std::span<const Vector>(candidates));
  if (raw.size() != candidates.size())
    throw ContractError("objective returned " + std::to_string(raw.size()) + " values for " +
                        std::to_string(candidates.size()) + " points");
  state.fevals += candidates.size();
  state.batches += 1;
  outcome.evaluated = candidates.size();
  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = sanitize(raw[i]);
    if (v < outcome.value) {
      outcome.value = v;
      best = i;
    }
  }
  if (best < candidates.size()) {
    outcome.best = std::move(candidates[best]);
    outcome.success = outcome.value < state.value;
  }
  return outcome;
}

} // namespace detail

/// Mesh points x_k + mesh * z * (+-e_i), z drawn from 1..floor(poll/mesh),
/// clipped to the box and snapped back onto the mesh.
template <typename Rng>
std::vector<Vector> search_candidates(const MadsState& state, const BoxBounds& bounds, Rng& rng) {
  const std::size_t n = state.dim();
  const auto max_steps = static_cast<std::uint64_t>(
      std::max(1.0, std::floor(state.poll_size / state.mesh_size + 1e-9)));
  std::uniform_int_distribution<std::size_t> pick_direction(0, 2 * n - 1);
  std::uniform_int_distribution<std::uint64_t> pick_steps(1, max_steps);
  std::vector<Vector> candidates;
  candidates.reserve(state.search_points);
  for (std::size_t c = 0; c < state.search_points; ++c) {
    const std::size_t column = pick_direction(rng);
    const std::uint64_t z = pick_steps(rng);
    Vector x = state.incumbent;
    const double step = static_cast<double>(z) * state.mesh_size;
    x[column % n] += column < n ? step : -step;
    detail::clip_to_mesh(x, state.incumbent, bounds, state.mesh_size);
    candidates.push_back(std::move(x));
  }
  return candidates;
}

/// The maximal positive basis {+-H e_i} of a random Householder reflection
/// H = I - 2 v v^T. Columns are unit vectors.
template <typename Rng>
std::vector<Vector> random_poll_directions(std::size_t n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  double len = 0.0;
  while (len < 1e-12) {
    len = 0.0;
    for (double& c : v) {
      c = gauss(rng);
      len += c * c;
    }
    len = std::sqrt(len);
  }
  for (double& c : v)
    c /= len;
  std::vector<Vector> dirs;
  dirs.reserve(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector col(n);
    for (std::size_t i = 0; i < n; ++i)
      col[i] = (i == j ? 1.0 : 0.0) - 2.0 * v[i] * v[j];
    dirs.push_back(col);
  }
  for (std::size_t j = 0; j < n; ++j) {
    Vector col = dirs[j];
    for (double& c : col)
      c = -c;
    dirs.push_back(std::move(col));
  }
  return dirs;
}

/// Poll points x_k + d for every direction, with d rounded toward zero onto
/// the mesh so that |d_i| <= poll * |dir_i|.
inline std::vector<Vector> poll_candidates(const MadsState& state, const BoxBounds& bounds,
                                           std::span<const Vector> directions) {
  std::vector<Vector> candidates;
  candidates.reserve(directions.size());
  for (const Vector& dir : directions) {
    Vector x = state.incumbent;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double steps = std::trunc(state.poll_size * dir[i] / state.mesh_size);
      x[i] += steps * state.mesh_size;
    }
    detail::clip_to_mesh(x, state.incumbent, bounds, state.mesh_size);
    candidates.push_back(std::move(x));
  }
  return candidates;
}

template <BatchObjective Obj, typename Rng>
StageOutcome search_stage(MadsState& state, Obj& obj, const BoxBounds& bounds, Rng& rng) {
  return detail::evaluate_stage(state, obj, search_candidates(state, bounds, rng));
}

template <BatchObjective Obj>
StageOutcome poll_stage(MadsState& state, Obj& obj, const BoxBounds& bounds,
                        std::span<const Vector> directions) {
  return detail::evaluate_stage(state, obj, poll_candidates(state, bounds, directions));
}

template <BatchObjective Obj, typename Rng>
StageOutcome poll_stage(MadsState& state, Obj& obj, const BoxBounds& bounds, Rng& rng) {
  const std::vector<Vector> dirs = random_poll_directions(state.dim(), rng);
  return poll_stage(state, obj, bounds, std::span<const Vector>(dirs));
}

/// Minimizes obj over the box starting from the best finite point of an
/// initial design (evaluated as one batch).
template <BatchObjective Obj>
MadsResult minimize(Obj&& obj, std::span<const Vector> initial_design, const BoxBounds& bounds,
                    const MadsConfig& cfg) {
  cfg.validate();
  bounds.validate();
  if (initial_design.empty())
    throw StartError("initial design is empty");
  if (initial_design.size() > cfg.max_fun_evals)
    throw ConfigError("initial design of " + std::to_string(initial_design.size()) +
                      " points exceeds max_fun_evals");
  for (const Vector& x : initial_design)
    if (!bounds.contains(x))
      throw StartError("start point lies outside the box bounds");

  const std::size_t n = bounds.dim();
  std::mt19937_64 rng(cfg.seed);
  MadsState state;
  state.mesh_size = cfg.initial_mesh_size;
  state.poll_size = cfg.initial_poll_size;
  state.max_poll_size = cfg.initial_poll_size;
  state.max_fun_evals = cfg.max_fun_evals;
  state.search_points = cfg.search_points_for(n);
  state.incumbent = initial_design.front();

  MadsResult result;
  auto record = [&](const Vector& x, double value) {
    result.path.push_back({state.fevals, value, cfg.record_path ? x : Vector{}});
  };

  {
    const std::vector<double> raw = obj(initial_design);
    if (raw.size() != initial_design.size())
      throw ContractError("objective returned the wrong number of values");
    state.fevals += initial_design.size();
    state.batches += 1;
    std::size_t best = initial_design.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double v = detail::sanitize(raw[i]);
      if (v < state.value) {
        state.value = v;
        best = i;
      }
    }
    if (best == initial_design.size())
      throw StartError("objective is not finite at any start point");
    state.incumbent = initial_design[best];
    record(state.incumbent, state.value);
  }

  result.stop = MadsStop::Budget;
  while (true) {
    if (state.fevals >= cfg.max_fun_evals) {
      result.stop = MadsStop::Budget;
      break;
    }
    if (state.poll_size < cfg.min_poll_size) {
      result.stop = MadsStop::PollSize;
      break;
    }
    StageOutcome search = search_stage(state, obj, bounds, rng);
    bool improved = search.success;
    bool poll_improved = false;
    if (improved) {
      state.incumbent = std::move(search.best);
      state.value = search.value;
    } else if (state.remaining() > 0) {
      StageOutcome poll = poll_stage(state, obj, bounds, rng);
      if (poll.success) {
        state.incumbent = std::move(poll.best);
        state.value = poll.value;
        improved = poll_improved = true;
      }
    }
    if (improved)
      record(state.incumbent, state.value);
    if (poll_improved) {
      if (state.poll_size * cfg.expansion <= state.max_poll_size) {
        state.mesh_size *= cfg.expansion;
        state.poll_size *= cfg.expansion;
      }
    } else if (!improved) {
      state.mesh_size /= cfg.expansion;
      state.poll_size /= cfg.expansion;
    }
    state.trace.push_back({state.iteration, state.value, state.poll_size});
    ++state.iteration;
  }

  result.x_end = state.incumbent;
  result.value = state.value;
  result.trace = std::move(state.trace);
  result.fevals = state.fevals;
  result.batches = state.batches;
  result.iterations = state.iteration;
  return result;
}

template <BatchObjective Obj>
MadsResult minimize(Obj&& obj, const Vector& x0, const BoxBounds& bounds, const MadsConfig& cfg) {
  return minimize(std::forward<Obj>(obj), std::span<const Vector>(&x0, 1), bounds, cfg);
}

} // namespace riskq
