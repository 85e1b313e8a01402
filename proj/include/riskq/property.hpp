#pragma once

// Labelling function, safety property expressions s(x) and the risk
// taxonomy. Labels are 1-based; label 0 means "the network is undecided".

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "riskq/error.hpp"
#include "riskq/norm.hpp"

namespace riskq {

using Label = int;

/// Outputs are clamped to this value before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// A margin must exceed epsilon_label by more than this to decide a label, so
/// that decimal thresholds behave as written (0.4 - 0.35 is not above 0.05).
inline constexpr double kMarginTolerance = 1e-12;

struct LabelDecision {
  Label label = 0;         // top label, or 0 when the margin is not significant
  Label top = 0;           // argmax, lowest index on ties
  double margin = 0.0;     // f_top - max_{j != top} f_j
  double epsilon_label = 0.0;
};

namespace detail {

// 0-based argmax with lowest-index tie breaking, optionally skipping one index.
inline std::size_t argmax(std::span<const double> v, std::optional<std::size_t> skip = {}) {
  std::size_t best = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (skip && *skip == i)
      continue;
    if (best == v.size() || v[i] > v[best])
      best = i;
  }
  return best;
}

inline std::size_t argmin(std::span<const double> v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

inline void check_label(Label l, std::size_t m, const char* field) {
  if (l < 1 || static_cast<std::size_t>(l) > m)
    throw ConfigError(std::string(field) + " must be a label in 1.." + std::to_string(m) +
                      " (got " + std::to_string(l) + ")");
}

} // namespace detail

inline LabelDecision label(std::span<const double> out, double epsilon_label) {
  if (out.size() < 2)
    throw ConfigError("labelling needs at least 2 outputs (got " + std::to_string(out.size()) + ")");
  if (!(epsilon_label >= 0.0 && epsilon_label < 1.0))
    throw ConfigError("epsilon_label must lie in [0, 1)");
  const std::size_t k = detail::argmax(out);
  const std::size_t runner_up = detail::argmax(out, k);
  LabelDecision d;
  d.top = static_cast<Label>(k + 1);
  d.margin = out[k] - out[runner_up];
  d.epsilon_label = epsilon_label;
  d.label = d.margin > epsilon_label + kMarginTolerance ? d.top : 0;
  return d;
}

// ---------------------------------------------------------------------------
// Property expressions. A negative value signals a safety risk.

/// f_l1 - f_l2 - epsilon.
struct ConfidenceInterval {
  Label l1 = 1;
  Label l2 = 2;
  double epsilon = 0.0;
};

/// KL(uniform || f) - epsilon.
struct UncertaintyUniform {
  double epsilon = 0.0;
};

/// -epsilon - mean_l log(f_l / reference_l).
struct UncertaintyReference {
  Vector reference;
  double epsilon = 0.0;
};

/// f_l - epsilon.
struct Reachability {
  Label label = 1;
  double epsilon = 0.5;
};

using PropertyExpr =
    std::variant<ConfidenceInterval, UncertaintyUniform, UncertaintyReference, Reachability>;

inline std::string property_kind(const PropertyExpr& expr) {
  static constexpr const char* names[] = {"confidence_interval", "uncertainty_uniform",
                                          "uncertainty_reference", "reachability"};
  return names[expr.index()];
}

/// Checks the parameter ranges of expr against a network with m outputs.
inline void validate(const PropertyExpr& expr, std::size_t m) {
  std::visit(
      [m](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ConfidenceInterval>) {
          detail::check_label(e.l1, m, "l1");
          detail::check_label(e.l2, m, "l2");
          if (e.l1 == e.l2)
            throw ConfigError("l1 and l2 must differ");
          if (!(e.epsilon >= 0.0 && e.epsilon <= 1.0))
            throw ConfigError("epsilon must lie in [0, 1] for a confidence interval");
        } else if constexpr (std::is_same_v<T, UncertaintyUniform>) {
          if (!(e.epsilon > 0.0) || !std::isfinite(e.epsilon))
            throw ConfigError("epsilon must be positive for an uncertainty property");
        } else if constexpr (std::is_same_v<T, UncertaintyReference>) {
          if (!(e.epsilon > 0.0) || !std::isfinite(e.epsilon))
            throw ConfigError("epsilon must be positive for an uncertainty property");
          if (e.reference.size() != m)
            throw ConfigError("reference distribution needs " + std::to_string(m) + " entries");
          double total = 0.0;
          for (double r : e.reference) {
            if (!(r > 0.0))
              throw ConfigError("reference distribution entries must be strictly positive");
            total += r;
          }
          if (std::abs(total - 1.0) > 1e-6)
            throw ConfigError("reference distribution must sum to 1");
        } else {
          detail::check_label(e.label, m, "label");
          if (!(e.epsilon > 0.0 && e.epsilon < 1.0))
            throw ConfigError("epsilon must lie in (0, 1) for a reachability property");
        }
      },
      expr);
}

inline double eval_ci(const ConfidenceInterval& e, std::span<const double> out) {
  return out[e.l1 - 1] - out[e.l2 - 1] - e.epsilon;
}

/// KL divergence of the uniform distribution from out, with the probability
/// floor applied.
inline double kl_from_uniform(std::span<const double> out) {
  const double m = static_cast<double>(out.size());
  double acc = 0.0;
  for (double f : out)
    acc -= std::log(m * std::max(f, kProbabilityFloor));
  return acc / m;
}

inline double eval_uncertainty(const UncertaintyUniform& e, std::span<const double> out) {
  return kl_from_uniform(out) - e.epsilon;
}

inline double eval_uncertainty_ref(const UncertaintyReference& e, std::span<const double> out) {
  const double m = static_cast<double>(out.size());
  double acc = 0.0;
  for (std::size_t l = 0; l < out.size(); ++l)
    acc += std::log(std::max(out[l], kProbabilityFloor) / e.reference[l]);
  return -e.epsilon - acc / m;
}

inline double eval_reachability(const Reachability& e, std::span<const double> out) {
  return out[e.label - 1] - e.epsilon;
}

inline double evaluate(const PropertyExpr& expr, std::span<const double> out) {
  return std::visit(
      [out](const auto& e) -> double {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ConfidenceInterval>)
          return eval_ci(e, out);
        else if constexpr (std::is_same_v<T, UncertaintyUniform>)
          return eval_uncertainty(e, out);
        else if constexpr (std::is_same_v<T, UncertaintyReference>)
          return eval_uncertainty_ref(e, out);
        else
          return eval_reachability(e, out);
      },
      expr);
}

// ---------------------------------------------------------------------------
// Confidence-interval instantiations.

enum class CiCase {
  Untargeted = 1, // top label vs. runner-up
  Targeted = 2,   // top label vs. a given label
  Extreme = 3,    // top label vs. least likely label
};

inline ConfidenceInterval make_ci_case(CiCase which, std::span<const double> out_at_x0,
                                       double epsilon, std::optional<Label> target = {}) {
  if (out_at_x0.size() < 2)
    throw ConfigError("confidence interval needs at least 2 outputs");
  const std::size_t j1 = detail::argmax(out_at_x0);
  ConfidenceInterval ci;
  ci.l1 = static_cast<Label>(j1 + 1);
  ci.epsilon = epsilon;
  switch (which) {
  case CiCase::Untargeted:
    ci.l2 = static_cast<Label>(detail::argmax(out_at_x0, j1) + 1);
    break;
  case CiCase::Targeted:
    if (!target)
      throw ConfigError("targeted confidence interval requires a target label");
    detail::check_label(*target, out_at_x0.size(), "target");
    if (*target == ci.l1)
      throw ConfigError("target label " + std::to_string(*target) +
                        " equals the current top label");
    ci.l2 = *target;
    break;
  case CiCase::Extreme: {
    std::size_t jm = detail::argmin(out_at_x0);
    if (jm == j1) // all outputs equal
      jm = detail::argmax(out_at_x0, j1);
    ci.l2 = static_cast<Label>(jm + 1);
    break;
  }
  }
  return ci;
}

// ---------------------------------------------------------------------------
// Risk taxonomy.

enum class RiskCategory { NoError, AdversarialExample, UncertaintyExample, InvariantExample };

inline std::string to_string(RiskCategory c) {
  switch (c) {
  case RiskCategory::NoError:
    return "no_error";
  case RiskCategory::AdversarialExample:
    return "adversarial_example";
  case RiskCategory::UncertaintyExample:
    return "uncertainty_example";
  case RiskCategory::InvariantExample:
    return "invariant_example";
  }
  return "?";
}

struct RiskClass {
  RiskCategory category = RiskCategory::NoError;
  std::pair<Label, Label> network_labels; // (l(x), l(x_hat))
  std::pair<Label, Label> oracle_labels;  // (O(x), O(x_hat))
};

/// Classifies a perturbed input x_hat against a legitimate input x, given the
/// network labels and externally supplied human-oracle labels.
inline RiskClass classify_risk(const LabelDecision& lx, const LabelDecision& lxhat, Label ox,
                               Label oxhat) {
  if (lx.label == 0 || ox != lx.label)
    throw ContractError("classify_risk requires l(x) = O(x) != 0 (got l(x)=" +
                        std::to_string(lx.label) + ", O(x)=" + std::to_string(ox) + ")");
  // rows: l(x_hat) = 0 | = l(x) | other; columns: O(x_hat) = 0 | = O(x) | other
  static constexpr RiskCategory table[3][3] = {
      {RiskCategory::NoError, RiskCategory::UncertaintyExample, RiskCategory::UncertaintyExample},
      {RiskCategory::AdversarialExample, RiskCategory::NoError, RiskCategory::InvariantExample},
      {RiskCategory::AdversarialExample, RiskCategory::AdversarialExample, RiskCategory::NoError},
  };
  const int row = lxhat.label == 0 ? 0 : (lxhat.label == lx.label ? 1 : 2);
  const int col = oxhat == 0 ? 0 : (oxhat == ox ? 1 : 2);
  return RiskClass{table[row][col], {lx.label, lxhat.label}, {ox, oxhat}};
}

} // namespace riskq
