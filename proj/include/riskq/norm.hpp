#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riskq/error.hpp"

namespace riskq {

using Vector = std::vector<double>;

enum class NormOrder { L1, L2, Inf };

inline std::string to_string(NormOrder p) {
  switch (p) {
  case NormOrder::L1:
    return "1";
  case NormOrder::L2:
    return "2";
  case NormOrder::Inf:
    return "inf";
  }
  return "?";
}

inline NormOrder parse_norm_order(std::string_view text) {
  if (text == "1")
    return NormOrder::L1;
  if (text == "2")
    return NormOrder::L2;
  if (text == "inf" || text == "Inf" || text == "INF")
    return NormOrder::Inf;
  throw ConfigError("p must be 1, 2, or inf (got '" + std::string(text) + "')");
}

inline double norm(std::span<const double> v, NormOrder p) {
  double acc = 0.0;
  switch (p) {
  case NormOrder::L1:
    for (double x : v)
      acc += std::abs(x);
    return acc;
  case NormOrder::L2:
    for (double x : v)
      acc += x * x;
    return std::sqrt(acc);
  case NormOrder::Inf:
    for (double x : v)
      acc = std::max(acc, std::abs(x));
    return acc;
  }
  return acc;
}

inline double distance(std::span<const double> a, std::span<const double> b,
                       NormOrder p) {
  double acc = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = std::abs(a[i] - b[i]);
    switch (p) {
    case NormOrder::L1:
      acc += diff;
      break;
    case NormOrder::L2:
      acc += diff * diff;
      break;
    case NormOrder::Inf:
      acc = std::max(acc, diff);
      break;
    }
  }
  return p == NormOrder::L2 ? std::sqrt(acc) : acc;
}

} // namespace riskq
