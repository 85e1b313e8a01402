#pragma once

// CSV summary of a homogeneous report list, one row per report.
// Columns: input_id,p,d,Q,d_prime,fevals,batches,method

#include <array>
#include <charconv>
#include <span>
#include <string>

#include "riskq/error.hpp"
#include "riskq/model_io.hpp"
#include "riskq/quantifier.hpp"

namespace riskq {

inline constexpr const char* kCsvHeader = "input_id,p,d,Q,d_prime,fevals,batches,method";

namespace detail {

// Shortest representation that round-trips.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string report_schema(const QuantReport& r) {
  return r.property ? property_kind(*r.property) : std::string("none");
}

} // namespace detail

inline std::string reports_to_csv(std::span<const QuantReport> reports) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const QuantReport& r : reports) {
    if (detail::report_schema(r) != detail::report_schema(reports.front()))
      throw ConfigError("cannot mix property kinds in one CSV ('" +
                        detail::report_schema(reports.front()) + "' and '" +
                        detail::report_schema(r) + "')");
    out += std::to_string(r.input_id) + "," + to_string(r.ball.p) + "," +
           detail::format_double(r.ball.radius) + "," + detail::format_double(r.q_estimate) + "," +
           detail::format_double(r.safe_radius) + "," + std::to_string(r.fevals) + "," +
           std::to_string(r.batches) + "," + to_string(r.method) + "\n";
  }
  return out;
}

inline void emit_csv(std::span<const QuantReport> reports, const std::string& path) {
  detail::write_file(path, reports_to_csv(reports));
}

} // namespace riskq
