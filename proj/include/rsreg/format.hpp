#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace rsreg {

/// Shortest decimal text that parses back to exactly `v`; "inf", "-inf",
/// "nan" for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) return "nan";
  return std::string(buf, res.ptr);
}

/// Inverse of format_double; throws std::invalid_argument.
inline double parse_double(const std::string& s) {
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

}  // namespace rsreg
