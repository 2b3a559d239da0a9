#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

#include "phasecast/error.hpp"

namespace phasecast {

// Shortest text form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(std::string(what) + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

inline long long parse_int(std::string_view s, std::string_view what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(std::string(what) + ": '" + std::string(s) + "' is not an integer");
  }
  return v;
}

}  // namespace phasecast
