#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace delayflock::detail {

// 17 significant digits, enough to round-trip any double.
inline std::string fullPrecision(double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

// Shortest representation that round-trips.
inline std::string shortest(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace delayflock::detail
