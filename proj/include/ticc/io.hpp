#pragma once

// Small formatting helpers shared by report writers.

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace ticc {

/// Fixed-width scientific rendering used in every CSV file.
inline std::string fmtReal(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15e", x);
  return buf;
}

/// JSON has no inf/nan; they are written as strings.
inline nlohmann::json jsonReal(double x) {
  if (std::isfinite(x)) return x;
  return fmtReal(x);
}

}  // namespace ticc
