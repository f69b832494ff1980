#pragma once

#include <cstdio>
#include <string>

namespace entrograph {

// Nine significant digits, '.' separator, locale independent.
inline std::string format_real(long double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9Lg", x);
  return buf;
}

}  // namespace entrograph
