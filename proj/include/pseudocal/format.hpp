#pragma once

#include <charconv>
#include <string>

namespace pseudocal {

/// Shortest text that parses back to the same double.
inline std::string format_number(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

}  // namespace pseudocal
