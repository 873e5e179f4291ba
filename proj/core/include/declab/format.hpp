#pragma once

#include <charconv>
#include <ostream>
#include <string>

namespace declab {

/// Shortest round-trip decimal form of a double (std::to_chars), so text
/// outputs are deterministic and reload bit-exactly.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline void write_double(std::ostream& out, double v) {
  out << format_double(v);
}

}  // namespace declab
