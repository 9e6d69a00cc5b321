#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace cylab::io {

/// Locale-independent decimal rendering with 17 significant digits, enough to
/// round-trip any double exactly.
inline std::string fmt17(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(std::int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace cylab::io
