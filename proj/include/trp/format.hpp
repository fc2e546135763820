#pragma once

#include <charconv>
#include <string>

#include "trp/common.hpp"

namespace trp {

/// Shortest round-trip decimal form, locale-independent (CSV cells, logs).
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw NumericalError("number formatting failed");
  return std::string(buf, res.ptr);
}

}  // namespace trp
