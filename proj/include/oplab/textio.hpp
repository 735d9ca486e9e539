#pragma once

// Deterministic text formatting for report files: shortest-roundtrip doubles
// so identical runs produce byte-identical CSV output.

#include <charconv>
#include <string>

#include "oplab/cmatrix.hpp"

namespace oplab {

inline std::string formatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw Error(ErrKind::Input, "unformattable number");
  return std::string(buf, res.ptr);
}

inline std::string formatBool(bool b) { return b ? "1" : "0"; }

}  // namespace oplab
