#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace kbump::csv {

/// Scientific notation with 15 significant digits.
inline std::string number(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.14e", x);
  return buffer;
}

inline void row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
  out << '\n';
}

}  // namespace kbump::csv
