#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "latentlab/distribution.hpp"

namespace latentlab {

/// Shortest round-trip decimal form; "inf" / "-inf" / "nan" for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// Inverse of format_double. Throws std::invalid_argument on malformed input.
inline double parse_double(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw std::invalid_argument("not a number: " + s);
  return v;
}

/// Space-separated tokens; padding printed as "^".
inline std::string format_tokens(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i] < 0 ? std::string("^") : std::to_string(tokens[i]);
  }
  return out;
}

/// A rectangular table of already-formatted cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  void write(std::ostream& os) const {
    write_line(os, header);
    for (const auto& r : rows) write_line(os, r);
  }

  std::string to_string() const;

private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
      if (!quote) {
        os << cells[i];
        continue;
      }
      os << '"';
      for (char c : cells[i]) {
        if (c == '"') os << '"';
        os << c;
      }
      os << '"';
    }
    os << '\n';
  }
};

} // namespace latentlab

#include <sstream>

inline std::string latentlab::CsvTable::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}
