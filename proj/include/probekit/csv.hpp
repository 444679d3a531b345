#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <string>
#include <system_error>
#include <vector>

#include "probekit/error.hpp"

namespace probekit::csv {

// Minimal RFC-4180 style reader: comma separated, double quotes escape
// commas/quotes/newlines, CRLF tolerated. Good enough for the file formats
// we own; not a general CSV library.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads one record into `out`. Returns false on clean EOF.
  bool next(std::vector<std::string>& out) {
    out.clear();
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i == line.size()) {
        if (quoted) {
          // quoted field spans a newline; pull the next physical line
          if (!std::getline(in_, line)) fail("unterminated quote at line " + std::to_string(line_no_));
          ++line_no_;
          field.push_back('\n');
          i = 0;
          continue;
        }
        break;
      }
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else if (c == ',') {
        out.push_back(std::move(field));
        field.clear();
        ++i;
        continue;
      } else if (c == '\r' && i + 1 == line.size()) {
        // drop trailing CR from CRLF files
      } else {
        field.push_back(c);
      }
      ++i;
    }
    out.push_back(std::move(field));
    return true;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

inline std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

// Shortest round-trip decimal form; deterministic across platforms.
inline std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Strict full-string parse. Rejects empty cells, partial parses, inf/nan.
inline double parse_double_strict(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) fail("bad numeric value '" + cell + "' at " + where);
  if (!std::isfinite(v)) fail("non-finite value '" + cell + "' at " + where);
  return v;
}

}  // namespace probekit::csv
