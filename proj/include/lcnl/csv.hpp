#pragma once

#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lcnl/error.hpp"

namespace lcnl {

/// Header plus rows of a comma-separated file. `lines[r]` is the 1-based
/// source line of row r.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    return std::nullopt;
  }

  std::size_t require(const std::string& name, const std::string& source) const {
    auto k = column(name);
    if (!k) throw ModelError(ErrorKind::parse_error, name, "unknown column in " + source);
    return *k;
  }
};

namespace detail {

/// Splits one record. Double quotes may wrap a field; "" inside quotes is a
/// literal quote. Returns false if a quoted field is left open.
inline bool split_csv_line(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(std::move(field));
  return !quoted;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>") {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> fields;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    if (!detail::split_csv_line(line, fields))
      throw ModelError(ErrorKind::parse_error, source + ":" + std::to_string(lineno), "unterminated quoted field");
    if (!have_header) {
      table.header = fields;
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw ModelError(ErrorKind::parse_error, source + ":" + std::to_string(lineno),
                       "malformed row: " + std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(table.header.size()));
    table.rows.push_back(fields);
    table.lines.push_back(lineno);
  }
  if (!have_header) throw ModelError(ErrorKind::parse_error, source, "empty file (no header row)");
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(ErrorKind::io_error, path, "cannot open for reading");
  return parse_csv(in, path);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) os << ',';
    os << csv_escape(fields[k]);
  }
  os << '\n';
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace lcnl
