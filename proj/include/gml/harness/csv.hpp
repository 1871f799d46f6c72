#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gml/error.hpp"

namespace gml::harness {

/// One CSV record with its 1-based line number.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Comma-separated records; double-quoted fields may contain commas and "" escapes.
inline std::vector<CsvRow> parse_csv(std::string_view text, const std::string& name = "<csv>") {
  std::vector<CsvRow> rows;
  std::size_t line = 1, pos = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos < text.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool quoted = false, any = false;
    for (;;) {
      if (pos >= text.size()) {
        require(!quoted, Errc::parse_error, name + ":" + std::to_string(row.line) + ": unterminated quote");
        break;
      }
      const char c = text[pos++];
      if (quoted) {
        if (c == '"') {
          if (pos < text.size() && text[pos] == '"') {
            field.push_back('"');
            ++pos;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"' && field.empty()) {
        quoted = any = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        any = true;
      } else if (c == '\n') {
        ++line;
        break;
      } else if (c != '\r') {
        field.push_back(c);
        any = true;
      }
    }
    if (!any && field.empty()) continue;  // blank line
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && end == s.data() + s.size(), Errc::parse_error,
          where + ": '" + std::string(s) + "' is not a number");
  return v;
}

/// Validates the header row and returns the remaining rows.
inline std::vector<CsvRow> expect_header(std::vector<CsvRow> rows, const std::vector<std::string>& header,
                                         const std::string& name) {
  require(!rows.empty(), Errc::parse_error, name + ": empty file");
  require(rows[0].fields == header, Errc::parse_error, name + ":1: unexpected header");
  rows.erase(rows.begin());
  for (const auto& r : rows)
    require(r.fields.size() == header.size(), Errc::parse_error,
            name + ":" + std::to_string(r.line) + ": expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(r.fields.size()));
  return rows;
}

}  // namespace gml::harness
