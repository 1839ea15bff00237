#pragma once

// Minimal RFC-4180-style CSV reading: header required, quoted fields with
// embedded commas/quotes/newlines supported, CRLF tolerated.

#include <cstdlib>
#include <istream>
#include <string>
#include <vector>

#include "scsar/errors.hpp"

namespace scsar {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_cols() const { return static_cast<int>(header.size()); }

  // Column index by header name; -1 when absent.
  int find(const std::string& name) const {
    for (int c = 0; c < n_cols(); ++c)
      if (header[c] == name) return c;
    return -1;
  }

  int require(const std::string& name) const {
    const int c = find(name);
    if (c < 0) throw MissingColumn(name);
    return c;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool any_char = false;
  char ch;

  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
  };
  auto end_record = [&]() {
    end_field();
    if (table.header.empty()) {
      table.header = record;
      if (table.header.empty()) throw IoFailure("CSV: empty header");
    } else {
      if (record.size() != table.header.size())
        throw IoFailure("CSV: row " + std::to_string(table.rows.size() + 1) + " has " +
                        std::to_string(record.size()) + " fields, header has " +
                        std::to_string(table.header.size()));
      table.rows.push_back(record);
    }
    record.clear();
    any_char = false;
  };

  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      any_char = true;
      continue;
    }
    switch (ch) {
      case '"': in_quotes = true; any_char = true; break;
      case ',': end_field(); any_char = true; break;
      case '\r': break;
      case '\n':
        if (any_char || !record.empty() || !field.empty()) end_record();
        break;
      default: field += ch; any_char = true; break;
    }
  }
  if (in_quotes) throw IoFailure("CSV: unterminated quoted field");
  if (any_char || !record.empty() || !field.empty()) end_record();
  if (table.header.empty()) throw IoFailure("CSV: no header row");
  return table;
}

// Strict numeric cell parse; errors carry 1-based row and the column name.
inline double parse_numeric_cell(const CsvTable& table, int row, int col) {
  const std::string& s = table.rows[row][col];
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (s.empty() || end == begin || (end && *end != '\0'))
    throw NonNumericCell("row " + std::to_string(row + 1) + ", column '" +
                         table.header[col] + "': '" + s + "'");
  return v;
}

}  // namespace scsar
