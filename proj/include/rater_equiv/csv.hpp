#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rater_equiv/error.hpp"

namespace rater_equiv::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::optional<Row> next() {
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool any = false;
    row.line = line_ + 1;
    char c;
    while (in_.get(c)) {
      any = true;
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get(c);
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"' && !field_started) {
        in_quotes = true;
        field_started = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
      } else if (c == '\r') {
        // tolerate CRLF
      } else if (c == '\n') {
        ++line_;
        row.fields.push_back(std::move(field));
        return row;
      } else {
        field.push_back(c);
        field_started = true;
      }
    }
    if (in_quotes) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(row.line) + ": unterminated quoted field");
    }
    if (!any) return std::nullopt;
    ++line_;
    row.fields.push_back(std::move(field));
    return row;
  }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

// Reads the header row and checks it matches `expected` exactly.
inline void expect_header(Reader& reader, const std::vector<std::string>& expected) {
  auto header = reader.next();
  if (header && !header->fields.empty() && header->fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    header->fields[0].erase(0, 3);
  }
  if (!header || header->fields != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) want += (i ? "," : "") + expected[i];
    throw Error(ErrorCode::kParse, "line 1: expected header '" + want + "'");
  }
}

inline bool is_blank(const Row& row) {
  return row.fields.size() == 1 && row.fields[0].empty();
}

}  // namespace rater_equiv::csv
