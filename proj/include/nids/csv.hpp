#pragma once

#include <istream>
#include <string>
#include <vector>

#include "nids/error.hpp"

namespace nids::csv {

// Reads one RFC-4180 record (quoted fields may contain commas, doubled quotes
// and line breaks). Returns false at end of input.
inline bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      break;
    } else if (c == '\n') {
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

inline std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace nids::csv
