#include "csv.hpp"

#include <algorithm>
#include <cctype>
#include <istream>

namespace fedflex::csv {

ReadStatus read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.tellg() == std::streampos(0)) {
    if (in.peek() == 0xEF) {
      char bom[3];
      in.read(bom, 3);
      if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
        in.seekg(0);
      }
    }
  }
  int c = in.get();
  if (c == std::char_traits<char>::eof()) return ReadStatus::End;

  std::string field;
  bool quoted = false;
  bool after_quote = false;
  bool garbage = false;
  for (;; c = in.get()) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted) return ReadStatus::Malformed;
      break;
    }
    char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (ch == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else {
      if (after_quote) garbage = true;
      field.push_back(ch);
    }
  }
  fields.push_back(std::move(field));
  return garbage ? ReadStatus::Malformed : ReadStatus::Record;
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace fedflex::csv
