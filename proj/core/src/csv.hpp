#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fedflex::csv {

enum class ReadStatus { Record, Malformed, End };

/// Reads one RFC 4180 record (quoted fields, doubled quotes, embedded
/// newlines, CRLF). A UTF-8 BOM at the start of the stream is skipped.
/// An unterminated quote yields Malformed and consumes the rest of the input.
ReadStatus read_record(std::istream& in, std::vector<std::string>& fields);

std::string quote(std::string_view field);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace fedflex::csv
