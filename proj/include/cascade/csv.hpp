#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cascade::csv {

/// One parsed record plus the 1-based line on which it started.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// RFC 4180 parser: quoted fields may contain commas, doubled quotes and
/// line breaks. Accepts LF or CRLF line endings. Throws InputError on an
/// unterminated quote or stray quote inside an unquoted field.
std::vector<Record> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

}  // namespace cascade::csv
