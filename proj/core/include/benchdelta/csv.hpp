#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace benchdelta::csv {

struct Row {
  std::vector<std::string> fields;
  std::vector<bool> quoted;  // distinguishes "" (empty text) from an empty cell (null)
  std::size_t line = 0;  // 1-based line where the row starts
};

/// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
/// newlines. Accepts LF or CRLF line endings.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next row, or nullopt at end of input. Throws DataError on an
  /// unterminated quoted field.
  std::optional<Row> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

/// Quotes when needed; the empty string is always written as "".
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);
/// nullopt fields are written as empty unquoted cells.
void write_row(std::ostream& out, const std::vector<std::optional<std::string>>& fields);

}  // namespace benchdelta::csv
