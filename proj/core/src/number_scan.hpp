#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace benchdelta::detail {

/// A numeric token found in free text.
///
/// Grammar: [sign][$][sign] digits [ ",ddd" ... ] [ "." digits ]. Comma
/// groups are only recognised after a run of 1-3 leading digits and only when
/// exactly three digits follow each comma. A '.' not followed by a digit is
/// not part of the token (sentence punctuation).
struct NumberToken {
  std::size_t begin = 0;  // offset of the first character (sign or '$' included)
  std::size_t end = 0;    // one past the last digit
  std::size_t digits_begin = 0;
  bool negative = false;
  bool currency = false;
  std::string integer_digits;  // commas removed
  std::string fraction_digits;

  bool has_fraction() const noexcept { return !fraction_digits.empty(); }
};

/// Scans bytes only; never consults the locale.
std::vector<NumberToken> scan_numbers(std::string_view text);

inline bool is_ascii_digit(char c) noexcept { return c >= '0' && c <= '9'; }

}  // namespace benchdelta::detail
