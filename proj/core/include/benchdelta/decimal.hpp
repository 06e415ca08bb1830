#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace benchdelta {

/// An exact decimal number kept in canonical text form.
///
/// Canonical form has no grouping commas, no currency symbol, no leading
/// zeros in the integer part, no trailing zeros in the fractional part, no
/// trailing '.', and no "-0". Two decimals are numerically equal iff their
/// canonical strings are equal, which is how answers are compared.
class ExactDecimal {
 public:
  /// Accepts an optional sign, an optional leading '$', comma-grouped or
  /// plain digits, an optional fractional part, an optional trailing '.', and
  /// an optional exponent ("1e+20", as produced by Python's repr).
  static std::optional<ExactDecimal> parse(std::string_view text);

  const std::string& str() const noexcept { return text_; }
  double to_double() const;
  bool is_integer() const noexcept;

  friend bool operator==(const ExactDecimal&, const ExactDecimal&) = default;

 private:
  explicit ExactDecimal(std::string canonical) : text_(std::move(canonical)) {}
  std::string text_;
};

}  // namespace benchdelta
