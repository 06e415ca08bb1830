#include "benchdelta/decimal.hpp"

#include <charconv>
#include <cstdlib>
#include <string>

namespace benchdelta {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

constexpr long kMaxExponent = 1000;

}  // namespace

std::optional<ExactDecimal> ExactDecimal::parse(std::string_view text) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);

  std::size_t i = 0;
  bool negative = false;
  bool seen_sign = false;
  bool seen_currency = false;
  // Sign and currency may come in either order: "-$5", "$-5".
  for (int k = 0; k < 2 && i < text.size(); ++k) {
    if (!seen_sign && (text[i] == '-' || text[i] == '+')) {
      negative = text[i] == '-';
      seen_sign = true;
      ++i;
    } else if (!seen_currency && text[i] == '$') {
      seen_currency = true;
      ++i;
    }
  }

  std::string int_digits;
  while (i < text.size()) {
    if (is_digit(text[i])) {
      int_digits.push_back(text[i]);
      ++i;
    } else if (text[i] == ',' && !int_digits.empty() && i + 1 < text.size() && is_digit(text[i + 1])) {
      ++i;
    } else {
      break;
    }
  }

  std::string frac_digits;
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && is_digit(text[i])) frac_digits.push_back(text[i++]);
  }
  if (int_digits.empty() && frac_digits.empty()) return std::nullopt;

  long exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) exp_negative = text[i++] == '-';
    std::string exp_digits;
    while (i < text.size() && is_digit(text[i])) exp_digits.push_back(text[i++]);
    if (exp_digits.empty() || exp_digits.size() > 6) return std::nullopt;
    exponent = std::strtol(exp_digits.c_str(), nullptr, 10);
    if (exponent > kMaxExponent) return std::nullopt;
    if (exp_negative) exponent = -exponent;
  }
  if (i != text.size()) return std::nullopt;

  // Shift the decimal point by the exponent over the combined digit string.
  std::string digits = int_digits + frac_digits;
  long point = static_cast<long>(int_digits.size()) + exponent;
  if (point < 0) {
    digits.insert(0, static_cast<std::size_t>(-point), '0');
    point = 0;
  } else if (point > static_cast<long>(digits.size())) {
    digits.append(static_cast<std::size_t>(point) - digits.size(), '0');
  }
  std::string whole = digits.substr(0, static_cast<std::size_t>(point));
  std::string frac = digits.substr(static_cast<std::size_t>(point));

  std::size_t nz = whole.find_first_not_of('0');
  whole = nz == std::string::npos ? "0" : whole.substr(nz);
  std::size_t last = frac.find_last_not_of('0');
  frac = last == std::string::npos ? std::string{} : frac.substr(0, last + 1);

  std::string canonical;
  const bool zero = whole == "0" && frac.empty();
  if (negative && !zero) canonical.push_back('-');
  canonical += whole;
  if (!frac.empty()) {
    canonical.push_back('.');
    canonical += frac;
  }
  return ExactDecimal{std::move(canonical)};
}

double ExactDecimal::to_double() const {
  double value = 0.0;
  std::from_chars(text_.data(), text_.data() + text_.size(), value);
  return value;
}

bool ExactDecimal::is_integer() const noexcept { return text_.find('.') == std::string::npos; }

}  // namespace benchdelta
