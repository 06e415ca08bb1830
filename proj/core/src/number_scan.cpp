#include "number_scan.hpp"

namespace benchdelta::detail {
namespace {

bool is_ascii_alnum(char c) noexcept {
  return is_ascii_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

// A '-' counts as a sign only when it does not join two operands ("3-4").
bool sign_allowed_before(std::string_view text, std::size_t minus_pos) {
  return minus_pos == 0 || !is_ascii_alnum(text[minus_pos - 1]);
}

}  // namespace

std::vector<NumberToken> scan_numbers(std::string_view text) {
  std::vector<NumberToken> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!is_ascii_digit(text[i])) {
      ++i;
      continue;
    }
    NumberToken tok;
    tok.digits_begin = i;
    tok.begin = i;

    // Look back for "$", "-", "-$", "$-".
    std::size_t b = i;
    if (b > 0 && text[b - 1] == '$') {
      tok.currency = true;
      --b;
      if (b > 0 && text[b - 1] == '-' && sign_allowed_before(text, b - 1)) {
        tok.negative = true;
        --b;
      }
    } else if (b > 0 && text[b - 1] == '-') {
      if (b >= 2 && text[b - 2] == '$') {
        tok.currency = true;
        tok.negative = true;
        b -= 2;
      } else if (sign_allowed_before(text, b - 1)) {
        tok.negative = true;
        --b;
      }
    }
    tok.begin = b;

    std::size_t j = i;
    while (j < n && is_ascii_digit(text[j])) ++j;
    tok.integer_digits.assign(text.substr(i, j - i));

    if (tok.integer_digits.size() <= 3) {
      for (;;) {
        if (j + 4 <= n && text[j] == ',' && is_ascii_digit(text[j + 1]) && is_ascii_digit(text[j + 2]) &&
            is_ascii_digit(text[j + 3]) && (j + 4 == n || !is_ascii_digit(text[j + 4]))) {
          tok.integer_digits.append(text.substr(j + 1, 3));
          j += 4;
        } else {
          break;
        }
      }
    }

    if (j + 1 < n && text[j] == '.' && is_ascii_digit(text[j + 1])) {
      std::size_t k = j + 1;
      while (k < n && is_ascii_digit(text[k])) ++k;
      tok.fraction_digits.assign(text.substr(j + 1, k - j - 1));
      j = k;
    }
    tok.end = j;
    tokens.push_back(std::move(tok));
    i = j;
  }
  return tokens;
}

}  // namespace benchdelta::detail
