#include "benchdelta/numload.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "benchdelta/errors.hpp"
#include "number_scan.hpp"

namespace benchdelta {
namespace {

struct IntegerToken {
  std::string digits;  // leading zeros stripped; "0" for zero
};

std::vector<IntegerToken> integer_tokens(std::string_view text) {
  std::vector<IntegerToken> out;
  for (auto& tok : detail::scan_numbers(text)) {
    if (tok.has_fraction()) continue;
    const std::size_t before = tok.digits_begin;
    if (before > 0 && (text[before - 1] == '.' || text[before - 1] == '/')) continue;
    if (tok.end < text.size() && text[tok.end] == '/') continue;
    std::size_t nz = tok.integer_digits.find_first_not_of('0');
    out.push_back({nz == std::string::npos ? std::string("0") : tok.integer_digits.substr(nz)});
  }
  return out;
}

std::uint64_t to_u64(const std::string& digits) {
  if (digits.size() > 20) return std::numeric_limits<std::uint64_t>::max();
  std::uint64_t value = 0;
  for (char c : digits) {
    const auto d = static_cast<std::uint64_t>(c - '0');
    if (value > (std::numeric_limits<std::uint64_t>::max() - d) / 10) return std::numeric_limits<std::uint64_t>::max();
    value = value * 10 + d;
  }
  return value;
}

double log10_of_digits(const std::string& digits) {
  if (digits.size() <= 15) return std::log10(static_cast<double>(to_u64(digits)));
  const double mantissa = static_cast<double>(to_u64(digits.substr(0, 15))) / 1e14;
  return static_cast<double>(digits.size() - 1) + std::log10(mantissa);
}

}  // namespace

std::vector<std::uint64_t> extract_integers(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& tok : integer_tokens(text)) out.push_back(to_u64(tok.digits));
  return out;
}

double gamma_of(std::string_view text) {
  double gamma = 0.0;
  for (const auto& tok : integer_tokens(text)) {
    if (tok.digits == "0" || tok.digits == "1") continue;  // log10(max(n, 1)) == 0
    gamma += log10_of_digits(tok.digits);
  }
  return gamma;
}

NumericLoad numeric_load(std::string_view text) {
  NumericLoad load;
  load.integers = extract_integers(text);
  load.gamma = gamma_of(text);
  return load;
}

std::vector<double> center_gammas(std::span<const double> values) {
  if (values.empty()) throw UsageError("center_gammas: empty list");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out) v -= mean;
  return out;
}

void center_loads(std::span<NumericLoad> loads) {
  std::vector<double> raw;
  raw.reserve(loads.size());
  for (const auto& l : loads) raw.push_back(l.gamma);
  const auto centered = center_gammas(raw);
  for (std::size_t i = 0; i < loads.size(); ++i) loads[i].gamma_centered = centered[i];
}

}  // namespace benchdelta
