#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace benchdelta {

/// Numerically expressed integers of one question and their digit load.
struct NumericLoad {
  std::vector<std::uint64_t> integers;  // text order; saturates at UINT64_MAX for >19-digit runs
  double gamma = 0.0;                   // sum of log10(max(n, 1)) over `integers`
  double gamma_centered = 0.0;          // only meaningful after center_loads() over a pooled cell
};

/// Integers written with digits, in text order. Decimals ("0.75"), slash
/// fractions ("3/4") and number words ("three", "twice") are skipped;
/// comma-grouped numerals ("1,200") count as one integer; signs are dropped.
std::vector<std::uint64_t> extract_integers(std::string_view text);

/// Large-number load: sum of log10(max(n, 1)) over extract_integers(text).
/// Computed from the digit strings, so it stays exact in the usual cases even
/// for numerals too long for 64 bits.
double gamma_of(std::string_view text);

NumericLoad numeric_load(std::string_view text);

/// Subtracts the arithmetic mean. Throws UsageError on an empty list.
std::vector<double> center_gammas(std::span<const double> values);

/// Fills gamma_centered over the pooled collection.
void center_loads(std::span<NumericLoad> loads);

}  // namespace benchdelta
