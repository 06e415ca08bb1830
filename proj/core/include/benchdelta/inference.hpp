#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "benchdelta/evalstore.hpp"

namespace benchdelta::inference {

struct SummaryRow {
  RunKey run;
  double acc_base = 0.0;      // percent
  double acc_variants = 0.0;  // percent
  double delta_var = 0.0;     // acc_variants - acc_base, percentage points
  std::size_t n_base = 0;
  std::size_t n_variants = 0;
};

/// Accuracy per subset of one cell. Negative delta means variants are
/// answered less accurately. Throws UsageError naming an empty subset and
/// DataError for an ungraded record.
SummaryRow accuracy_summary(const Dataset& cell);

struct HolmResult {
  std::vector<double> raw_p;
  std::vector<double> corrected_p;  // same order as raw_p
  std::size_t family_size = 0;
  double alpha = 0.05;
};

/// Step-down Holm adjustment. Throws UsageError for p outside [0, 1].
HolmResult holm_bonferroni(std::span<const double> raw_p, double alpha = 0.05);

/// One family member: its raw p, whether it was reported as "< δ", and
/// whether its fit was degenerate.
struct FamilyEntry {
  double raw_p = 1.0;
  bool below_floor = false;
  bool degenerate = false;
};

struct FamilyCorrection {
  /// Default family: degenerate entries excluded (nullopt for them).
  std::vector<std::optional<double>> corrected;
  /// Alternative family including every entry.
  std::vector<double> corrected_all;
  std::size_t family_size = 0;
  std::size_t family_size_all = 0;
};

/// Holm over one column-wise family. Entries flagged below_floor, or with raw
/// p below p_floor, enter as p_floor / 2.
FamilyCorrection correct_family(std::span<const FamilyEntry> entries, double p_floor = 0.001, double alpha = 0.05);

struct KsResult {
  double d_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Two-sample Kolmogorov-Smirnov test with asymptotic p. Throws UsageError
/// when either sample is empty or contains NaN.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// P(K > lambda) for the Kolmogorov distribution, clamped to [0, 1].
double kolmogorov_survival(double lambda) noexcept;

/// True iff p < alpha.
bool significance_flag(double p, double alpha = 0.05) noexcept;

}  // namespace benchdelta::inference
