#include "benchdelta/inference.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "benchdelta/errors.hpp"

namespace benchdelta::inference {

SummaryRow accuracy_summary(const Dataset& cell) {
  SummaryRow row;
  std::size_t base_ok = 0;
  std::size_t var_ok = 0;
  for (std::size_t i = 0; i < cell.records.size(); ++i) {
    const auto& r = cell.records[i];
    if (!r.correct) {
      throw DataError(fmt::format("record {} (model {}, template {}) is not graded", i, r.model, r.template_id));
    }
    if (row.n_base + row.n_variants == 0) row.run = run_key(r);
    if (r.is_variant) {
      ++row.n_variants;
      var_ok += *r.correct ? 1 : 0;
    } else {
      ++row.n_base;
      base_ok += *r.correct ? 1 : 0;
    }
  }
  if (row.n_base == 0) throw UsageError("accuracy summary: the base subset is empty");
  if (row.n_variants == 0) throw UsageError("accuracy summary: the variant subset is empty");
  row.acc_base = 100.0 * static_cast<double>(base_ok) / static_cast<double>(row.n_base);
  row.acc_variants = 100.0 * static_cast<double>(var_ok) / static_cast<double>(row.n_variants);
  row.delta_var = row.acc_variants - row.acc_base;
  return row;
}

HolmResult holm_bonferroni(std::span<const double> raw_p, double alpha) {
  for (double p : raw_p) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(fmt::format("p-value {} is outside [0, 1]", p));
  }
  HolmResult out;
  out.raw_p.assign(raw_p.begin(), raw_p.end());
  out.family_size = raw_p.size();
  out.alpha = alpha;
  out.corrected_p.resize(raw_p.size());

  std::vector<std::size_t> order(raw_p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw_p[a] < raw_p[b]; });
  const double m = static_cast<double>(raw_p.size());
  double running = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double scaled = std::min(1.0, (m - static_cast<double>(k)) * raw_p[order[k]]);
    running = std::max(running, scaled);
    out.corrected_p[order[k]] = running;
  }
  return out;
}

FamilyCorrection correct_family(std::span<const FamilyEntry> entries, double p_floor, double alpha) {
  auto effective = [&](const FamilyEntry& e) { return (e.below_floor || e.raw_p < p_floor) ? p_floor / 2.0 : e.raw_p; };

  FamilyCorrection out;
  std::vector<double> all;
  std::vector<double> healthy;
  std::vector<std::size_t> healthy_index;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double p = effective(entries[i]);
    all.push_back(p);
    if (!entries[i].degenerate) {
      healthy.push_back(p);
      healthy_index.push_back(i);
    }
  }
  out.corrected_all = holm_bonferroni(all, alpha).corrected_p;
  out.family_size_all = all.size();
  out.corrected.assign(entries.size(), std::nullopt);
  const auto h = holm_bonferroni(healthy, alpha);
  for (std::size_t k = 0; k < healthy_index.size(); ++k) out.corrected[healthy_index[k]] = h.corrected_p[k];
  out.family_size = healthy.size();
  return out;
}

double kolmogorov_survival(double lambda) noexcept {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double kTerm = 1e-12;
  double p;
  if (lambda < 1.18) {
    // Jacobi-transformed series, accurate where the alternating one converges slowly.
    constexpr double pi = 3.14159265358979323846;
    const double f = -pi * pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double t = std::exp(f * (2.0 * k - 1.0) * (2.0 * k - 1.0));
      sum += t;
      if (t < kTerm) break;
    }
    p = 1.0 - std::sqrt(2.0 * pi) / lambda * sum;
  } else {
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double t = std::exp(-2.0 * k * k * lambda * lambda);
      sum += (k % 2 == 1) ? t : -t;
      if (t < kTerm) break;
    }
    p = 2.0 * sum;
  }
  return std::clamp(p, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw UsageError("Kolmogorov-Smirnov test needs two nonempty samples");
  auto nan = [](double x) { return std::isnan(x); };
  if (std::any_of(a.begin(), a.end(), nan) || std::any_of(b.begin(), b.end(), nan)) {
    throw UsageError("Kolmogorov-Smirnov samples must not contain NaN");
  }
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const auto n1 = static_cast<long double>(sa.size());
  const auto n2 = static_cast<long double>(sb.size());

  // |F_a - F_b| = |i n2 - j n1| / (n1 n2); track the integer numerator.
  std::size_t i = 0, j = 0;
  long double best = 0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    best = std::max(best, std::abs(static_cast<long double>(i) * n2 - static_cast<long double>(j) * n1));
  }
  KsResult r;
  r.n1 = sa.size();
  r.n2 = sb.size();
  r.d_statistic = static_cast<double>(best / (n1 * n2));
  const double ne = static_cast<double>(n1 * n2 / (n1 + n2));
  const double root = std::sqrt(ne);
  r.p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * r.d_statistic);
  return r;
}

bool significance_flag(double p, double alpha) noexcept { return p < alpha; }

}  // namespace benchdelta::inference
