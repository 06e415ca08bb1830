#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "benchdelta/evalstore.hpp"
#include "benchdelta/glmm.hpp"

namespace benchdelta::synthlab {

struct GammaSampler {
  enum class Kind { none, lognormal };
  Kind kind = Kind::none;
  double mu = 1.0;  // parameters of log(gamma)
  double sd = 0.5;
};

struct SimParams {
  int n_templates = 100;
  int n_variants_per_template = 50;
  double beta_intercept = -1.0;
  double beta_variant = -0.7;
  double beta_gamma = 0.0;
  double sigma_id = 1.0;
  GammaSampler gamma_sampler;
  std::uint64_t seed = 0;
};

/// Throws UsageError for n_templates < 2, negative counts or sigma_id < 0,
/// and for beta_gamma != 0 without a gamma sampler.
void validate(const SimParams& p);

struct SimulatedDataset {
  Dataset dataset;
  std::vector<double> gamma_centered;  // per record; zeros when no sampler
};

/// One base record followed by its variants, template by template. u_t ~
/// N(0, sigma_id^2) per template and correct ~ Bernoulli(logit^-1(b0 +
/// bv*variant + bg*gamma_c + u_t)). Records use model "synthetic"; question
/// texts carry no digits. Identical params give identical output.
SimulatedDataset simulate_dataset(const SimParams& p);

struct ReplicateRow {
  int replicate = 0;
  double estimate = 0.0;
  double se = 0.0;
  double p = 1.0;
  bool covered = false;
  bool degenerate = false;
  bool converged = true;
};

struct CalibrationBlock {
  std::string model;        // "glmm1" or "glmm2"
  std::string coefficient;  // "variant" or "gamma_c"
  double truth = 0.0;
  std::vector<ReplicateRow> rows;
  double bias = 0.0;            // mean(estimate - truth) over usable replicates
  double rmse = 0.0;
  double coverage = 0.0;        // share of usable replicates whose 95% CI covers truth
  double rejection_rate = 0.0;  // share of usable replicates with p < alpha
  int degenerate_count = 0;
  int failed_count = 0;
  int usable = 0;
};

struct CalibrationReport {
  SimParams params;
  int replicates = 0;
  double alpha = 0.05;
  std::vector<CalibrationBlock> blocks;
  std::vector<double> naive_p;      // pooled two-proportion z-test per replicate
  double naive_rejection_rate = 0.0;
  std::vector<std::string> notes;

  const CalibrationBlock* find(std::string_view model, std::string_view coefficient) const noexcept;
};

struct ExperimentOptions {
  double alpha = 0.05;
  int jobs = 1;  // worker threads; <= 0 means hardware concurrency
  glmm::FitOptions fit;
};

/// Simulates `replicates` datasets (replicate r uses a seed derived from
/// p.seed and r), fits GLMM 1 (and GLMM 2 when beta_gamma != 0) and
/// aggregates. Results do not depend on `jobs`.
CalibrationReport recovery_experiment(const SimParams& p, int replicates, const ExperimentOptions& opts = {});

/// Seed of replicate r.
std::uint64_t replicate_seed(std::uint64_t base, int replicate) noexcept;

/// Pooled two-proportion z-test of base vs variant accuracy, treating every
/// record as independent.
double naive_two_proportion_p(const Dataset& cell);

/// CSV with header model,coefficient,replicate,estimate,se,p,covered,degenerate.
void write_calibration_csv(std::ostream& out, const CalibrationReport& report);

}  // namespace benchdelta::synthlab
