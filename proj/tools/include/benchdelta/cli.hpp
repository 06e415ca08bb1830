#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "benchdelta/evalstore.hpp"
#include "benchdelta/glmm.hpp"
#include "benchdelta/grader.hpp"
#include "benchdelta/inference.hpp"
#include "benchdelta/synthlab.hpp"

namespace benchdelta::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitPartial = 3,
};

struct AnalysisConfig {
  std::vector<fs::path> inputs;
  std::optional<FileFormat> format;            // inferred from the extension when unset
  std::optional<PromptFormat> prompt_format;   // restricts the analysis to one format
  double alpha = 0.05;
  double p_floor = 0.001;
  fs::path out_dir = ".";
  glmm::FitOptions fit;
  int jobs = 1;
  std::uint64_t seed = 0;

  GradeOptions grading;

  bool with_gamma = false;         // fit: also fit GLMM 2
  bool check_optimizers = false;   // fit: refit each cell with every optimizer
  fs::path fits_dir;               // report: where cell fit artifacts live
  std::vector<fs::path> gsm_symbolic;  // ks: GSM-Symbolic JSONL files

  synthlab::SimParams sim;
  int replicates = 200;

  /// Throws UsageError unless alpha is in (0, 1), p_floor in (0, alpha),
  /// jobs >= 0 and the fit tolerances are positive.
  void validate() const;
};

/// Records from every input, concatenated in argument order. Throws
/// UsageError when no input is given.
Dataset load_inputs(const AnalysisConfig& config);

/// Records of the configured prompt format only (all when unset).
Dataset filter_format(const Dataset& data, const std::optional<PromptFormat>& format);

/// File-name stem of a cell artifact, e.g. "gemma-2b__gsm".
std::string cell_stem(const RunKey& key);

/// Display rounding used by every table.
std::string fmt_fixed(double v, int digits);
std::string fmt_p(double p, double p_floor);

// Every command writes into config.out_dir, prints a short summary to `log`
// and returns an ExitCode. Errors that abort the whole command are thrown.

/// graded.jsonl and grade_counts.csv (model, prompt_format, failure_class, count).
int cmd_grade(const AnalysisConfig& config, ExecutionAdapter* adapter, std::ostream& log);
/// gamma.csv with per-record integers, gamma and per-cell centered gamma.
int cmd_gamma(const AnalysisConfig& config, std::ostream& log);
/// fits/<cell>.json per cell, summary.csv, summary.md, holm.csv. Returns
/// kExitPartial when any cell failed.
int cmd_fit(const AnalysisConfig& config, std::ostream& log);
/// ks.json and ks_distribution.csv.
int cmd_ks(const AnalysisConfig& config, std::ostream& log);
/// simulated.jsonl and simulated_gamma.csv from config.sim.
int cmd_simulate(const AnalysisConfig& config, std::ostream& log);
/// calibration.csv and calibration_summary.csv.
int cmd_calibrate(const AnalysisConfig& config, std::ostream& log);
/// report.md, report.csv and forest.csv from fit artifacts.
int cmd_report(const AnalysisConfig& config, std::ostream& log);

/// Parses argv and dispatches; maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace benchdelta::cli
