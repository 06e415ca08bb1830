#include <fmt/format.h>

#include <ostream>

#include "CLI11.hpp"
#include "benchdelta/cli.hpp"
#include "benchdelta/errors.hpp"
#include "benchdelta/exec_adapter.hpp"

namespace benchdelta::cli {
namespace {

template <class Enum>
std::map<std::string, Enum> enum_map(std::initializer_list<Enum> values) {
  std::map<std::string, Enum> m;
  for (auto v : values) m.emplace(std::string(to_string(v)), v);
  return m;
}

void add_sim_options(CLI::App* cmd, AnalysisConfig& c, std::vector<double>& lognormal) {
  cmd->add_option("--templates", c.sim.n_templates, "Number of templates")->capture_default_str();
  cmd->add_option("--variants", c.sim.n_variants_per_template, "Variants per template")->capture_default_str();
  cmd->add_option("--beta0", c.sim.beta_intercept, "Intercept (log-odds)")->capture_default_str();
  cmd->add_option("--beta-variant", c.sim.beta_variant, "Variant effect (log-odds)")->capture_default_str();
  cmd->add_option("--beta-gamma", c.sim.beta_gamma, "Effect per unit of centered gamma")->capture_default_str();
  cmd->add_option("--sigma", c.sim.sigma_id, "Random-intercept SD")->capture_default_str();
  cmd->add_option("--gamma-lognormal", lognormal, "Draw gamma as exp(N(MU, SD))")->expected(2);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Statistical re-analysis of template-variant benchmark results", "benchdelta"};
  app.require_subcommand(1);
  app.fallthrough();

  AnalysisConfig c;
  std::vector<std::string> inputs;
  std::string out_dir = ".";
  std::optional<FileFormat> format;
  std::optional<PromptFormat> prompt_format;
  app.add_option("-i,--input", inputs, "Input record files (JSONL or CSV)");
  app.add_option("--format", format, "Input format")
      ->transform(CLI::CheckedTransformer(enum_map({FileFormat::jsonl, FileFormat::csv}), CLI::ignore_case));
  app.add_option("--prompt-format", prompt_format, "Only analyse this prompt format")
      ->transform(CLI::CheckedTransformer(enum_map({PromptFormat::gsm, PromptFormat::simple_nl,
                                                    PromptFormat::structured_nl, PromptFormat::simple_code,
                                                    PromptFormat::structured_code}),
                                          CLI::ignore_case));
  app.add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--alpha", c.alpha, "Significance level")->capture_default_str();
  app.add_option("--p-floor", c.p_floor, "p-values below this are shown as '< p-floor'")->capture_default_str();
  app.add_option("-j,--jobs", c.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for simulation and optimizer restarts")->capture_default_str();

  auto* grade = app.add_subcommand("grade", "Grade responses and count failure classes");
  long long timeout_ms = 5000;
  grade->add_option("--timeout-ms", timeout_ms, "Per-function execution timeout")->capture_default_str();

  auto* gamma = app.add_subcommand("gamma", "Compute large-number loads per question");

  auto* fit = app.add_subcommand("fit", "Fit GLMM 1 (and optionally GLMM 2) per cell");
  std::optional<glmm::OuterOptimizer> optimizer;
  fit->add_flag("--gamma", c.with_gamma, "Also fit GLMM 2 with the centered large-number load");
  fit->add_flag("--check-optimizers", c.check_optimizers, "Refit every cell with each optimizer");
  fit->add_option("--optimizer", optimizer, "Outer optimizer")
      ->transform(CLI::CheckedTransformer(
          enum_map({glmm::OuterOptimizer::nelder_mead, glmm::OuterOptimizer::coordinate_bounded})));
  fit->add_option("--theta-max", c.fit.theta_max, "Upper bound of the random-intercept SD")->capture_default_str();

  auto* ks = app.add_subcommand("ks", "Kolmogorov-Smirnov test on integers in base vs variant questions");
  std::vector<std::string> gsm;
  ks->add_option("--gsm-symbolic", gsm, "GSM-Symbolic JSONL files (question/original_question fields)");

  std::vector<double> lognormal;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic graded dataset");
  add_sim_options(simulate, c, lognormal);

  auto* calibrate = app.add_subcommand("calibrate", "Parameter recovery and calibration experiment");
  add_sim_options(calibrate, c, lognormal);
  calibrate->add_option("--replicates", c.replicates, "Number of replicates")->capture_default_str();

  auto* report = app.add_subcommand("report", "Markdown report and forest-plot CSV from fit artifacts");
  std::string fits_dir;
  report->add_option("--fits", fits_dir, "Directory of cell fit artifacts (default OUT/fits)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (const auto& s : inputs) c.inputs.emplace_back(s);
  for (const auto& s : gsm) c.gsm_symbolic.emplace_back(s);
  c.out_dir = out_dir;
  c.format = format;
  c.prompt_format = prompt_format;
  c.fits_dir = fits_dir;
  c.fit.seed = c.seed;
  if (optimizer) c.fit.optimizer = *optimizer;
  if (!lognormal.empty()) {
    c.sim.gamma_sampler = {synthlab::GammaSampler::Kind::lognormal, lognormal[0], lognormal[1]};
  }

  try {
    if (grade->parsed()) {
      if (timeout_ms <= 0) throw UsageError("--timeout-ms must be positive");
      c.grading.timeout = std::chrono::milliseconds{timeout_ms};
      auto adapter = adapter_from_environment();
      return cmd_grade(c, adapter.get(), out);
    }
    if (gamma->parsed()) return cmd_gamma(c, out);
    if (fit->parsed()) return cmd_fit(c, out);
    if (ks->parsed()) return cmd_ks(c, out);
    if (simulate->parsed()) return cmd_simulate(c, out);
    if (calibrate->parsed()) return cmd_calibrate(c, out);
    if (report->parsed()) return cmd_report(c, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EnvironmentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace benchdelta::cli
