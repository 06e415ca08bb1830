#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include "benchdelta/cli.hpp"
#include "benchdelta/csv.hpp"
#include "benchdelta/errors.hpp"
#include "benchdelta/exec_adapter.hpp"
#include "benchdelta/numload.hpp"
#include "internal.hpp"
#include <nlohmann/json.hpp>

namespace benchdelta::cli {
namespace {

using detail::full;
using detail::open_output;

std::string record_label(std::size_t index, const EvalRecord& r) {
  return fmt::format("record {} (model {}, format {}, template {}, {})", index, r.model, to_string(r.prompt_format),
                     r.template_id, r.is_variant ? "variant" : "base");
}

std::string join_integers(const std::vector<std::uint64_t>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s.push_back(' ');
    s += std::to_string(values[i]);
  }
  return s;
}

struct TextSets {
  std::vector<std::string> base;
  std::vector<std::string> variants;
};

TextSets texts_from_records(const Dataset& data) {
  TextSets sets;
  std::set<std::tuple<bool, std::int64_t, std::string>> seen;
  for (const auto& r : data.records) {
    if (!seen.emplace(r.is_variant, r.template_id, r.question_text).second) continue;
    (r.is_variant ? sets.variants : sets.base).push_back(r.question_text);
  }
  return sets;
}

TextSets texts_from_gsm_symbolic(const std::vector<fs::path>& files) {
  TextSets sets;
  std::set<std::string> base_keys;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError(fmt::format("{}: line {}: {}", path.string(), lineno, e.what()), lineno);
      }
      if (!obj.contains("question") || !obj["question"].is_string()) {
        throw DataError(fmt::format("{}: line {}: missing string field 'question'", path.string(), lineno), lineno,
                        "question");
      }
      sets.variants.push_back(obj["question"].get<std::string>());
      if (obj.contains("original_question") && obj["original_question"].is_string()) {
        std::string original = obj["original_question"].get<std::string>();
        std::string key = obj.contains("original_id") ? obj["original_id"].dump() : original;
        if (base_keys.insert(key).second) sets.base.push_back(std::move(original));
      }
    }
  }
  return sets;
}

std::vector<double> unrolled(const std::vector<std::string>& texts) {
  std::vector<double> values;
  for (const auto& t : texts) {
    for (auto v : extract_integers(t)) values.push_back(static_cast<double>(v));
  }
  return values;
}

// Variable-width 1-2-5 bins: [0,1), [1,2), [2,5), [5,10), [10,20), ...
std::vector<double> bin_edges(double max_value) {
  std::vector<double> edges{0.0, 1.0};
  const double steps[] = {2.0, 5.0, 10.0};
  double decade = 1.0;
  while (edges.back() <= max_value) {
    for (double s : steps) edges.push_back(decade * s);
    decade *= 10.0;
  }
  return edges;
}

synthlab::SimParams sim_params(const AnalysisConfig& config) {
  synthlab::SimParams p = config.sim;
  p.seed = config.seed;
  synthlab::validate(p);
  return p;
}

}  // namespace

int cmd_grade(const AnalysisConfig& config, ExecutionAdapter* adapter, std::ostream& log) {
  config.validate();
  Dataset data = filter_format(load_inputs(config), config.prompt_format);

  auto needs_grading = [](const EvalRecord& r) { return !r.correct.has_value() && r.gradable(); };
  if (adapter == nullptr) {
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      const auto& r = data.records[i];
      if (needs_grading(r) && is_code_format(r.prompt_format)) {
        throw EnvironmentError(fmt::format("{} needs code execution but {} is not set", record_label(i, r),
                                           kExecAdapterEnv));
      }
    }
  }

  std::map<RunKey, std::map<std::string, std::size_t>> counts;
  auto details = open_output(config.out_dir / "grade_details.csv");
  csv::write_row(details, std::vector<std::string>{"index", "model", "prompt_format", "template_id", "is_variant",
                                                   "failure_class", "extraction_method", "extracted_value"});
  std::size_t ungraded = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    auto& r = data.records[i];
    std::string klass;
    std::string method = "none";
    std::optional<std::string> extracted;
    if (r.correct) {
      klass = *r.correct ? "correct" : "wrong_answer";
      method = "pre_graded";
    } else if (r.gradable()) {
      const GradeResult g = grade_record(r, adapter, config.grading);
      r.correct = g.correct;
      klass = std::string(to_string(g.failure_class));
      method = std::string(to_string(g.extraction_method));
      if (g.extracted_value) extracted = g.extracted_value->str();
    } else {
      klass = "ungraded";
      ++ungraded;
    }
    ++counts[run_key(r)][klass];
    csv::write_row(details, std::vector<std::optional<std::string>>{
                                std::to_string(i), r.model, std::string(to_string(r.prompt_format)),
                                std::to_string(r.template_id), r.is_variant ? "true" : "false", klass, method,
                                extracted});
  }

  {
    auto out = open_output(config.out_dir / "graded.jsonl");
    write_records(out, data.records, FileFormat::jsonl);
  }
  auto out = open_output(config.out_dir / "grade_counts.csv");
  csv::write_row(out, std::vector<std::string>{"model", "prompt_format", "failure_class", "count"});
  for (const auto& [key, classes] : counts) {
    for (const auto& [klass, n] : classes) {
      csv::write_row(out, std::vector<std::string>{key.model, std::string(to_string(key.prompt_format)), klass,
                                                   std::to_string(n)});
      log << fmt::format("{:<40} {:<16} {:<28} {}\n", key.model, to_string(key.prompt_format), klass, n);
    }
  }
  if (ungraded > 0) log << fmt::format("warning: {} record(s) had neither a label nor a gradable response\n", ungraded);
  log << fmt::format("graded {} record(s) -> {}\n", data.records.size(), (config.out_dir / "graded.jsonl").string());
  return kExitOk;
}

int cmd_gamma(const AnalysisConfig& config, std::ostream& log) {
  config.validate();
  const Dataset data = filter_format(load_inputs(config), config.prompt_format);
  if (data.records.empty()) throw UsageError("no records to process");
  auto out = open_output(config.out_dir / "gamma.csv");
  csv::write_row(out, std::vector<std::string>{"model", "prompt_format", "template_id", "is_variant", "integers",
                                               "gamma", "gamma_c"});
  for (const auto& [key, cell] : data.split_cells()) {
    std::vector<NumericLoad> loads;
    for (const auto& r : cell.records) loads.push_back(numeric_load(r.question_text));
    center_loads(loads);
    double lo = 0, hi = 0;
    for (std::size_t i = 0; i < loads.size(); ++i) {
      const auto& r = cell.records[i];
      lo = i == 0 ? loads[i].gamma : std::min(lo, loads[i].gamma);
      hi = i == 0 ? loads[i].gamma : std::max(hi, loads[i].gamma);
      csv::write_row(out, std::vector<std::string>{r.model, std::string(to_string(r.prompt_format)),
                                                   std::to_string(r.template_id), r.is_variant ? "true" : "false",
                                                   join_integers(loads[i].integers), full(loads[i].gamma),
                                                   full(loads[i].gamma_centered)});
    }
    log << fmt::format("{}: {} records, gamma in [{:.3f}, {:.3f}]\n", to_string(key), cell.records.size(), lo, hi);
  }
  return kExitOk;
}

int cmd_ks(const AnalysisConfig& config, std::ostream& log) {
  config.validate();
  TextSets texts;
  if (!config.gsm_symbolic.empty()) {
    texts = texts_from_gsm_symbolic(config.gsm_symbolic);
  } else {
    texts = texts_from_records(filter_format(load_inputs(config), config.prompt_format));
  }
  const auto base = unrolled(texts.base);
  const auto variants = unrolled(texts.variants);
  if (base.empty()) throw UsageError("no integers were extracted from the base questions");
  if (variants.empty()) throw UsageError("no integers were extracted from the variant questions");
  const auto ks = inference::ks_two_sample(base, variants);

  nlohmann::ordered_json j;
  j["d_statistic"] = ks.d_statistic;
  j["p_value"] = ks.p_value;
  j["n1"] = ks.n1;
  j["n2"] = ks.n2;
  j["base_questions"] = texts.base.size();
  j["variant_questions"] = texts.variants.size();
  open_output(config.out_dir / "ks.json") << j.dump(2) << '\n';

  const double max_value = std::max(*std::max_element(base.begin(), base.end()),
                                    *std::max_element(variants.begin(), variants.end()));
  const auto edges = bin_edges(max_value);
  auto out = open_output(config.out_dir / "ks_distribution.csv");
  csv::write_row(out, std::vector<std::string>{"bin_lo", "bin_hi", "base_count", "variant_count", "base_fraction",
                                               "variant_fraction", "base_cumulative", "variant_cumulative"});
  std::vector<double> sb = base, sv = variants;
  std::sort(sb.begin(), sb.end());
  std::sort(sv.begin(), sv.end());
  auto below = [](const std::vector<double>& s, double x) {
    return static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), x) - s.begin());
  };
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const std::size_t cb = below(sb, edges[k + 1]) - below(sb, edges[k]);
    const std::size_t cv = below(sv, edges[k + 1]) - below(sv, edges[k]);
    const double nb = static_cast<double>(sb.size()), nv = static_cast<double>(sv.size());
    csv::write_row(out, std::vector<std::string>{full(edges[k]), full(edges[k + 1]), std::to_string(cb),
                                                 std::to_string(cv), full(cb / nb), full(cv / nv),
                                                 full(below(sb, edges[k + 1]) / nb),
                                                 full(below(sv, edges[k + 1]) / nv)});
  }
  log << fmt::format("D = {:.4f}, p {} (n1 = {}, n2 = {})\n", ks.d_statistic,
                     ks.p_value < config.p_floor ? fmt::format("< {:g}", config.p_floor)
                                                 : fmt::format("= {:.3f}", ks.p_value),
                     ks.n1, ks.n2);
  return kExitOk;
}

int cmd_simulate(const AnalysisConfig& config, std::ostream& log) {
  config.validate();
  const auto params = sim_params(config);
  const auto sim = synthlab::simulate_dataset(params);
  {
    auto records = open_output(config.out_dir / "simulated.jsonl");
    write_records(records, sim.dataset.records, FileFormat::jsonl);
  }
  auto out = open_output(config.out_dir / "simulated_gamma.csv");
  csv::write_row(out, std::vector<std::string>{"index", "template_id", "is_variant", "gamma_c"});
  for (std::size_t i = 0; i < sim.dataset.records.size(); ++i) {
    const auto& r = sim.dataset.records[i];
    csv::write_row(out, std::vector<std::string>{std::to_string(i), std::to_string(r.template_id),
                                                 r.is_variant ? "true" : "false", full(sim.gamma_centered[i])});
  }
  log << fmt::format("simulated {} records ({} templates x {} rows) with seed {}\n", sim.dataset.records.size(),
                     params.n_templates, params.n_variants_per_template + 1, params.seed);
  return kExitOk;
}

int cmd_calibrate(const AnalysisConfig& config, std::ostream& log) {
  config.validate();
  const auto params = sim_params(config);
  synthlab::ExperimentOptions opts;
  opts.alpha = config.alpha;
  opts.jobs = config.jobs;
  opts.fit = config.fit;
  const auto report = synthlab::recovery_experiment(params, config.replicates, opts);

  auto rows = open_output(config.out_dir / "calibration.csv");
  synthlab::write_calibration_csv(rows, report);
  auto summary = open_output(config.out_dir / "calibration_summary.csv");
  csv::write_row(summary, std::vector<std::string>{"model", "coefficient", "truth", "bias", "rmse", "coverage",
                                                   "rejection_rate", "degenerate", "failed", "usable"});
  for (const auto& b : report.blocks) {
    csv::write_row(summary, std::vector<std::string>{b.model, b.coefficient, full(b.truth), full(b.bias),
                                                     full(b.rmse), full(b.coverage), full(b.rejection_rate),
                                                     std::to_string(b.degenerate_count),
                                                     std::to_string(b.failed_count), std::to_string(b.usable)});
    log << fmt::format("{} {}: bias {:+.4f}, rmse {:.4f}, coverage {:.3f}, rejection {:.3f} ({} usable)\n", b.model,
                       b.coefficient, b.bias, b.rmse, b.coverage, b.rejection_rate, b.usable);
  }
  log << fmt::format("naive two-proportion rejection rate {:.3f}\n", report.naive_rejection_rate);
  for (const auto& note : report.notes) log << "note: " << note << '\n';
  return kExitOk;
}

}  // namespace benchdelta::cli
