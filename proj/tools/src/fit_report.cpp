#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "benchdelta/cli.hpp"
#include "benchdelta/csv.hpp"
#include "benchdelta/errors.hpp"
#include "internal.hpp"
#include <nlohmann/json.hpp>

namespace benchdelta::cli {
namespace {

using detail::full;
using detail::open_output;
using ojson = nlohmann::ordered_json;

constexpr const char* kUnreliable = "†";

struct CellArtifact {
  RunKey run;
  std::optional<inference::SummaryRow> summary;
  std::optional<glmm::FitResult> glmm1;
  std::optional<glmm::FitResult> glmm2;
  std::optional<glmm::MultiOptimizerReport> optimizer_check;
  std::string error;
};

ojson artifact_json(const CellArtifact& a) {
  ojson j;
  j["run"] = {{"model", a.run.model}, {"prompt_format", std::string(to_string(a.run.prompt_format))}};
  if (a.summary) {
    j["summary"] = {{"acc_base", a.summary->acc_base},         {"acc_variants", a.summary->acc_variants},
                    {"delta", a.summary->delta_var},           {"n_base", a.summary->n_base},
                    {"n_variants", a.summary->n_variants}};
  }
  if (a.glmm1) j["glmm1"] = ojson::parse(glmm::fit_to_json(*a.glmm1));
  if (a.glmm2) j["glmm2"] = ojson::parse(glmm::fit_to_json(*a.glmm2));
  if (a.optimizer_check) {
    ojson runs = ojson::array();
    for (const auto& r : a.optimizer_check->runs) {
      ojson o;
      o["optimizer"] = std::string(glmm::to_string(r.optimizer));
      o["theta"] = r.theta;
      o["estimates"] = r.estimates ? ojson(*r.estimates) : ojson(nullptr);
      o["degenerate"] = r.degenerate;
      if (!r.error.empty()) o["error"] = r.error;
      runs.push_back(std::move(o));
    }
    ojson spread = ojson::array();
    for (double s : a.optimizer_check->spread) spread.push_back(std::isfinite(s) ? ojson(s) : ojson(nullptr));
    j["optimizer_check"] = {{"coefficients", a.optimizer_check->coefficient_names}, {"runs", runs}, {"spread", spread}};
  }
  if (!a.error.empty()) j["error"] = a.error;
  return j;
}

CellArtifact artifact_from_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  CellArtifact a;
  try {
    const auto j = nlohmann::json::parse(buf.str());
    a.run.model = j.at("run").at("model").get<std::string>();
    const auto fmt_name = j.at("run").at("prompt_format").get<std::string>();
    const auto pf = parse_prompt_format(fmt_name);
    if (!pf) throw DataError(path.string() + ": unknown prompt format '" + fmt_name + "'");
    a.run.prompt_format = *pf;
    if (j.contains("summary")) {
      const auto& s = j["summary"];
      inference::SummaryRow row;
      row.run = a.run;
      row.acc_base = s.at("acc_base").get<double>();
      row.acc_variants = s.at("acc_variants").get<double>();
      row.delta_var = s.at("delta").get<double>();
      row.n_base = s.value("n_base", std::size_t{0});
      row.n_variants = s.value("n_variants", std::size_t{0});
      a.summary = row;
    }
    if (j.contains("glmm1")) a.glmm1 = glmm::fit_from_json(j["glmm1"].dump());
    if (j.contains("glmm2")) a.glmm2 = glmm::fit_from_json(j["glmm2"].dump());
    a.error = j.value("error", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return a;
}

const glmm::FixedEffectStat* variant_stat(const std::optional<glmm::FitResult>& fit) {
  return fit ? fit->find("variant") : nullptr;
}

struct Corrected {
  std::optional<double> p;  // default family (degenerate excluded)
  double p_all = std::numeric_limits<double>::quiet_NaN();
};

// Column-wise Holm: one family per prompt format over the GLMM 1 variant p.
std::map<RunKey, Corrected> column_wise_holm(const std::vector<CellArtifact>& cells, double p_floor, double alpha) {
  std::map<PromptFormat, std::vector<std::pair<RunKey, inference::FamilyEntry>>> families;
  for (const auto& c : cells) {
    const auto* s = variant_stat(c.glmm1);
    if (!c.error.empty() || !s || !std::isfinite(s->p_value)) continue;
    families[c.run.prompt_format].push_back({c.run, {s->p_value, s->p_value < p_floor, c.glmm1->degenerate}});
  }
  std::map<RunKey, Corrected> out;
  for (const auto& [format, members] : families) {
    std::vector<inference::FamilyEntry> entries;
    for (const auto& m : members) entries.push_back(m.second);
    const auto fc = inference::correct_family(entries, p_floor, alpha);
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i].first] = {fc.corrected[i], fc.corrected_all[i]};
  }
  return out;
}

std::string opt_full(double v) { return std::isfinite(v) ? full(v) : std::string(); }

// NaN when the cell is outside the default family.
double corrected_p(const std::map<RunKey, Corrected>& holm, const RunKey& key) {
  const auto it = holm.find(key);
  return it != holm.end() && it->second.p ? *it->second.p : std::numeric_limits<double>::quiet_NaN();
}

std::string corrected_text(double pc, bool degenerate, double p_floor) {
  if (std::isfinite(pc)) return fmt_p(pc, p_floor);
  return degenerate ? "excluded" : "NA";
}

void write_summary(const AnalysisConfig& config, const std::vector<CellArtifact>& cells,
                   const std::map<RunKey, Corrected>& holm) {
  auto out = open_output(config.out_dir / "summary.csv");
  csv::write_row(out, std::vector<std::string>{"model", "prompt_format", "acc_base", "acc_variants", "delta", "p_raw",
                                               "p_corrected"});
  auto hc = open_output(config.out_dir / "holm.csv");
  csv::write_row(hc, std::vector<std::string>{"model", "prompt_format", "p_raw", "p_corrected", "p_corrected_all",
                                              "degenerate"});
  auto md = open_output(config.out_dir / "summary.md");
  md << "| Model | Format | Acc. base | Acc. variants | Δ | p | p (Holm) |\n";
  md << "|---|---|---:|---:|---:|---:|---:|\n";
  bool any_degenerate = false;
  for (const auto& c : cells) {
    const std::string model = c.run.model;
    const std::string format(to_string(c.run.prompt_format));
    if (!c.error.empty() || !c.summary) {
      md << fmt::format("| {} | {} | failed: {} |||||\n", model, format, c.error);
      continue;
    }
    const auto* s = variant_stat(c.glmm1);
    const double p = s ? s->p_value : std::numeric_limits<double>::quiet_NaN();
    const auto it = holm.find(c.run);
    const double pc = corrected_p(holm, c.run);
    const bool degenerate = c.glmm1 && c.glmm1->degenerate;
    any_degenerate |= degenerate;
    csv::write_row(out, std::vector<std::string>{model, format, full(c.summary->acc_base),
                                                 full(c.summary->acc_variants), full(c.summary->delta_var), full(p),
                                                 opt_full(pc)});
    csv::write_row(hc, std::vector<std::string>{model, format, full(p), opt_full(pc),
                                                it != holm.end() ? full(it->second.p_all) : std::string(),
                                                degenerate ? "true" : "false"});
    const std::string mark = degenerate ? kUnreliable : "";
    const std::string p_text = fmt_p(p, config.p_floor) + mark;
    const std::string pc_text = corrected_text(pc, degenerate, config.p_floor);
    const bool bold = std::isfinite(p) && inference::significance_flag(p, config.alpha) && !degenerate;
    md << fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", model, format, fmt_fixed(c.summary->acc_base, 1),
                      fmt_fixed(c.summary->acc_variants, 1), fmt_fixed(c.summary->delta_var, 2),
                      bold ? "**" + p_text + "**" : p_text, pc_text);
  }
  if (any_degenerate) {
    md << fmt::format("\n{} degenerate fit: standard errors are unreliable; excluded from the Holm family "
                      "(holm.csv lists the correction with it included).\n",
                      kUnreliable);
  }

  if (std::none_of(cells.begin(), cells.end(), [](const CellArtifact& c) { return c.glmm2.has_value(); })) return;
  md << "\n| Model | Format | OR γ_c | 95% CI | p | OR variant | 95% CI | p |\n";
  md << "|---|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& c : cells) {
    if (!c.glmm2) continue;
    const auto* g = c.glmm2->find("gamma_c");
    const auto* v = c.glmm2->find("variant");
    if (!g || !v) continue;
    const std::string mark = c.glmm2->degenerate ? kUnreliable : "";
    md << fmt::format("| {} | {} | {} | [{}, {}] | {}{} | {} | [{}, {}] | {}{} |\n", c.run.model,
                      to_string(c.run.prompt_format), fmt_fixed(g->odds_ratio, 2), fmt_fixed(g->ci_lo, 2),
                      fmt_fixed(g->ci_hi, 2), fmt_p(g->p_value, config.p_floor), mark, fmt_fixed(v->odds_ratio, 2),
                      fmt_fixed(v->ci_lo, 2), fmt_fixed(v->ci_hi, 2), fmt_p(v->p_value, config.p_floor), mark);
  }
}

CellArtifact fit_cell(const RunKey& key, const Dataset& cell, const AnalysisConfig& config) {
  CellArtifact a;
  a.run = key;
  try {
    a.summary = inference::accuracy_summary(cell);
    const auto spec1 = glmm::ModelSpec::glmm1();
    const auto dm1 = glmm::build_design(cell, spec1);
    a.glmm1 = glmm::fit_glmm(dm1, spec1, config.fit);
    if (!a.glmm1->converged) a.error = "GLMM 1 did not converge";
    if (config.check_optimizers) {
      const glmm::OuterOptimizer all[] = {glmm::OuterOptimizer::nelder_mead, glmm::OuterOptimizer::coordinate_bounded};
      a.optimizer_check = glmm::multi_optimizer_refit(dm1, spec1, config.fit, all);
    }
    if (config.with_gamma) {
      const auto spec2 = glmm::ModelSpec::glmm2();
      const auto dm2 = glmm::build_design(cell, spec2);
      a.glmm2 = glmm::fit_glmm(dm2, spec2, config.fit);
      if (!a.glmm2->converged && a.error.empty()) a.error = "GLMM 2 did not converge";
    }
  } catch (const Error& e) {
    a.error = e.what();
  }
  return a;
}

}  // namespace

int cmd_fit(const AnalysisConfig& config, std::ostream& log) {
  config.validate();
  const Dataset data = filter_format(load_inputs(config), config.prompt_format);
  if (data.records.empty()) throw UsageError("dataset is empty; nothing to fit");
  const auto split = data.split_cells();
  std::vector<std::pair<RunKey, const Dataset*>> work;
  for (const auto& [key, cell] : split) work.emplace_back(key, &cell);

  std::vector<CellArtifact> cells(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      cells[i] = fit_cell(work[i].first, *work[i].second, config);
    }
  };
  std::size_t jobs = config.jobs > 0 ? static_cast<std::size_t>(config.jobs)
                                     : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  jobs = std::min(jobs, work.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::size_t failed = 0;
  for (const auto& c : cells) {
    open_output(config.out_dir / "fits" / (cell_stem(c.run) + ".json")) << artifact_json(c).dump(2) << '\n';
    if (!c.error.empty()) {
      ++failed;
      log << fmt::format("{}: FAILED: {}\n", to_string(c.run), c.error);
      continue;
    }
    const auto* s = variant_stat(c.glmm1);
    log << fmt::format("{}: delta {:+.2f} pp, OR {}, p {}{}\n", to_string(c.run), c.summary->delta_var,
                       fmt_fixed(s->odds_ratio, 2), fmt_p(s->p_value, config.p_floor),
                       c.glmm1->degenerate ? " (degenerate)" : "");
  }
  write_summary(config, cells, column_wise_holm(cells, config.p_floor, config.alpha));
  log << fmt::format("{} cell(s) fitted, {} failed\n", cells.size() - failed, failed);
  return failed > 0 ? kExitPartial : kExitOk;
}

int cmd_report(const AnalysisConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = config.fits_dir.empty() ? config.out_dir / "fits" : config.fits_dir;
  if (!fs::is_directory(dir)) throw UsageError("fit artifact directory does not exist: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::map<RunKey, CellArtifact> by_key;
  for (const auto& f : files) {
    auto a = artifact_from_json(f);
    if (config.prompt_format && a.run.prompt_format != *config.prompt_format) continue;
    by_key[a.run] = std::move(a);
  }

  if (!config.inputs.empty()) {
    const Dataset data = filter_format(load_inputs(config), config.prompt_format);
    std::vector<std::string> missing;
    for (const auto& [key, cell] : data.split_cells()) {
      if (!by_key.count(key)) missing.push_back(to_string(key));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw UsageError("missing fit artifact for cell(s): " + list);
    }
  }
  if (by_key.empty()) throw UsageError("no fit artifacts found in " + dir.string());

  std::vector<CellArtifact> cells;
  for (auto& [key, a] : by_key) cells.push_back(std::move(a));
  const auto holm = column_wise_holm(cells, config.p_floor, config.alpha);

  auto md = open_output(config.out_dir / "report.md");
  auto rc = open_output(config.out_dir / "report.csv");
  auto forest = open_output(config.out_dir / "forest.csv");
  csv::write_row(rc, std::vector<std::string>{"model", "prompt_format", "acc_base", "acc_variants", "delta",
                                              "odds_ratio", "ci_lo", "ci_hi", "z", "se", "p_raw", "p_corrected",
                                              "degenerate"});
  csv::write_row(forest, std::vector<std::string>{"model", "prompt_format", "spec", "coefficient", "log_or",
                                                  "log_ci_lo", "log_ci_hi", "se", "p", "degenerate"});
  md << "| Model | Format | Acc. base | Acc. variants | Δ | OR | 95% CI | z | SE | p | p (Holm) | Degenerate |\n";
  md << "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|:---:|\n";

  std::size_t failed = 0;
  for (const auto& c : cells) {
    const std::string model = c.run.model;
    const std::string format(to_string(c.run.prompt_format));
    const auto* s = variant_stat(c.glmm1);
    if (!c.error.empty() || !s || !c.summary) {
      ++failed;
      md << fmt::format("| {} | {} | failed: {} ||||||||||\n", model, format, c.error.empty() ? "no fit" : c.error);
      continue;
    }
    const bool degenerate = c.glmm1->degenerate;
    const double pc = corrected_p(holm, c.run);
    csv::write_row(rc, std::vector<std::string>{model, format, full(c.summary->acc_base),
                                                full(c.summary->acc_variants), full(c.summary->delta_var),
                                                full(s->odds_ratio), full(s->ci_lo), full(s->ci_hi), full(s->z_value),
                                                full(s->std_error), full(s->p_value), opt_full(pc),
                                                degenerate ? "true" : "false"});
    for (const auto* fit : {c.glmm1 ? &*c.glmm1 : nullptr, c.glmm2 ? &*c.glmm2 : nullptr}) {
      if (!fit) continue;
      for (const auto& st : fit->stats) {
        if (st.name == "(Intercept)") continue;
        csv::write_row(forest, std::vector<std::string>{
                                   model, format, fit->spec.name(), st.name, full(st.estimate),
                                   full(st.estimate - glmm::kWaldQuantile * st.std_error),
                                   full(st.estimate + glmm::kWaldQuantile * st.std_error), full(st.std_error),
                                   full(st.p_value), fit->degenerate ? "true" : "false"});
      }
    }
    const std::string se_text =
        std::isfinite(s->std_error) && s->std_error < 0.005 ? "< 0.01" : fmt_fixed(s->std_error, 2);
    md << fmt::format("| {} | {} | {} | {} | {} | {} | [{}, {}] | {} | {} | {} | {} | {} |\n", model, format,
                      fmt_fixed(c.summary->acc_base, 1), fmt_fixed(c.summary->acc_variants, 1),
                      fmt_fixed(c.summary->delta_var, 2), fmt_fixed(s->odds_ratio, 2), fmt_fixed(s->ci_lo, 2),
                      fmt_fixed(s->ci_hi, 2), fmt_fixed(s->z_value, 2), se_text,
                      fmt_p(s->p_value, config.p_floor) + (degenerate ? kUnreliable : ""),
                      corrected_text(pc, degenerate, config.p_floor),
                      degenerate ? std::string("yes ") + kUnreliable : "no");
  }
  log << fmt::format("report: {} cell(s), {} failed -> {}\n", cells.size(), failed,
                     (config.out_dir / "report.md").string());
  return failed > 0 ? kExitPartial : kExitOk;
}

}  // namespace benchdelta::cli
