#include <fmt/format.h>

#include <cmath>

#include "benchdelta/cli.hpp"
#include "benchdelta/errors.hpp"
#include "internal.hpp"

namespace benchdelta::cli {

void AnalysisConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError(fmt::format("--alpha must lie in (0, 1), got {}", alpha));
  if (!(p_floor > 0.0 && p_floor < alpha)) {
    throw UsageError(fmt::format("--p-floor must lie in (0, alpha={}), got {}", alpha, p_floor));
  }
  if (jobs < 0) throw UsageError("--jobs must be non-negative");
  if (!(fit.pirls_tol > 0.0) || !(fit.outer_tol > 0.0) || fit.pirls_max_iter < 1) {
    throw UsageError("fit tolerances must be positive");
  }
  if (!(fit.theta_max > 0.0)) throw UsageError("--theta-max must be positive");
  if (replicates < 1) throw UsageError("--replicates must be at least 1");
}

Dataset load_inputs(const AnalysisConfig& config) {
  if (config.inputs.empty()) throw UsageError("no --input given");
  Dataset all;
  for (const auto& path : config.inputs) {
    if (!fs::exists(path)) throw UsageError("input file does not exist: " + path.string());
    const FileFormat format = config.format.value_or(infer_file_format(path));
    Dataset part = load_records(path, format);
    if (all.source.empty()) {
      all.source = part.source;
      all.format = part.format;
    } else {
      all.source += "," + part.source;
    }
    all.records.insert(all.records.end(), std::make_move_iterator(part.records.begin()),
                       std::make_move_iterator(part.records.end()));
  }
  return all;
}

Dataset filter_format(const Dataset& data, const std::optional<PromptFormat>& format) {
  if (!format) return data;
  Dataset out;
  out.source = data.source;
  out.format = data.format;
  for (const auto& r : data.records) {
    if (r.prompt_format == *format) out.records.push_back(r);
  }
  return out;
}

std::string cell_stem(const RunKey& key) {
  std::string stem;
  for (char c : key.model) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    stem.push_back(keep ? c : '_');
  }
  return stem + "__" + std::string(to_string(key.prompt_format));
}

std::string fmt_fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  std::string s = fmt::format("{:.{}f}", v, digits);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string fmt_p(double p, double p_floor) {
  if (!std::isfinite(p)) return "NA";
  if (p < p_floor) return fmt::format("< {:g}", p_floor);
  return fmt_fixed(p, 3);
}

}  // namespace benchdelta::cli

namespace benchdelta::cli::detail {

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

std::string full(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("NA"); }

}  // namespace benchdelta::cli::detail
