#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace benchdelta {

enum class PromptFormat { gsm, simple_nl, structured_nl, simple_code, structured_code };

std::string_view to_string(PromptFormat format) noexcept;
std::optional<PromptFormat> parse_prompt_format(std::string_view name) noexcept;
bool is_code_format(PromptFormat format) noexcept;

/// One question instance answered by one model under one prompt format.
struct EvalRecord {
  std::string model;
  PromptFormat prompt_format = PromptFormat::gsm;
  std::int64_t template_id = 0;
  bool is_variant = false;  // false: base question, true: template-generated variant
  std::string question_text;
  std::optional<std::string> response_text;
  std::optional<std::string> gold_answer;  // exact decimal text, parsed on demand
  std::optional<bool> correct;             // present when pre-graded

  bool gradable() const noexcept { return response_text.has_value() && gold_answer.has_value(); }

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Identifies one analysis cell: one GLMM fit per (model, prompt format).
struct RunKey {
  std::string model;
  PromptFormat prompt_format = PromptFormat::gsm;

  friend auto operator<=>(const RunKey&, const RunKey&) = default;
  friend bool operator==(const RunKey&, const RunKey&) = default;
};

RunKey run_key(const EvalRecord& record);
std::string to_string(const RunKey& key);

enum class FileFormat { jsonl, csv };

std::string_view to_string(FileFormat format) noexcept;
std::optional<FileFormat> parse_file_format(std::string_view name) noexcept;
/// Guesses the format from the file extension; JSONL unless it ends in ".csv".
FileFormat infer_file_format(const std::filesystem::path& path) noexcept;

/// Key of one template group inside a cell.
struct GroupKey {
  RunKey run;
  std::int64_t template_id = 0;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
  friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

struct Dataset {
  std::vector<EvalRecord> records;
  std::string source;
  FileFormat format = FileFormat::jsonl;

  std::map<RunKey, std::size_t> counts_per_run() const;

  /// Record indices of every template group, in record order.
  std::map<GroupKey, std::vector<std::size_t>> template_groups() const;

  /// group size -> number of groups with that size.
  std::map<std::size_t, std::size_t> group_size_histogram() const;

  /// Splits into one dataset per RunKey, preserving record order.
  std::map<RunKey, Dataset> split_cells() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Parses records from a stream. Throws DataError naming the 1-based line and
/// field on malformed rows, unknown prompt formats, and duplicate base
/// records within a template group.
Dataset read_records(std::istream& in, FileFormat format, std::string source = {});
Dataset load_records(const std::filesystem::path& path, FileFormat format);

void write_records(std::ostream& out, const std::vector<EvalRecord>& records, FileFormat format);
void save_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records, FileFormat format);

enum class IssueKind { missing_correctness, ungradable, duplicate_base, missing_base, empty_question };

std::string_view to_string(IssueKind kind) noexcept;

struct ValidationIssue {
  IssueKind kind;
  std::optional<std::size_t> record_index;
  std::optional<GroupKey> group;
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
  std::size_t count(IssueKind kind) const noexcept;

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

/// Report-only check; never modifies or rejects the dataset.
ValidationReport validate_dataset(const Dataset& dataset);

}  // namespace benchdelta
