#include "benchdelta/evalstore.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "benchdelta/csv.hpp"
#include "benchdelta/errors.hpp"
#include <nlohmann/json.hpp>

namespace benchdelta {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 5> kFormatNames = {"gsm", "simple_nl", "structured_nl", "simple_code",
                                                          "structured_code"};

constexpr std::array<std::string_view, 8> kColumns = {"model",         "prompt_format", "template_id",
                                                      "is_variant",    "question_text", "response_text",
                                                      "gold_answer",   "correct"};

[[noreturn]] void fail(std::size_t line, std::string_view field, const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line << ", field '" << field << "': " << what;
  throw DataError(msg.str(), line, std::string(field));
}

PromptFormat require_format(std::string_view name, std::size_t line) {
  auto format = parse_prompt_format(name);
  if (!format) fail(line, "prompt_format", "unknown prompt format '" + std::string(name) + "'");
  return *format;
}

std::optional<std::string> optional_text(const json& obj, std::string_view key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (key == "gold_answer" && it->is_number()) return it->dump();
  fail(line, key, "expected string or null");
}

EvalRecord record_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) fail(line, "<row>", "expected a JSON object");
  EvalRecord r;

  auto model = obj.find("model");
  if (model == obj.end() || !model->is_string()) fail(line, "model", "missing or not a string");
  r.model = model->get<std::string>();

  auto format = obj.find("prompt_format");
  if (format == obj.end() || !format->is_string()) fail(line, "prompt_format", "missing or not a string");
  r.prompt_format = require_format(format->get<std::string>(), line);

  auto tid = obj.find("template_id");
  if (tid == obj.end() || !tid->is_number_integer()) fail(line, "template_id", "missing or not an integer");
  r.template_id = tid->get<std::int64_t>();
  if (r.template_id < 0) fail(line, "template_id", "must be non-negative");

  auto variant = obj.find("is_variant");
  if (variant == obj.end() || !variant->is_boolean()) fail(line, "is_variant", "missing or not a boolean");
  r.is_variant = variant->get<bool>();

  auto question = obj.find("question_text");
  if (question != obj.end() && !question->is_null()) {
    if (!question->is_string()) fail(line, "question_text", "expected string");
    r.question_text = question->get<std::string>();
  }
  r.response_text = optional_text(obj, "response_text", line);
  r.gold_answer = optional_text(obj, "gold_answer", line);

  auto correct = obj.find("correct");
  if (correct != obj.end() && !correct->is_null()) {
    if (!correct->is_boolean()) fail(line, "correct", "expected boolean or null");
    r.correct = correct->get<bool>();
  }
  return r;
}

std::optional<bool> parse_bool(std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  return std::nullopt;
}

EvalRecord record_from_csv(const csv::Row& row, const std::vector<int>& column_of, std::size_t line) {
  auto cell = [&](std::size_t col) -> std::optional<std::string_view> {
    const int idx = column_of[col];
    if (idx < 0 || static_cast<std::size_t>(idx) >= row.fields.size()) return std::nullopt;
    const auto& value = row.fields[static_cast<std::size_t>(idx)];
    if (value.empty() && !row.quoted[static_cast<std::size_t>(idx)]) return std::nullopt;
    return std::string_view(value);
  };
  auto required = [&](std::size_t col) -> std::string_view {
    auto v = cell(col);
    if (!v) fail(line, kColumns[col], "missing value");
    return *v;
  };

  EvalRecord r;
  r.model = std::string(required(0));
  r.prompt_format = require_format(required(1), line);

  const std::string tid(required(2));
  try {
    std::size_t used = 0;
    const long long value = std::stoll(tid, &used);
    if (used != tid.size()) throw std::invalid_argument(tid);
    r.template_id = value;
  } catch (const std::logic_error&) {
    fail(line, "template_id", "not an integer: '" + tid + "'");
  }
  if (r.template_id < 0) fail(line, "template_id", "must be non-negative");

  auto variant = parse_bool(required(3));
  if (!variant) fail(line, "is_variant", "expected true/false/1/0");
  r.is_variant = *variant;

  if (auto q = cell(4)) r.question_text = std::string(*q);
  if (auto resp = cell(5)) r.response_text = std::string(*resp);
  if (auto gold = cell(6)) r.gold_answer = std::string(*gold);
  if (auto c = cell(7)) {
    auto value = parse_bool(*c);
    if (!value) fail(line, "correct", "expected true/false/1/0 or empty");
    r.correct = *value;
  }
  return r;
}

void check_duplicate_base(std::set<GroupKey>& bases, const EvalRecord& r, std::size_t line) {
  if (r.is_variant) return;
  if (!bases.insert(GroupKey{run_key(r), r.template_id}).second) {
    fail(line, "is_variant",
         "duplicate base record for template " + std::to_string(r.template_id) + " in " + to_string(run_key(r)));
  }
}

}  // namespace

std::string_view to_string(PromptFormat format) noexcept { return kFormatNames[static_cast<std::size_t>(format)]; }

std::optional<PromptFormat> parse_prompt_format(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kFormatNames.size(); ++i) {
    if (kFormatNames[i] == name) return static_cast<PromptFormat>(i);
  }
  return std::nullopt;
}

bool is_code_format(PromptFormat format) noexcept {
  return format == PromptFormat::simple_code || format == PromptFormat::structured_code;
}

RunKey run_key(const EvalRecord& record) { return RunKey{record.model, record.prompt_format}; }

std::string to_string(const RunKey& key) { return key.model + "/" + std::string(to_string(key.prompt_format)); }

std::string_view to_string(FileFormat format) noexcept { return format == FileFormat::csv ? "csv" : "jsonl"; }

std::optional<FileFormat> parse_file_format(std::string_view name) noexcept {
  if (name == "jsonl") return FileFormat::jsonl;
  if (name == "csv") return FileFormat::csv;
  return std::nullopt;
}

FileFormat infer_file_format(const std::filesystem::path& path) noexcept {
  return path.extension() == ".csv" ? FileFormat::csv : FileFormat::jsonl;
}

std::map<RunKey, std::size_t> Dataset::counts_per_run() const {
  std::map<RunKey, std::size_t> counts;
  for (const auto& r : records) ++counts[run_key(r)];
  return counts;
}

std::map<GroupKey, std::vector<std::size_t>> Dataset::template_groups() const {
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[GroupKey{run_key(records[i]), records[i].template_id}].push_back(i);
  }
  return groups;
}

std::map<std::size_t, std::size_t> Dataset::group_size_histogram() const {
  std::map<std::size_t, std::size_t> histogram;
  for (const auto& [key, members] : template_groups()) ++histogram[members.size()];
  return histogram;
}

std::map<RunKey, Dataset> Dataset::split_cells() const {
  std::map<RunKey, Dataset> cells;
  for (const auto& r : records) {
    auto [it, inserted] = cells.try_emplace(run_key(r));
    if (inserted) {
      it->second.source = source;
      it->second.format = format;
    }
    it->second.records.push_back(r);
  }
  return cells;
}

Dataset read_records(std::istream& in, FileFormat format, std::string source) {
  Dataset d;
  d.source = std::move(source);
  d.format = format;
  std::set<GroupKey> bases;

  if (format == FileFormat::jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        fail(line_no, "<row>", std::string("invalid JSON: ") + e.what());
      }
      EvalRecord r = record_from_json(obj, line_no);
      check_duplicate_base(bases, r, line_no);
      d.records.push_back(std::move(r));
    }
    return d;
  }

  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) return d;
  std::vector<int> column_of(kColumns.size(), -1);
  for (std::size_t i = 0; i < header->fields.size(); ++i) {
    std::string name = header->fields[i];
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
    bool known = false;
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      if (kColumns[c] == name) {
        column_of[c] = static_cast<int>(i);
        known = true;
      }
    }
    if (!known) fail(header->line, name, "unknown CSV column");
  }
  for (std::size_t c = 0; c < 4; ++c) {
    if (column_of[c] < 0) fail(header->line, kColumns[c], "required CSV column missing from header");
  }
  while (auto row = reader.next()) {
    if (row->fields.size() == 1 && row->fields[0].empty() && !row->quoted[0]) continue;
    if (row->fields.size() != header->fields.size()) {
      fail(row->line, "<row>",
           "expected " + std::to_string(header->fields.size()) + " fields, got " + std::to_string(row->fields.size()));
    }
    EvalRecord r = record_from_csv(*row, column_of, row->line);
    check_duplicate_base(bases, r, row->line);
    d.records.push_back(std::move(r));
  }
  return d;
}

Dataset load_records(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_records(in, format, path.string());
}

void write_records(std::ostream& out, const std::vector<EvalRecord>& records, FileFormat format) {
  if (format == FileFormat::jsonl) {
    for (const auto& r : records) {
      ordered_json obj;
      obj["model"] = r.model;
      obj["prompt_format"] = to_string(r.prompt_format);
      obj["template_id"] = r.template_id;
      obj["is_variant"] = r.is_variant;
      obj["question_text"] = r.question_text;
      obj["response_text"] = r.response_text ? ordered_json(*r.response_text) : ordered_json(nullptr);
      obj["gold_answer"] = r.gold_answer ? ordered_json(*r.gold_answer) : ordered_json(nullptr);
      obj["correct"] = r.correct ? ordered_json(*r.correct) : ordered_json(nullptr);
      out << obj.dump() << '\n';
    }
    return;
  }
  csv::write_row(out, std::vector<std::string>(kColumns.begin(), kColumns.end()));
  for (const auto& r : records) {
    std::vector<std::optional<std::string>> fields = {
        r.model,
        std::string(to_string(r.prompt_format)),
        std::to_string(r.template_id),
        std::string(r.is_variant ? "true" : "false"),
        r.question_text,
        r.response_text,
        r.gold_answer,
        r.correct ? std::optional<std::string>(*r.correct ? "true" : "false") : std::nullopt,
    };
    csv::write_row(out, fields);
  }
}

void save_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records, FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_records(out, records, format);
}

std::string_view to_string(IssueKind kind) noexcept {
  switch (kind) {
    case IssueKind::missing_correctness: return "missing_correctness";
    case IssueKind::ungradable: return "ungradable";
    case IssueKind::duplicate_base: return "duplicate_base";
    case IssueKind::missing_base: return "missing_base";
    case IssueKind::empty_question: return "empty_question";
  }
  return "unknown";
}

std::size_t ValidationReport::count(IssueKind kind) const noexcept {
  std::size_t n = 0;
  for (const auto& issue : issues) n += issue.kind == kind;
  return n;
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    if (!r.correct) {
      if (r.gradable()) {
        report.issues.push_back({IssueKind::missing_correctness, i, std::nullopt, "record not yet graded"});
      } else {
        report.issues.push_back(
            {IssueKind::ungradable, i, std::nullopt, "no correctness flag and missing response_text or gold_answer"});
      }
    }
    if (r.question_text.empty()) {
      report.issues.push_back({IssueKind::empty_question, i, std::nullopt, "empty question text"});
    }
  }
  for (const auto& [key, members] : dataset.template_groups()) {
    std::size_t bases = 0;
    for (auto idx : members) bases += !dataset.records[idx].is_variant;
    if (bases == 0) {
      report.issues.push_back({IssueKind::missing_base, std::nullopt, key,
                               "template " + std::to_string(key.template_id) + " in " + to_string(key.run) +
                                   " has no base record"});
    } else if (bases > 1) {
      report.issues.push_back({IssueKind::duplicate_base, std::nullopt, key,
                               "template " + std::to_string(key.template_id) + " in " + to_string(key.run) + " has " +
                                   std::to_string(bases) + " base records"});
    }
  }
  return report;
}

}  // namespace benchdelta
