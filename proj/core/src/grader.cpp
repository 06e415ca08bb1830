#include "benchdelta/grader.hpp"

#include <regex>
#include <sstream>

#include "benchdelta/errors.hpp"
#include "number_scan.hpp"

namespace benchdelta {
namespace {

constexpr std::string_view kTargetPhrase = "The final answer is";

std::optional<ExactDecimal> to_decimal(const detail::NumberToken& tok) {
  std::string text;
  if (tok.negative) text.push_back('-');
  text += tok.integer_digits;
  if (tok.has_fraction()) {
    text.push_back('.');
    text += tok.fraction_digits;
  }
  return ExactDecimal::parse(text);
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::size_t indent_width(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && (line[n] == ' ' || line[n] == '\t')) ++n;
  return n;
}

GradeResult failure(CodeFailureClass c) {
  GradeResult g;
  g.correct = false;
  g.failure_class = c;
  g.extraction_method = ExtractionMethod::none;
  return g;
}

}  // namespace

std::string_view to_string(NlFailureClass c) noexcept {
  switch (c) {
    case NlFailureClass::empty_response: return "empty_response";
    case NlFailureClass::empty_after_trimming: return "empty_after_trimming";
    case NlFailureClass::no_number_found: return "no_number_found";
    case NlFailureClass::wrong_answer_last_number: return "wrong_answer_last_number";
    case NlFailureClass::wrong_answer: return "wrong_answer";
    case NlFailureClass::correct: return "correct";
  }
  return "unknown";
}

std::string_view to_string(CodeFailureClass c) noexcept {
  switch (c) {
    case CodeFailureClass::no_function: return "no_function";
    case CodeFailureClass::forbidden_string: return "forbidden_string";
    case CodeFailureClass::syntax_error: return "syntax_error";
    case CodeFailureClass::name_error: return "name_error";
    case CodeFailureClass::type_value_error: return "type_value_error";
    case CodeFailureClass::zero_division_error: return "zero_division_error";
    case CodeFailureClass::attribute_error: return "attribute_error";
    case CodeFailureClass::none_returned: return "none_returned";
    case CodeFailureClass::not_a_number: return "not_a_number";
    case CodeFailureClass::unclassified: return "unclassified";
    case CodeFailureClass::wrong_answer: return "wrong_answer";
    case CodeFailureClass::correct: return "correct";
  }
  return "unknown";
}

std::string_view to_string(const FailureClass& c) noexcept {
  return std::visit([](auto v) { return to_string(v); }, c);
}

std::string_view to_string(ExtractionMethod m) noexcept {
  switch (m) {
    case ExtractionMethod::target_line: return "target_line";
    case ExtractionMethod::last_number: return "last_number";
    case ExtractionMethod::code_execution: return "code_execution";
    case ExtractionMethod::none: return "none";
  }
  return "unknown";
}

Extraction extract_final_answer(std::string_view response) {
  std::size_t pos = 0;
  while ((pos = response.find(kTargetPhrase, pos)) != std::string_view::npos) {
    std::size_t start = pos + kTargetPhrase.size();
    while (start < response.size() && (response[start] == ' ' || response[start] == '\t')) ++start;
    std::size_t line_end = response.find('\n', start);
    std::string_view rest = response.substr(start, line_end == std::string_view::npos ? std::string_view::npos
                                                                                        : line_end - start);
    auto tokens = detail::scan_numbers(rest);
    if (!tokens.empty() && tokens.front().begin == 0) {
      if (auto value = to_decimal(tokens.front())) return {value, ExtractionMethod::target_line};
    }
    pos += kTargetPhrase.size();
  }

  auto tokens = detail::scan_numbers(response);
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    if (auto value = to_decimal(*it)) return {value, ExtractionMethod::last_number};
  }
  return {std::nullopt, ExtractionMethod::none};
}

GradeResult classify_nl_response(std::string_view response, const Extraction& extraction, const ExactDecimal& gold) {
  GradeResult g;
  g.extraction_method = extraction.method;
  g.extracted_value = extraction.value;
  if (response.empty()) {
    g.failure_class = NlFailureClass::empty_response;
    g.extraction_method = ExtractionMethod::none;
    g.extracted_value.reset();
    return g;
  }
  const std::string_view trimmed = trim(response);
  if (trimmed.empty() || trimmed == "Q:") {
    g.failure_class = NlFailureClass::empty_after_trimming;
    g.extraction_method = ExtractionMethod::none;
    g.extracted_value.reset();
    return g;
  }
  if (!extraction.value || extraction.method == ExtractionMethod::none) {
    g.failure_class = NlFailureClass::no_number_found;
    g.extraction_method = ExtractionMethod::none;
    g.extracted_value.reset();
    return g;
  }
  if (*extraction.value == gold) {
    g.correct = true;
    g.failure_class = NlFailureClass::correct;
  } else if (extraction.method == ExtractionMethod::last_number) {
    g.failure_class = NlFailureClass::wrong_answer_last_number;
  } else {
    g.failure_class = NlFailureClass::wrong_answer;
  }
  return g;
}

std::optional<std::string> extract_code_function(std::string_view response) {
  static const std::regex def_line(R"(^[ \t]*def[ \t]+[A-Za-z_][A-Za-z0-9_]*[ \t]*\(.*\)[^:]*:.*$)");
  const auto lines = split_lines(response);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line(lines[i]);
    if (!std::regex_match(line, def_line)) continue;

    const std::size_t base = indent_width(lines[i]);
    std::size_t last = i;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const std::string_view body = lines[j];
      if (trim(body).empty()) continue;
      if (trim(body).rfind("```", 0) == 0) break;
      if (indent_width(body) <= base) break;
      last = j;
    }
    std::ostringstream out;
    for (std::size_t j = i; j <= last; ++j) {
      std::string_view l = lines[j];
      const std::size_t cut = std::min(base, indent_width(l));
      l.remove_prefix(cut);
      out << l;
      if (j != last) out << '\n';
    }
    return out.str();
  }
  return std::nullopt;
}

const std::vector<std::string>& default_deny_list() {
  static const std::vector<std::string> list = {"open(",      "eval(",      "exec(",      "import os",
                                                "import sys", "subprocess", "__import__"};
  return list;
}

SafetyVerdict static_safety_check(std::string_view code, std::span<const std::string> deny_list) {
  for (const auto& token : deny_list) {
    if (!token.empty() && code.find(token) != std::string_view::npos) return {false, token};
  }
  return {true, {}};
}

GradeResult classify_execution(const ExecutionOutcome& outcome, const ExactDecimal& gold) {
  using Status = ExecutionOutcome::Status;
  if (outcome.status == Status::raised) {
    const std::string name = outcome.error_class_name.value_or("");
    if (name == "SyntaxError" || name == "IndentationError" || name == "TabError") {
      return failure(CodeFailureClass::syntax_error);
    }
    if (name == "NameError" || name == "UnboundLocalError") return failure(CodeFailureClass::name_error);
    if (name == "TypeError" || name == "ValueError") return failure(CodeFailureClass::type_value_error);
    if (name == "ZeroDivisionError") return failure(CodeFailureClass::zero_division_error);
    if (name == "AttributeError") return failure(CodeFailureClass::attribute_error);
    return failure(CodeFailureClass::unclassified);
  }
  if (outcome.status == Status::no_value || !outcome.returned_value_repr || *outcome.returned_value_repr == "None") {
    return failure(CodeFailureClass::none_returned);
  }
  auto value = ExactDecimal::parse(*outcome.returned_value_repr);
  if (!value) return failure(CodeFailureClass::not_a_number);

  GradeResult g;
  g.extraction_method = ExtractionMethod::code_execution;
  g.extracted_value = value;
  g.correct = *value == gold;
  g.failure_class = g.correct ? CodeFailureClass::correct : CodeFailureClass::wrong_answer;
  return g;
}

GradeResult grade_record(const EvalRecord& record, ExecutionAdapter* adapter, const GradeOptions& options) {
  const bool code = is_code_format(record.prompt_format);
  if (code && adapter == nullptr) {
    throw EnvironmentError("no execution adapter configured for code record (model " + record.model +
                           ", template " + std::to_string(record.template_id) + ")");
  }
  if (!record.response_text || !record.gold_answer) {
    throw UsageError("record is not gradable: response_text and gold_answer are required (model " + record.model +
                     ", template " + std::to_string(record.template_id) + ")");
  }
  auto gold = ExactDecimal::parse(*record.gold_answer);
  if (!gold) throw UsageError("gold answer is not a number: '" + *record.gold_answer + "'");

  const std::string& response = *record.response_text;
  if (!code) return classify_nl_response(response, extract_final_answer(response), *gold);

  auto function = extract_code_function(response);
  if (!function) return failure(CodeFailureClass::no_function);
  if (!static_safety_check(response, options.deny_list).pass) return failure(CodeFailureClass::forbidden_string);
  return classify_execution(adapter->execute(*function, options.timeout), *gold);
}

}  // namespace benchdelta
