#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "benchdelta/decimal.hpp"
#include "benchdelta/evalstore.hpp"

namespace benchdelta {

enum class NlFailureClass {
  empty_response,
  empty_after_trimming,
  no_number_found,
  wrong_answer_last_number,
  wrong_answer,
  correct,
};

enum class CodeFailureClass {
  no_function,
  forbidden_string,
  syntax_error,
  name_error,
  type_value_error,
  zero_division_error,
  attribute_error,
  none_returned,
  not_a_number,
  unclassified,
  wrong_answer,
  correct,
};

using FailureClass = std::variant<NlFailureClass, CodeFailureClass>;

std::string_view to_string(NlFailureClass c) noexcept;
std::string_view to_string(CodeFailureClass c) noexcept;
std::string_view to_string(const FailureClass& c) noexcept;

enum class ExtractionMethod { target_line, last_number, code_execution, none };

std::string_view to_string(ExtractionMethod m) noexcept;

struct GradeResult {
  bool correct = false;
  std::optional<ExactDecimal> extracted_value;
  FailureClass failure_class = NlFailureClass::no_number_found;
  ExtractionMethod extraction_method = ExtractionMethod::none;

  friend bool operator==(const GradeResult&, const GradeResult&) = default;
};

struct Extraction {
  std::optional<ExactDecimal> value;
  ExtractionMethod method = ExtractionMethod::none;

  friend bool operator==(const Extraction&, const Extraction&) = default;
};

/// The number on the first "The final answer is <number>" match, else the
/// last number token anywhere in the text, else nothing.
Extraction extract_final_answer(std::string_view response);

GradeResult classify_nl_response(std::string_view response, const Extraction& extraction, const ExactDecimal& gold);

/// First function definition ("def name(...):" plus its indented body),
/// dedented to column 0. Trailing blank lines are dropped.
std::optional<std::string> extract_code_function(std::string_view response);

/// Minimum deny list; callers may extend it.
const std::vector<std::string>& default_deny_list();

struct SafetyVerdict {
  bool pass = true;
  std::string token;  // offending deny-list entry when !pass

  friend bool operator==(const SafetyVerdict&, const SafetyVerdict&) = default;
};

SafetyVerdict static_safety_check(std::string_view code, std::span<const std::string> deny_list = default_deny_list());

struct ExecutionOutcome {
  enum class Status { ok, raised, no_value };

  Status status = Status::ok;
  std::optional<std::string> error_class_name;
  std::optional<std::string> returned_value_repr;

  friend bool operator==(const ExecutionOutcome&, const ExecutionOutcome&) = default;
};

GradeResult classify_execution(const ExecutionOutcome& outcome, const ExactDecimal& gold);

/// Runs extracted Python functions out of process. Implementations own their
/// worker and serialize requests.
class ExecutionAdapter {
 public:
  virtual ~ExecutionAdapter() = default;
  virtual ExecutionOutcome execute(std::string_view source, std::chrono::milliseconds timeout) = 0;
};

struct GradeOptions {
  std::chrono::milliseconds timeout{5000};
  std::vector<std::string> deny_list = default_deny_list();
};

/// Grades one record. NL formats go through answer extraction; code formats
/// through function extraction, the safety screen, and `adapter`. Throws
/// EnvironmentError for a code record when `adapter` is null, and UsageError
/// when the response or gold answer is missing or the gold is not a number.
GradeResult grade_record(const EvalRecord& record, ExecutionAdapter* adapter, const GradeOptions& options = {});

}  // namespace benchdelta
