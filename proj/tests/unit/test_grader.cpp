#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "benchdelta/errors.hpp"
#include "benchdelta/exec_adapter.hpp"
#include "benchdelta/grader.hpp"

using namespace benchdelta;

namespace {

ExactDecimal dec(std::string_view s) { return *ExactDecimal::parse(s); }

GradeResult grade_nl(std::string response, std::string gold) {
  EvalRecord r;
  r.model = "m";
  r.prompt_format = PromptFormat::gsm;
  r.response_text = std::move(response);
  r.gold_answer = std::move(gold);
  return grade_record(r, nullptr);
}

class FakeAdapter : public ExecutionAdapter {
 public:
  explicit FakeAdapter(ExecutionOutcome o) : outcome_(std::move(o)) {}
  ExecutionOutcome execute(std::string_view source, std::chrono::milliseconds) override {
    last_source = std::string(source);
    ++calls;
    return outcome_;
  }
  std::string last_source;
  int calls = 0;

 private:
  ExecutionOutcome outcome_;
};

EvalRecord code_record(std::string response, std::string gold = "8") {
  EvalRecord r;
  r.model = "m";
  r.prompt_format = PromptFormat::simple_code;
  r.response_text = std::move(response);
  r.gold_answer = std::move(gold);
  return r;
}

const char* kFunction = "```python\ndef solution():\n    a = 5\n    return a + 3\n```\n";

}  // namespace

TEST(Extraction, TargetLineWins) {
  const auto e = extract_final_answer("So 4 + 4 = 8.\nThe final answer is 8\nQ: next 99");
  EXPECT_EQ(e.method, ExtractionMethod::target_line);
  EXPECT_EQ(*e.value, dec("8"));
}

TEST(Extraction, FirstMatchingTargetLine) {
  const auto e = extract_final_answer("The final answer is 12.\nThe final answer is 13.");
  EXPECT_EQ(*e.value, dec("12"));
}

TEST(Extraction, TargetPhraseWithoutNumberFallsBack) {
  const auto e = extract_final_answer(
      "71 blocks + 47 stuffed animals + 30 multicolored rings = 158. Valeria has 238 toys in total. 158 - 238 = -80. "
      "This is not possible. The final answer is that there is an error in the problem statement.");
  EXPECT_EQ(e.method, ExtractionMethod::last_number);
  EXPECT_EQ(*e.value, dec("-80"));
}

TEST(Extraction, CurrencyAndCommas) {
  EXPECT_EQ(*extract_final_answer("The final answer is $1,234.50").value, dec("1234.5"));
  EXPECT_EQ(*extract_final_answer("The final answer is -$7.").value, dec("-7"));
  EXPECT_EQ(extract_final_answer("no digits at all").method, ExtractionMethod::none);
}

TEST(NlTaxonomy, Classes) {
  EXPECT_EQ(grade_nl("", "5").failure_class, FailureClass{NlFailureClass::empty_response});
  EXPECT_EQ(grade_nl("   Q:", "5").failure_class, FailureClass{NlFailureClass::empty_after_trimming});
  EXPECT_EQ(grade_nl(" \n\t ", "5").failure_class, FailureClass{NlFailureClass::empty_after_trimming});
  EXPECT_EQ(grade_nl("I cannot say.", "5").failure_class, FailureClass{NlFailureClass::no_number_found});
  EXPECT_EQ(grade_nl("so it is 6", "5").failure_class, FailureClass{NlFailureClass::wrong_answer_last_number});
  EXPECT_EQ(grade_nl("The final answer is 6", "5").failure_class, FailureClass{NlFailureClass::wrong_answer});
  const auto ok = grade_nl("The final answer is 5.00", "5");
  EXPECT_TRUE(ok.correct);
  EXPECT_EQ(ok.failure_class, FailureClass{NlFailureClass::correct});
}

TEST(CodeExtraction, FunctionBodyDedented) {
  const auto f = extract_code_function("Here you go:\n  def f(x=1):\n      y = x\n\n      return y\n  print(f())\n");
  ASSERT_TRUE(f);
  EXPECT_EQ(*f, "def f(x=1):\n    y = x\n\n    return y");
  EXPECT_FALSE(extract_code_function("return 5"));
}

TEST(CodeTaxonomy, SafetyAndNoFunction) {
  FakeAdapter adapter({ExecutionOutcome::Status::ok, std::nullopt, "8"});
  EXPECT_EQ(grade_record(code_record("x = 8"), &adapter).failure_class, FailureClass{CodeFailureClass::no_function});
  EXPECT_EQ(grade_record(code_record("def f():\n    return eval('8')\n"), &adapter).failure_class,
            FailureClass{CodeFailureClass::forbidden_string});
  EXPECT_EQ(adapter.calls, 0);
  const auto g = grade_record(code_record(kFunction), &adapter);
  EXPECT_TRUE(g.correct);
  EXPECT_EQ(g.extraction_method, ExtractionMethod::code_execution);
  EXPECT_EQ(adapter.last_source, "def solution():\n    a = 5\n    return a + 3");
}

TEST(CodeTaxonomy, ExecutionOutcomes) {
  using S = ExecutionOutcome::Status;
  const std::map<std::string, CodeFailureClass> raised = {
      {"SyntaxError", CodeFailureClass::syntax_error},       {"IndentationError", CodeFailureClass::syntax_error},
      {"NameError", CodeFailureClass::name_error},           {"TypeError", CodeFailureClass::type_value_error},
      {"ValueError", CodeFailureClass::type_value_error},    {"ZeroDivisionError", CodeFailureClass::zero_division_error},
      {"AttributeError", CodeFailureClass::attribute_error}, {"OverflowError", CodeFailureClass::unclassified},
      {"KeyError", CodeFailureClass::unclassified},          {"TimeoutError", CodeFailureClass::unclassified}};
  for (const auto& [name, klass] : raised) {
    EXPECT_EQ(classify_execution({S::raised, name, std::nullopt}, dec("8")).failure_class, FailureClass{klass})
        << name;
  }
  EXPECT_EQ(classify_execution({S::no_value, std::nullopt, std::nullopt}, dec("8")).failure_class,
            FailureClass{CodeFailureClass::none_returned});
  EXPECT_EQ(classify_execution({S::ok, std::nullopt, "None"}, dec("8")).failure_class,
            FailureClass{CodeFailureClass::none_returned});
  EXPECT_EQ(classify_execution({S::ok, std::nullopt, "'eight'"}, dec("8")).failure_class,
            FailureClass{CodeFailureClass::not_a_number});
  EXPECT_EQ(classify_execution({S::ok, std::nullopt, "9"}, dec("8")).failure_class,
            FailureClass{CodeFailureClass::wrong_answer});
  EXPECT_TRUE(classify_execution({S::ok, std::nullopt, "8.0"}, dec("8")).correct);
}

TEST(Grading, PreconditionErrors) {
  EXPECT_THROW(grade_record(code_record(kFunction), nullptr), EnvironmentError);
  EvalRecord r;
  r.prompt_format = PromptFormat::gsm;
  r.response_text = "5";
  EXPECT_THROW(grade_record(r, nullptr), UsageError);
  r.gold_answer = "five";
  EXPECT_THROW(grade_record(r, nullptr), UsageError);
}

TEST(ExecProtocol, EncodeDecode) {
  const auto req = encode_execution_request("def f():\n    return \"x\"", std::chrono::milliseconds{250});
  EXPECT_NE(req.find("\"timeout_ms\":250"), std::string::npos);
  EXPECT_EQ(req.find('\n'), std::string::npos);
  const auto ok = decode_execution_response(R"({"status":"ok","error_class":null,"value":"8"})");
  EXPECT_EQ(ok.status, ExecutionOutcome::Status::ok);
  EXPECT_EQ(*ok.returned_value_repr, "8");
  EXPECT_THROW(decode_execution_response("not json"), DataError);
  EXPECT_THROW(decode_execution_response(R"({"status":"raised"})"), DataError);
  EXPECT_THROW(decode_execution_response(R"({"status":"weird"})"), DataError);
}

class PythonWorker : public ::testing::Test {
 protected:
  void SetUp() override {
    if (std::string(BENCHDELTA_TEST_WORKER).empty()) GTEST_SKIP() << "python3 not available";
    adapter = std::make_unique<SubprocessExecutionAdapter>(BENCHDELTA_TEST_WORKER, std::chrono::milliseconds{2000});
  }
  GradeResult grade(std::string response, std::string gold = "8") {
    GradeOptions opts;
    opts.timeout = std::chrono::milliseconds{1000};
    return grade_record(code_record(std::move(response), std::move(gold)), adapter.get(), opts);
  }
  std::unique_ptr<SubprocessExecutionAdapter> adapter;
};

TEST_F(PythonWorker, RealExecutionTaxonomy) {
  EXPECT_TRUE(grade(kFunction).correct);
  EXPECT_EQ(grade("def f():\n    return 1/0\n").failure_class, FailureClass{CodeFailureClass::zero_division_error});
  EXPECT_EQ(grade("def f():\n    return undefined_name\n").failure_class,
            FailureClass{CodeFailureClass::name_error});
  EXPECT_EQ(grade("def f():\n    x = (\n").failure_class, FailureClass{CodeFailureClass::syntax_error});
  EXPECT_EQ(grade("def f():\n    x = 3\n").failure_class, FailureClass{CodeFailureClass::none_returned});
  EXPECT_EQ(grade("def f():\n    return 'eight'\n").failure_class, FailureClass{CodeFailureClass::not_a_number});
  EXPECT_EQ(grade("def f():\n    return 10.0 ** 400\n").failure_class, FailureClass{CodeFailureClass::unclassified});
  EXPECT_EQ(grade("def f():\n    return {}['k']\n").failure_class, FailureClass{CodeFailureClass::unclassified});
  EXPECT_EQ(grade("def f():\n    return None.x\n").failure_class, FailureClass{CodeFailureClass::attribute_error});
  EXPECT_EQ(grade("def f():\n    return int('x')\n").failure_class,
            FailureClass{CodeFailureClass::type_value_error});
}

TEST_F(PythonWorker, TimeoutIsUnclassifiedAndWorkerRecovers) {
  EXPECT_EQ(grade("def f():\n    while True:\n        pass\n").failure_class,
            FailureClass{CodeFailureClass::unclassified});
  EXPECT_TRUE(grade(kFunction).correct);
}

TEST(ExecAdapter, DeadWorkerIsEnvironmentError) {
  SubprocessExecutionAdapter adapter("exit 0");
  EXPECT_THROW(adapter.execute("def f():\n    return 1", std::chrono::milliseconds{500}), EnvironmentError);
}

TEST(Extraction, ErrorStatementFallsBackToLastNumber) {
  const auto e = extract_final_answer(
      "71 blocks + 47 = 118. The final answer is that there is an error in the problem statement.");
  EXPECT_EQ(e.method, ExtractionMethod::last_number);
  EXPECT_EQ(*e.value, dec("118"));
  EXPECT_EQ(extract_final_answer("").method, ExtractionMethod::none);
  EXPECT_EQ(extract_final_answer("...step 3. The final answer is 72.").method, ExtractionMethod::target_line);
}

TEST(CodeExtraction, FirstOfTwoDefinitions) {
  const auto f = extract_code_function("def a():\n    return 1\n\ndef b():\n    return 2\n");
  ASSERT_TRUE(f);
  EXPECT_EQ(*f, "def a():\n    return 1");
}

TEST(Safety, DenyList) {
  EXPECT_EQ(static_safety_check("def f():\n    return eval('1')"), (SafetyVerdict{false, "eval("}));
  EXPECT_EQ(static_safety_check("def f():\n    import os"), (SafetyVerdict{false, "import os"}));
  EXPECT_TRUE(static_safety_check("def f():\n    return 1").pass);
  for (const char* token : {"open(", "eval(", "exec(", "import os", "import sys", "subprocess", "__import__"}) {
    EXPECT_NE(std::find(default_deny_list().begin(), default_deny_list().end(), token), default_deny_list().end())
        << token;
  }
}

TEST(Grading, DeterministicAcrossRuns) {
  const std::vector<std::string> responses{"", "   Q: ", "The final answer is 8", "it was 9", "no idea"};
  std::vector<GradeResult> first;
  for (const auto& r : responses) first.push_back(grade_nl(r, "8"));
  for (int run = 0; run < 2; ++run) {
    for (std::size_t i = 0; i < responses.size(); ++i) EXPECT_EQ(grade_nl(responses[i], "8"), first[i]);
  }
}
