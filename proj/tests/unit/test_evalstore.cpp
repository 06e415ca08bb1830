#include <gtest/gtest.h>

#include <sstream>

#include "benchdelta/csv.hpp"
#include "benchdelta/errors.hpp"
#include "benchdelta/evalstore.hpp"

using namespace benchdelta;

namespace {

EvalRecord rec(std::string model, PromptFormat f, std::int64_t tid, bool variant, std::optional<bool> correct) {
  EvalRecord r;
  r.model = std::move(model);
  r.prompt_format = f;
  r.template_id = tid;
  r.is_variant = variant;
  r.question_text = "Q " + std::to_string(tid);
  r.correct = correct;
  return r;
}

std::vector<EvalRecord> sample() {
  std::vector<EvalRecord> v;
  auto a = rec("m1", PromptFormat::gsm, 1, false, true);
  a.question_text = "Ann has 3, apples\nand \"quotes\"";
  a.response_text = "";
  a.gold_answer = "3";
  v.push_back(a);
  auto b = rec("m1", PromptFormat::gsm, 1, true, std::nullopt);
  b.response_text = "The final answer is 4";
  b.gold_answer = "4";
  v.push_back(b);
  v.push_back(rec("m2", PromptFormat::simple_code, 2, false, false));
  return v;
}

}  // namespace

TEST(EvalStore, JsonlRoundTrip) {
  std::stringstream ss;
  write_records(ss, sample(), FileFormat::jsonl);
  const auto ds = read_records(ss, FileFormat::jsonl);
  EXPECT_EQ(ds.records, sample());
}

TEST(EvalStore, CsvRoundTripKeepsNullVersusEmpty) {
  std::stringstream ss;
  write_records(ss, sample(), FileFormat::csv);
  const auto ds = read_records(ss, FileFormat::csv);
  ASSERT_EQ(ds.records.size(), 3u);
  EXPECT_EQ(ds.records, sample());
  ASSERT_TRUE(ds.records[0].response_text.has_value());
  EXPECT_EQ(*ds.records[0].response_text, "");
  EXPECT_FALSE(ds.records[2].response_text.has_value());
}

TEST(EvalStore, CsvHandlesCrlfAndReorderedColumns) {
  std::stringstream ss("is_variant,template_id,model,prompt_format,correct\r\nfalse,3,m,gsm,1\r\ntrue,3,m,gsm,0\r\n");
  const auto ds = read_records(ss, FileFormat::csv);
  ASSERT_EQ(ds.records.size(), 2u);
  EXPECT_EQ(ds.records[0].template_id, 3);
  EXPECT_TRUE(*ds.records[0].correct);
  EXPECT_FALSE(*ds.records[1].correct);
  EXPECT_TRUE(ds.records[1].is_variant);
}

TEST(EvalStore, ErrorsNameLineAndField) {
  std::stringstream ss(
      "{\"model\":\"m\",\"prompt_format\":\"gsm\",\"template_id\":1,\"is_variant\":false}\n"
      "{\"model\":\"m\",\"prompt_format\":\"bogus\",\"template_id\":1,\"is_variant\":true}\n");
  try {
    read_records(ss, FileFormat::jsonl);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "prompt_format");
  }
}

TEST(EvalStore, DuplicateBaseRejected) {
  std::stringstream ss;
  auto v = sample();
  v.push_back(v[0]);
  write_records(ss, v, FileFormat::jsonl);
  EXPECT_THROW(read_records(ss, FileFormat::jsonl), DataError);
}

TEST(EvalStore, UnknownCsvColumnRejected) {
  std::stringstream ss("model,prompt_format,template_id,is_variant,extra\nm,gsm,1,false,x\n");
  EXPECT_THROW(read_records(ss, FileFormat::csv), DataError);
}

TEST(EvalStore, CellsAndGroups) {
  Dataset ds;
  ds.records = sample();
  const auto cells = ds.split_cells();
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells.begin()->second.records.size(), 2u);
  const auto counts = ds.counts_per_run();
  EXPECT_EQ(counts.at(RunKey{"m1", PromptFormat::gsm}), 2u);
  const auto hist = ds.group_size_histogram();
  EXPECT_EQ(hist.at(2), 1u);
  EXPECT_EQ(hist.at(1), 1u);
}

TEST(EvalStore, ValidationReportsWithoutRejecting) {
  Dataset ds;
  ds.records = sample();
  ds.records.push_back(rec("m2", PromptFormat::gsm, 9, true, true));
  ds.records.back().question_text.clear();
  const Dataset before = ds;
  const auto report = validate_dataset(ds);
  EXPECT_EQ(ds, before);
  EXPECT_FALSE(report.ok());
  EXPECT_EQ(report.count(IssueKind::missing_correctness), 1u);
  EXPECT_EQ(report.count(IssueKind::missing_base), 1u);
  EXPECT_EQ(report.count(IssueKind::empty_question), 1u);
}

TEST(Csv, QuotedFieldsWithNewlines) {
  std::stringstream ss("a,\"b,c\",\"d\"\"e\nf\"\n,\"\"\n");
  csv::Reader reader(ss);
  auto r1 = reader.next();
  ASSERT_TRUE(r1);
  ASSERT_EQ(r1->fields.size(), 3u);
  EXPECT_EQ(r1->fields[1], "b,c");
  EXPECT_EQ(r1->fields[2], "d\"e\nf");
  auto r2 = reader.next();
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->line, 3u);
  EXPECT_FALSE(r2->quoted[0]);
  EXPECT_TRUE(r2->quoted[1]);
  EXPECT_FALSE(reader.next());
}

TEST(Csv, UnterminatedQuoteThrows) {
  std::stringstream ss("a,\"never closed\n");
  csv::Reader reader(ss);
  EXPECT_THROW(reader.next(), DataError);
}
