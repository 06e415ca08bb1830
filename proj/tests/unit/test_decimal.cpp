#include <gtest/gtest.h>

#include "benchdelta/decimal.hpp"

using benchdelta::ExactDecimal;

namespace {

std::string canon(std::string_view s) {
  auto d = ExactDecimal::parse(s);
  return d ? d->str() : "<none>";
}

}  // namespace

TEST(ExactDecimal, CanonicalForms) {
  EXPECT_EQ(canon("42"), "42");
  EXPECT_EQ(canon("042"), "42");
  EXPECT_EQ(canon("18.0"), "18");
  EXPECT_EQ(canon("18."), "18");
  EXPECT_EQ(canon("1,200"), "1200");
  EXPECT_EQ(canon("$1,200.50"), "1200.5");
  EXPECT_EQ(canon("-$5"), "-5");
  EXPECT_EQ(canon("$-5"), "-5");
  EXPECT_EQ(canon("-0"), "0");
  EXPECT_EQ(canon("-0.000"), "0");
  EXPECT_EQ(canon(".5"), "0.5");
  EXPECT_EQ(canon("1e+20"), "100000000000000000000");
  EXPECT_EQ(canon("2.5e-3"), "0.0025");
}

TEST(ExactDecimal, RejectsNonNumbers) {
  EXPECT_FALSE(ExactDecimal::parse(""));
  EXPECT_FALSE(ExactDecimal::parse("abc"));
  EXPECT_FALSE(ExactDecimal::parse("None"));
  EXPECT_FALSE(ExactDecimal::parse("'18'"));
  EXPECT_FALSE(ExactDecimal::parse("True"));
  EXPECT_FALSE(ExactDecimal::parse("inf"));
  EXPECT_FALSE(ExactDecimal::parse("1..2"));
}

TEST(ExactDecimal, EqualityIsNumeric) {
  EXPECT_EQ(*ExactDecimal::parse("18.00"), *ExactDecimal::parse("18"));
  EXPECT_NE(*ExactDecimal::parse("18.01"), *ExactDecimal::parse("18"));
  EXPECT_TRUE(ExactDecimal::parse("18.0")->is_integer());
  EXPECT_FALSE(ExactDecimal::parse("18.5")->is_integer());
  EXPECT_DOUBLE_EQ(ExactDecimal::parse("-2.25")->to_double(), -2.25);
}

TEST(ExactDecimal, LongValuesStayExact) {
  const auto a = ExactDecimal::parse("123456789012345678901234567890");
  const auto b = ExactDecimal::parse("123456789012345678901234567891");
  ASSERT_TRUE(a && b);
  EXPECT_NE(*a, *b);
}
