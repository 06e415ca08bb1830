#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "benchdelta/errors.hpp"
#include "benchdelta/numload.hpp"

using namespace benchdelta;

TEST(NumLoad, ExtractIntegers) {
  using V = std::vector<std::uint64_t>;
  EXPECT_EQ(extract_integers("Ann has 3 apples and 12 pears."), (V{3, 12}));
  EXPECT_EQ(extract_integers("It costs $1,200 per month."), (V{1200}));
  EXPECT_EQ(extract_integers("0.75 of the 40 students"), (V{40}));
  EXPECT_EQ(extract_integers("3/4 of 20"), (V{20}));
  EXPECT_EQ(extract_integers("three times as many, twice"), V{});
  EXPECT_EQ(extract_integers("The temperature fell to -5 degrees"), (V{5}));
  EXPECT_EQ(extract_integers("From 3 PM to 9 PM"), (V{3, 9}));
  EXPECT_EQ(extract_integers("1,2,3"), (V{1, 2, 3}));
}

TEST(NumLoad, GammaExamples) {
  EXPECT_EQ(gamma_of("There are 10 boxes with 100 pens each."), 3.0);
  EXPECT_EQ(gamma_of("Only 0 and 1 and 1 appear"), 0.0);
  EXPECT_EQ(gamma_of("no numbers here"), 0.0);
  EXPECT_NEAR(gamma_of("He bought 25 eggs"), std::log10(25.0), 1e-15);
}

TEST(NumLoad, AppendingThousandAddsThree) {
  for (std::string t : {"", "A 7 and 13", "x 123456 y 99", "1,250 and 0.5 and 3/8"}) {
    EXPECT_EQ(gamma_of(t + " 1000"), gamma_of(t) + 3.0) << t;
  }
}

TEST(NumLoad, HugeNumeralsStayFinite) {
  const std::string big(40, '9');
  const double g = gamma_of("value " + big);
  EXPECT_NEAR(g, 40.0, 1e-9);
  EXPECT_EQ(extract_integers(big).front(), std::numeric_limits<std::uint64_t>::max());
}

TEST(NumLoad, CenteringIsZeroMean) {
  const std::vector<double> g{1.0, 2.5, 4.0, 0.0};
  const auto c = center_gammas(g);
  EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(c[1] - c[0], 1.5);
  EXPECT_THROW(center_gammas(std::vector<double>{}), UsageError);

  std::vector<NumericLoad> loads{numeric_load("10 and 100"), numeric_load("5"), numeric_load("nothing")};
  center_loads(loads);
  double sum = 0;
  for (const auto& l : loads) sum += l.gamma_centered;
  EXPECT_NEAR(sum, 0.0, 1e-12);
  EXPECT_EQ(loads[0].integers, (std::vector<std::uint64_t>{10, 100}));
}
