#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bayesd/io.hpp"

using namespace bayesd::io;

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    const auto back = parse_double(format_double(v));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, v);
  }
}

TEST(FormatDouble, SpecialValues) {
  EXPECT_EQ(format_double(std::nan("")), "NaN");
  EXPECT_EQ(format_double(HUGE_VAL), "Inf");
  EXPECT_EQ(format_double(-HUGE_VAL), "-Inf");
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(FormatFixed, NoNegativeZero) {
  EXPECT_EQ(format_fixed(-0.001, 2), "0.00");
  EXPECT_EQ(format_fixed(-0.34, 2), "-0.34");
  EXPECT_EQ(format_fixed(1.005, 1), "1.0");
}

TEST(ParseDouble, AcceptsAndRejects) {
  EXPECT_EQ(*parse_double(" 1.25 "), 1.25);
  EXPECT_EQ(*parse_double("+3"), 3.0);
  EXPECT_EQ(*parse_double("-2e-3"), -2e-3);
  EXPECT_TRUE(std::isnan(*parse_double("NaN")));
  EXPECT_TRUE(std::isinf(*parse_double("-Inf")));
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_FALSE(parse_double("1.2x").has_value());
  EXPECT_FALSE(parse_double("abc").has_value());
}

TEST(Split, KeepsEmptyFields) {
  const auto f = split("a,,b,", ',');
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[2], "b");
  EXPECT_EQ(f[3], "");
  EXPECT_EQ(join(f, ","), "a,,b,");
}

TEST(ReadLine, StripsCarriageReturn) {
  std::istringstream in("x,y\r\n1,2\n");
  std::string line;
  ASSERT_TRUE(read_line(in, line));
  EXPECT_EQ(line, "x,y");
  ASSERT_TRUE(read_line(in, line));
  EXPECT_EQ(line, "1,2");
  EXPECT_FALSE(read_line(in, line));
}

TEST(Fnv1a, PublishedVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}
