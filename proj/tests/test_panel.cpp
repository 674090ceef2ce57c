#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace alphamcts;

namespace {

const char* kHeader = "date,symbol,open,high,low,close,volume,vwap\n";

MarketPanel parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return parse_panel(in);
}

}  // namespace

TEST(Panel, ParsesCompleteGrid) {
  const auto p = parse(
      "2024-01-02,AAA,10,11,9,10.5,1000,10.2\n"
      "2024-01-02,BBB,20,21,19,20.5,2000,20.2\n"
      "2024-01-03,AAA,10.5,12,10,11.5,1500,11.0\n"
      "2024-01-03,BBB,20.5,22,20,21.5,2500,21.0\n");
  ASSERT_EQ(p.days(), 2u);
  ASSERT_EQ(p.stocks(), 2u);
  EXPECT_EQ(p.dates()[0], "2024-01-02");
  EXPECT_EQ(p.symbols()[1], "BBB");
  EXPECT_DOUBLE_EQ(p.value(Feature::close, 1, 0), 11.5);
  EXPECT_DOUBLE_EQ(p.value(Feature::vwap, 0, 1), 20.2);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_FALSE(p.is_missing(t, i));
}

TEST(Panel, AbsentRowAndEmptyFieldAreMissing) {
  const auto p = parse(
      "2024-01-02,AAA,10,11,9,10.5,1000,10.2\n"
      "2024-01-02,BBB,20,21,19,20.5,2000,20.2\n"
      "2024-01-03,AAA,10.5,12,10,11.5,,11.0\n");
  EXPECT_FALSE(p.is_missing(0, 0));
  EXPECT_TRUE(p.is_missing(1, 0));
  EXPECT_TRUE(p.is_missing(1, 1));
}

TEST(Panel, RowOrderDoesNotMatter) {
  const auto a = parse(
      "2024-01-02,AAA,10,11,9,10.5,1000,10.2\n"
      "2024-01-03,BBB,20.5,22,20,21.5,2500,21.0\n");
  const auto b = parse(
      "2024-01-03,BBB,20.5,22,20,21.5,2500,21.0\n"
      "2024-01-02,AAA,10,11,9,10.5,1000,10.2\n");
  ASSERT_EQ(a.dates(), b.dates());
  ASSERT_EQ(a.symbols(), b.symbols());
  EXPECT_DOUBLE_EQ(a.value(Feature::close, 1, 1), b.value(Feature::close, 1, 1));
}

TEST(Panel, BadValueReportsLine) {
  try {
    parse("2024-01-02,AAA,10,11,9,10.5,1000,10.2\n2024-01-02,BBB,20,21,19,20.5,abc,20.2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("volume"), std::string::npos);
  }
}

TEST(Panel, RejectsMalformedInput) {
  EXPECT_THROW(parse("2024-01-02,AAA,10,11,9,-1,1000,10.2\n"), ParseError);
  EXPECT_THROW(parse("2024-01-02,AAA,10,11,9,10,1000\n"), ParseError);
  EXPECT_THROW(parse("02/01/2024,AAA,10,11,9,10,1000,10\n"), ParseError);
  std::istringstream missing_col("date,symbol,open,high,low,close,volume\n");
  EXPECT_THROW(parse_panel(missing_col), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(parse_panel(empty), ParseError);
}

TEST(Panel, DuplicateRowIsConflict) {
  try {
    parse("2024-01-02,AAA,10,11,9,10.5,1000,10.2\n2024-01-02,AAA,10,11,9,10.5,1000,10.2\n");
    FAIL() << "expected ConflictError";
  } catch (const ConflictError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Panel, ZeroVolumeAllowed) {
  const auto p = parse("2024-01-02,AAA,10,11,9,10.5,0,10.2\n");
  EXPECT_DOUBLE_EQ(p.value(Feature::volume, 0, 0), 0.0);
}

TEST(Panel, WriteThenParseRoundTrips) {
  const auto p = support::random_panel(12, 5, 3, 0.1);
  std::stringstream s;
  write_panel(p, s);
  const auto q = parse_panel(s);
  ASSERT_EQ(q.days(), p.days());
  ASSERT_EQ(q.stocks(), p.stocks());
  for (std::size_t t = 0; t < p.days(); ++t)
    for (std::size_t i = 0; i < p.stocks(); ++i) {
      ASSERT_EQ(p.is_missing(t, i), q.is_missing(t, i));
      if (!p.is_missing(t, i))
        for (auto f : kAllFeatures) EXPECT_DOUBLE_EQ(p.value(f, t, i), q.value(f, t, i));
    }
}

TEST(ForwardReturns, SimpleRatio) {
  const auto p = parse(
      "2024-01-02,AAA,10,11,9,100,1000,10\n"
      "2024-01-03,AAA,10,11,9,110,1000,10\n"
      "2024-01-04,AAA,10,11,9,99,1000,10\n");
  const auto r = forward_returns(p, 1);
  EXPECT_NEAR(r.values(0, 0), 0.10, 1e-12);
  EXPECT_NEAR(r.values(1, 0), -0.10, 1e-12);
  EXPECT_FALSE(r.is_valid(2, 0));
  const auto r2 = forward_returns(p, 2);
  EXPECT_NEAR(r2.values(0, 0), -0.01, 1e-12);
  EXPECT_FALSE(r2.is_valid(1, 0));
}

TEST(ForwardReturns, MatchesLoopOracle) {
  const auto p = support::random_panel(30, 6, 9, 0.15);
  for (int w : {1, 3, 7}) {
    const auto r = forward_returns(p, w);
    for (std::size_t t = 0; t < p.days(); ++t)
      for (std::size_t i = 0; i < p.stocks(); ++i) {
        const std::size_t u = t + static_cast<std::size_t>(w);
        const bool ok = u < p.days() && !p.is_missing(t, i) && !p.is_missing(u, i);
        ASSERT_EQ(r.is_valid(t, i), ok);
        if (ok) EXPECT_DOUBLE_EQ(r.values(t, i), p.value(Feature::close, u, i) / p.value(Feature::close, t, i) - 1.0);
      }
  }
}

TEST(ForwardReturns, HorizonOutsideRangeThrows) {
  const auto p = support::random_panel(5, 2, 1);
  EXPECT_THROW(forward_returns(p, 0), InvalidHorizon);
  EXPECT_THROW(forward_returns(p, 5), InvalidHorizon);
}

TEST(CrossSectionalRank, SmallCases) {
  RealGrid v(1, 3);
  MaskGrid ok(1, 3, 1);
  v(0, 0) = 3;
  v(0, 1) = 1;
  v(0, 2) = 2;
  auto r = cross_sectional_rank(v, ok);
  EXPECT_DOUBLE_EQ(r.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.values(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r.values(0, 2), 0.5);

  v(0, 0) = v(0, 1) = 5;
  ok(0, 2) = 0;
  r = cross_sectional_rank(v, ok);
  EXPECT_DOUBLE_EQ(r.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.values(0, 1), 0.5);
  EXPECT_FALSE(r.is_valid(0, 2));
}

TEST(CrossSectionalRank, MatchesCountingOracle) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = support::random_grid(4, 2 + gen() % 20, gen, 0.2);
    // Ties on purpose.
    for (std::size_t t = 0; t < g.rows(); ++t)
      for (std::size_t i = 0; i < g.cols(); ++i)
        if (g.is_valid(t, i)) g.set(t, i, std::round(g.values(t, i) * 2.0));
    const auto r = cross_sectional_rank(g);
    for (std::size_t t = 0; t < g.rows(); ++t) {
      std::vector<double> day;
      std::vector<std::size_t> cols;
      for (std::size_t i = 0; i < g.cols(); ++i)
        if (g.is_valid(t, i)) {
          day.push_back(g.values(t, i));
          cols.push_back(i);
        }
      if (day.size() < 2) continue;
      const auto ranks = oracle::ranks(day);
      for (std::size_t k = 0; k < day.size(); ++k)
        EXPECT_NEAR(r.values(t, cols[k]), (ranks[k] - 1.0) / static_cast<double>(day.size() - 1), 1e-12);
      for (std::size_t i = 0; i < g.cols(); ++i) EXPECT_EQ(r.is_valid(t, i), g.is_valid(t, i));
    }
  }
}

TEST(Synthetic, DeterministicAndValid) {
  SyntheticSpec s;
  s.days = 40;
  s.stocks = 8;
  s.seed = 4;
  const auto a = synthetic_panel(s);
  const auto b = synthetic_panel(s);
  ASSERT_EQ(a.days(), 40u);
  ASSERT_EQ(a.stocks(), 8u);
  EXPECT_NO_THROW(a.check_invariants());
  for (std::size_t t = 0; t < a.days(); ++t)
    for (std::size_t i = 0; i < a.stocks(); ++i)
      for (auto f : kAllFeatures) EXPECT_EQ(a.value(f, t, i), b.value(f, t, i));
}
