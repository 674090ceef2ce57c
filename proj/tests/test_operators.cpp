#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace alphamcts;

namespace {

/// One stock whose every field is `close`, plus a second series in `volume`.
MarketPanel series_panel(const std::vector<double>& close, const std::vector<double>& other = {}) {
  MarketPanel p(business_dates(close.size()), {"AAA"});
  for (std::size_t t = 0; t < close.size(); ++t) {
    const double c = close[t];
    const double v = other.empty() ? c : other[t];
    p.set_cell(t, 0, {c, c, c, c, v, c});
  }
  return p;
}

std::vector<double> run(const std::string& infix, const MarketPanel& p) {
  const auto f = support::formula(infix);
  const auto m = evaluate(f, 0, p);
  std::vector<double> out;
  for (std::size_t t = 0; t < p.days(); ++t) out.push_back(m.is_valid(t, 0) ? m.values(t, 0) : oracle::NaN);
  return out;
}

void expect_series(const std::vector<double>& got, const std::vector<double>& want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < got.size(); ++k) {
    if (std::isnan(want[k]))
      EXPECT_TRUE(std::isnan(got[k])) << "index " << k << " got " << got[k];
    else
      EXPECT_NEAR(got[k], want[k], tol) << "index " << k;
  }
}

const double N = oracle::NaN;

}  // namespace

TEST(Operators, TableHasThirtyTwoEntries) {
  EXPECT_EQ(kOperators.size(), 32u);
  for (std::size_t k = 0; k < kOperators.size(); ++k) {
    EXPECT_EQ(static_cast<std::size_t>(kOperators[k].code), k);
    EXPECT_EQ(op_from_name(kOperators[k].name), kOperators[k].code);
  }
  EXPECT_FALSE(op_from_name("Foo").has_value());
}

TEST(Operators, RollingWarmUp) {
  const auto p = series_panel({1, 2, 3, 4, 5});
  expect_series(run("Ma(close,3)", p), {N, N, 2, 3, 4});
  expect_series(run("Sum(close,2)", p), {N, 3, 5, 7, 9});
  expect_series(run("Delay(close,2)", p), {N, N, 1, 2, 3});
  expect_series(run("Diff(close,1)", p), {N, 1, 1, 1, 1});
  expect_series(run("Pct(close,1)", p), {N, 1.0, 0.5, 1.0 / 3.0, 0.25});
  expect_series(run("Max(close,2)", p), {N, 2, 3, 4, 5});
  expect_series(run("Min(close,2)", p), {N, 1, 2, 3, 4});
}

TEST(Operators, PopulationMoments) {
  const auto p = series_panel({1, 2, 3, 4});
  expect_series(run("Std(close,3)", p), {N, N, std::sqrt(2.0 / 3.0), std::sqrt(2.0 / 3.0)});
  expect_series(run("Zscore(close,4)", p), {N, N, N, 1.5 / std::sqrt(1.25)});
  expect_series(run("Kurt(close,4)", p), {N, N, N, 2.5625 / (1.25 * 1.25) - 3.0});
  expect_series(run("Skew(close,3)", p), {N, N, 0.0, 0.0});
  expect_series(run("Vari(close,3)", p), {N, N, std::sqrt(2.0 / 3.0) / 2.0, std::sqrt(2.0 / 3.0) / 3.0});
}

TEST(Operators, MedianAndRank) {
  const auto p = series_panel({5, 1, 3, 4, 3});
  expect_series(run("Med(close,3)", p), {N, N, 3, 3, 3});
  expect_series(run("Med(close,4)", p), {N, N, N, 3.5, 3});
  // Last element's average rank in the window, scaled to [0, 1].
  expect_series(run("Rank(close,3)", p), {N, N, 0.5, 1.0, 0.25});
  expect_series(run("Rank(close,4)", p), {N, N, N, 2.0 / 3.0, 0.5});
}

TEST(Operators, ConstantWindow) {
  const auto p = series_panel({7, 7, 7, 7});
  expect_series(run("Std(close,3)", p), {N, N, 0, 0});
  expect_series(run("Zscore(close,3)", p), {N, N, N, N});
  expect_series(run("Skew(close,3)", p), {N, N, N, N});
  expect_series(run("Rank(close,3)", p), {N, N, 0.5, 0.5});
}

TEST(Operators, Autocorr) {
  const std::vector<double> x{1, 3, 2, 5, 4, 6};
  const auto p = series_panel(x);
  const auto got = run("Autocorr(close,5,1)", p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i < 4) {
      EXPECT_TRUE(std::isnan(got[i]));
      continue;
    }
    std::vector<double> now, then;
    for (std::size_t j = i - 3; j <= i; ++j) {
      now.push_back(x[j]);
      then.push_back(x[j - 1]);
    }
    EXPECT_NEAR(got[i], oracle::pearson(now, then), 1e-12);
  }
  // lag + 2 > window: undefined everywhere.
  for (double v : run("Autocorr(close,3,2)", p)) EXPECT_TRUE(std::isnan(v));
}

TEST(Operators, ElementwiseDomain) {
  const auto p = series_panel({1, 2, 4}, {0, 2, 8});
  expect_series(run("Div(close,volume)", p), {N, 1, 0.5});
  expect_series(run("Inv(volume)", p), {N, 0.5, 0.125});
  expect_series(run("Log(volume)", p), {N, std::log(2.0), std::log(8.0)});
  expect_series(run("Greater(close,volume)", p), {1, 0, 0});
  expect_series(run("Less(close,volume)", p), {0, 0, 1});
  expect_series(run("Sign(Sub(close,volume))", p), {1, 0, -1});
}

TEST(Operators, CovCorr) {
  const auto p = series_panel({1, 2, 3, 5}, {2, 4, 6, 9});
  const auto cov = run("Cov(close,volume,3)", p);
  const auto corr = run("Corr(close,volume,3)", p);
  EXPECT_NEAR(cov[2], 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(corr[2], 1.0, 1e-12);
  EXPECT_NEAR(corr[3], oracle::pearson({2, 3, 5}, {4, 6, 9}), 1e-12);
}

TEST(Operators, MissingCellsBlockWindows) {
  auto p = series_panel({1, 2, 3, 4, 5, 6});
  p.mask_cell(2, 0);
  expect_series(run("Ma(close,2)", p), {N, 1.5, N, N, 4.5, 5.5});
  expect_series(run("Delay(close,1)", p), {N, 1, N, N, 4, 5});
}

// Every operator against the naive per-window oracle, with missing cells.
TEST(Operators, MatchOracleWithMissingCells) {
  const auto panel = support::random_panel(45, 6, 21, 0.05);
  const auto close_x = [&](std::size_t i) {
    std::vector<double> v(panel.days());
    for (std::size_t t = 0; t < panel.days(); ++t)
      v[t] = panel.is_missing(t, i) ? oracle::NaN : panel.value(Feature::close, t, i);
    return v;
  };
  const auto vwap_x = [&](std::size_t i) {
    std::vector<double> v(panel.days());
    for (std::size_t t = 0; t < panel.days(); ++t)
      v[t] = panel.is_missing(t, i) ? oracle::NaN : panel.value(Feature::vwap, t, i);
    return v;
  };
  for (const auto& info : kOperators) {
    ExprNode node;
    std::vector<ExprNode> kids{leaf(Feature::close)};
    if (info.arity == 2) kids.push_back(leaf(Feature::vwap));
    std::vector<std::string> params;
    ArgumentSet args;
    if (info.param_count >= 1) {
      params.push_back("w");
      args["w"] = 6;
    }
    if (info.param_count == 2) {
      params.push_back("lag");
      args["lag"] = 2;
    }
    node = apply(info.code, kids, params);
    const auto m = evaluate(node, args, panel);
    for (std::size_t i = 0; i < panel.stocks(); ++i) {
      const auto x = close_x(i), y = vwap_x(i);
      for (std::size_t t = 0; t < panel.days(); ++t) {
        const double want = panel.is_missing(t, i) ? oracle::NaN : oracle::op_at(info.code, x, y, t, 6, 2);
        if (!std::isfinite(want)) {
          EXPECT_FALSE(m.is_valid(t, i)) << info.name << " t=" << t << " i=" << i;
        } else {
          ASSERT_TRUE(m.is_valid(t, i)) << info.name << " t=" << t << " i=" << i;
          EXPECT_NEAR(m.values(t, i), want, 1e-9 * std::max(1.0, std::abs(want))) << info.name;
        }
      }
    }
  }
}

TEST(Engine, EvaluateBestPicksHighestScore) {
  const auto panel = support::random_panel(20, 4, 2);
  auto f = support::formula("Ma(close-vwap,3)");
  ASSERT_EQ(f.param_names.size(), 1u);
  const auto name = f.param_names[0];
  f.argument_sets = {{{name, 3}}, {{name, 9}}, {{name, 5}}};
  const auto best = evaluate_best(f, panel, [&](const AlphaMatrix& m) {
    for (std::size_t t = 0; t < m.rows(); ++t)
      if (m.is_valid(t, 0)) return static_cast<double>(t);  // longer warm-up scores higher
    return oracle::NaN;
  });
  EXPECT_EQ(best.index, 1u);
  EXPECT_THROW(evaluate_best(f, panel, [](const AlphaMatrix&) -> double { throw UndefinedMetric("x"); }),
               NoValidConfiguration);
}

TEST(Engine, PairwiseCorrelationOfMonotoneCopy) {
  const auto panel = support::random_panel(30, 10, 5);
  const auto a = evaluate(support::formula("Ma(close,5)/Ma(vwap,3)"), 0, panel);
  auto b = a;
  for (std::size_t t = 0; t < b.rows(); ++t)
    for (std::size_t i = 0; i < b.cols(); ++i)
      if (b.is_valid(t, i)) b.set(t, i, 2.0 * b.values(t, i) + 1.0);
  EXPECT_NEAR(pairwise_alpha_correlation(a, b), 1.0, 1e-12);
}
