#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace alphamcts;

namespace {

MaskedGrid grid(const std::vector<std::vector<double>>& rows) {
  MaskedGrid g(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < rows[t].size(); ++i) g.set(t, i, rows[t][i]);
  return g;
}

}  // namespace

TEST(Metrics, IcMatchesOracle) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t T = 5 + gen() % 20, n = 3 + gen() % 15;
    const auto a = support::random_grid(T, n, gen, 0.2);
    const auto r = support::random_grid(T, n, gen, 0.2);
    try {
      EXPECT_NEAR(information_coefficient(a, r).value, oracle::ic(a, r), 1e-12);
      EXPECT_NEAR(rank_information_coefficient(a, r).value, oracle::rank_ic(a, r), 1e-12);
    } catch (const UndefinedMetric&) {
      EXPECT_TRUE(std::isnan(oracle::ic(a, r)));
    }
  }
}

TEST(Metrics, DaysWithFewerThanThreeStocksAreSkipped) {
  auto a = grid({{1, 2, 3}, {1, 2, 3}});
  auto r = grid({{1, 2, 4}, {3, 2, 1}});
  r.invalidate(1, 0);
  const auto ic = rank_information_coefficient(a, r);
  EXPECT_EQ(ic.days_used, 1u);
  EXPECT_DOUBLE_EQ(ic.value, 1.0);
  EXPECT_TRUE(std::isnan(ic.per_day[1]));
}

TEST(Metrics, ConstantCrossSectionIsUndefined) {
  const auto a = grid({{1, 1, 1}, {2, 2, 2}});
  const auto r = grid({{1, 2, 3}, {1, 2, 3}});
  EXPECT_THROW(information_coefficient(a, r), UndefinedMetric);
  EXPECT_THROW(rank_information_coefficient(a, r), UndefinedMetric);
}

TEST(Metrics, RankIcInvariantUnderMonotoneTransform) {
  std::mt19937_64 gen(3);
  const auto a = support::random_grid(30, 12, gen, 0.1);
  const auto r = support::random_grid(30, 12, gen, 0.1);
  auto b = a;
  for (std::size_t t = 0; t < b.rows(); ++t)
    for (std::size_t i = 0; i < b.cols(); ++i)
      if (b.is_valid(t, i)) b.set(t, i, std::exp(b.values(t, i)) * 5.0 - 2.0);
  EXPECT_DOUBLE_EQ(rank_information_coefficient(a, r).value, rank_information_coefficient(b, r).value);
}

TEST(Metrics, RankIr) {
  const std::vector<double> v{0.1, 0.3, oracle::NaN};
  EXPECT_NEAR(rank_ir(v), 2.0, 1e-12);
  EXPECT_THROW(rank_ir(std::vector<double>{0.1}), UndefinedMetric);
  EXPECT_THROW(rank_ir(std::vector<double>{0.2, 0.2, 0.2}), UndefinedMetric);
}

TEST(Backtest, SizesFromFraction) {
  BacktestConfig c;
  c.top_fraction = 0.1;
  c.horizon = 10;
  EXPECT_EQ(c.k(300), 30u);
  EXPECT_EQ(c.n_drop(300), 3u);
  c.horizon = 50;
  EXPECT_EQ(c.n_drop(300), 1u);
  c.top_fraction = 0.05;
  EXPECT_EQ(c.k(50), 3u);  // 2.5 rounds away from zero
}

TEST(Backtest, HandWorkedRebalance) {
  const auto signal = grid({{4, 3, 2, 1}, {1, 2, 3, 4}});
  const auto ret = grid({{0.01, 0.02, 0.03, 0.04}, {0.05, 0.06, 0.07, 0.08}});
  BacktestConfig c;
  c.top_fraction = 0.5;
  c.horizon = 1;
  c.cost_rate = 0.001;
  const auto r = simulate_topk(signal, ret, c);
  ASSERT_EQ(r.days.size(), 2u);
  EXPECT_EQ(r.k, 2u);
  EXPECT_EQ(r.n_drop, 2u);
  EXPECT_TRUE(r.days[0].initial);
  EXPECT_EQ(r.days[0].bought, 2u);
  EXPECT_NEAR(r.days[0].gross, 0.015, 1e-15);
  EXPECT_NEAR(r.days[0].net, 0.015 - 0.001, 1e-15);
  EXPECT_EQ(r.days[1].sold, 2u);
  EXPECT_EQ(r.days[1].bought, 2u);
  EXPECT_NEAR(r.days[1].gross, 0.075, 1e-15);
  EXPECT_NEAR(r.days[1].net, 0.075 - 0.002, 1e-15);
  EXPECT_NEAR(r.ar, (0.014 + 0.073) / 2.0 * 252.0, 1e-12);
  EXPECT_NEAR(r.daily_turnover, 1.5, 1e-15);
}

TEST(Backtest, DropCapLimitsTrades) {
  const auto signal = grid({{4, 3, 2, 1}, {1, 2, 3, 4}});
  const auto ret = grid({{0.01, 0.02, 0.03, 0.04}, {0.05, 0.06, 0.07, 0.08}});
  BacktestConfig c;
  c.top_fraction = 0.5;
  c.horizon = 2;
  c.cost_rate = 0.0;
  const auto r = simulate_topk(signal, ret, c);
  EXPECT_EQ(r.n_drop, 1u);
  EXPECT_EQ(r.days[1].sold, 1u);
  EXPECT_EQ(r.days[1].bought, 1u);
  // Keeps stock 1, swaps stock 0 for stock 3.
  EXPECT_NEAR(r.days[1].gross, (0.06 + 0.08) / 2.0, 1e-15);
}

TEST(Backtest, ForcedExitRefillsWithoutCap) {
  auto signal = grid({{4, 3, 2, 1}, {4, 3, 2, 1}});
  const auto ret = grid({{0.01, 0.02, 0.03, 0.04}, {0.05, 0.06, 0.07, 0.08}});
  signal.invalidate(1, 0);
  BacktestConfig c;
  c.top_fraction = 0.5;
  c.horizon = 5;
  const auto r = simulate_topk(signal, ret, c);
  EXPECT_EQ(r.days[1].forced_exits, 1u);
  EXPECT_EQ(r.days[1].bought, 1u);
  EXPECT_EQ(r.days[1].holdings, 2u);
}

TEST(Backtest, FullUniverseEqualsMarketMean) {
  std::mt19937_64 gen(9);
  const auto s = support::random_grid(20, 7, gen);
  const auto ret = support::random_grid(20, 7, gen);
  BacktestConfig c;
  c.top_fraction = 1.0;
  c.cost_rate = 0.0;
  const auto r = simulate_topk(s, ret, c);
  for (std::size_t t = 0; t < 20; ++t) {
    double m = 0;
    for (std::size_t i = 0; i < 7; ++i) m += ret.values(t, i);
    EXPECT_NEAR(r.per_period_returns[t], m / 7.0, 1e-14);
  }
}

TEST(Backtest, CostNeverHelps) {
  std::mt19937_64 gen(10);
  const auto s = support::random_grid(60, 40, gen, 0.05);
  const auto ret = support::random_grid(60, 40, gen, 0.05);
  BacktestConfig c;
  c.cost_rate = 0.0;
  const double free = simulate_topk(s, ret, c).ar;
  c.cost_rate = 0.002;
  EXPECT_LE(simulate_topk(s, ret, c).ar, free);
}

TEST(Turnover, StaticAndAlternatingRanks) {
  const auto fixed = grid({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  EXPECT_DOUBLE_EQ(alpha_daily_turnover(fixed), 0.0);
  const auto flip = grid({{1, 2}, {2, 1}, {1, 2}});
  EXPECT_DOUBLE_EQ(alpha_daily_turnover(flip), 2.0);
  const auto one_day = grid({{1, 2, 3}});
  EXPECT_THROW(alpha_daily_turnover(one_day), UndefinedMetric);
}

TEST(Turnover, WithinBounds) {
  std::mt19937_64 gen(4);
  for (int k = 0; k < 20; ++k) {
    const auto g = support::random_grid(10, 2 + gen() % 30, gen, 0.1);
    const double v = alpha_daily_turnover(g);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0 + 1e-12);
  }
}

TEST(Evaluator, ChoosesArgumentSetByRankIc) {
  const auto panel = synthetic_panel({.days = 200, .stocks = 30, .seed = 2});
  const AlphaEvaluator ev(panel, BacktestConfig{});
  auto f = support::formula("Ma(close-vwap,w)", {{{"w", 3}}, {{"w", 10}}, {{"w", 40}}});
  const auto c = ev.evaluate(f);
  double best = -1e300;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double ric = oracle::rank_ic(evaluate(f, k, panel), ev.forward());
    if (ric > best) {
      best = ric;
      best_k = k;
    }
  }
  EXPECT_EQ(c.chosen_argument_set, best_k);
  EXPECT_NEAR(c.metrics.rank_ic, best, 1e-12);
  EXPECT_TRUE(std::isfinite(c.metrics.rank_ir));
  EXPECT_TRUE(std::isfinite(c.metrics.ar));
  EXPECT_TRUE(std::isfinite(c.metrics.daily_turnover));
}
