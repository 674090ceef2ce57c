#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alphamcts/error.hpp"
#include "alphamcts/grid.hpp"
#include "alphamcts/panel.hpp"
#include "alphamcts/stats.hpp"

namespace alphamcts {

/// Mean daily correlation plus the per-day series (NaN on skipped days).
struct DailyCorrelation {
  double value = kNaN;
  std::vector<double> per_day;
  std::size_t days_used = 0;
};

namespace detail {

template <class DayFn>
DailyCorrelation daily_correlation(const MaskedGrid& alpha, const MaskedGrid& returns, DayFn&& day_fn,
                                   const char* what) {
  if (alpha.rows() != returns.rows() || alpha.cols() != returns.cols())
    throw Error("alpha and return matrices differ in shape");
  DailyCorrelation out;
  out.per_day.assign(alpha.rows(), kNaN);
  std::vector<double> x, y;
  double sum = 0.0;
  for (std::size_t t = 0; t < alpha.rows(); ++t) {
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < alpha.cols(); ++i)
      if (alpha.is_valid(t, i) && returns.is_valid(t, i)) {
        x.push_back(alpha.values(t, i));
        y.push_back(returns.values(t, i));
      }
    if (x.size() < 3) continue;
    if (const auto r = day_fn(x, y)) {
      out.per_day[t] = *r;
      sum += *r;
      ++out.days_used;
    }
  }
  if (out.days_used == 0) throw UndefinedMetric(std::string(what) + ": no day with 3 or more jointly valid, non-constant stocks");
  out.value = sum / static_cast<double>(out.days_used);
  return out;
}

}  // namespace detail

/// IC: mean over days of the cross-sectional Pearson correlation between
/// alpha and forward return.
inline DailyCorrelation information_coefficient(const MaskedGrid& alpha, const MaskedGrid& returns) {
  return detail::daily_correlation(
      alpha, returns, [](std::span<const double> x, std::span<const double> y) { return stats::pearson(x, y); },
      "IC");
}

/// RankIC: as IC on average ranks.
inline DailyCorrelation rank_information_coefficient(const MaskedGrid& alpha, const MaskedGrid& returns) {
  return detail::daily_correlation(
      alpha, returns, [](std::span<const double> x, std::span<const double> y) { return stats::spearman(x, y); },
      "RankIC");
}

/// Mean over population std of the finite entries. Not annualised.
inline double rank_ir(std::span<const double> per_day) {
  std::vector<double> v;
  for (double x : per_day)
    if (std::isfinite(x)) v.push_back(x);
  if (v.size() < 2) throw UndefinedMetric("RankIR needs at least 2 days");
  const double m2 = stats::variance(v);
  if (stats::degenerate_variance(m2, stats::max_abs(v))) throw UndefinedMetric("RankIR: zero variance");
  return stats::mean(v) / std::sqrt(m2);
}

struct BacktestConfig {
  double top_fraction = 0.1;
  int horizon = 1;           ///< w in n_drop = floor(k / w)
  double cost_rate = 0.0015;  ///< per traded name, one way
  int periods_per_year = 252;

  std::size_t k(std::size_t pool) const {
    return static_cast<std::size_t>(std::llround(top_fraction * static_cast<double>(pool)));
  }
  std::size_t n_drop(std::size_t pool) const {
    return std::max<std::size_t>(1, k(pool) / static_cast<std::size_t>(std::max(horizon, 1)));
  }
};

struct BacktestDay {
  std::size_t day = 0;
  std::size_t bought = 0;
  std::size_t sold = 0;          ///< includes forced exits
  std::size_t forced_exits = 0;  ///< holdings that stopped trading
  std::size_t holdings = 0;
  bool initial = false;          ///< portfolio built from empty
  double gross = 0.0;
  double net = 0.0;
};

struct BacktestResult {
  double ar = kNaN;
  double ir = kNaN;
  double daily_turnover = kNaN;  ///< mean traded names / k
  std::size_t k = 0;
  std::size_t n_drop = 0;
  std::size_t skipped_days = 0;
  std::vector<BacktestDay> days;
  std::vector<double> per_period_returns;
};

/// Daily top-k/drop-n long-only simulation. On day t the signal is known at
/// the close; the portfolio earns returns(t, i), which should be the
/// next-period return. Holdings outside the current top k are dropped
/// lowest-signal first, at most n_drop per day, and replaced by the best
/// names not held. Slots that were already empty (first day, names that
/// stopped trading) are filled without the cap.
inline BacktestResult simulate_topk(const MaskedGrid& signal, const MaskedGrid& returns, const BacktestConfig& cfg) {
  if (signal.rows() != returns.rows() || signal.cols() != returns.cols())
    throw Error("signal and return matrices differ in shape");
  if (!(cfg.top_fraction > 0.0 && cfg.top_fraction <= 1.0)) throw Error("top_fraction must be in (0, 1]");
  const std::size_t n = signal.cols();
  BacktestResult res;
  res.k = cfg.k(n);
  if (res.k < 1) throw Error("top_fraction selects no stocks");
  res.n_drop = cfg.n_drop(n);

  std::vector<char> held(n, 0);
  std::size_t held_count = 0;
  std::vector<std::size_t> universe;
  double turnover_sum = 0.0;

  for (std::size_t t = 0; t < signal.rows(); ++t) {
    universe.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (signal.is_valid(t, i) && returns.is_valid(t, i)) universe.push_back(i);
    if (universe.empty()) {
      ++res.skipped_days;
      continue;
    }
    BacktestDay day;
    day.day = t;
    day.initial = held_count == 0;

    for (std::size_t i = 0; i < n; ++i)
      if (held[i] && !(signal.is_valid(t, i) && returns.is_valid(t, i))) {
        held[i] = 0;
        --held_count;
        ++day.forced_exits;
      }

    // Best first; ties by symbol order.
    std::stable_sort(universe.begin(), universe.end(),
                     [&](std::size_t a, std::size_t b) { return signal.values(t, a) > signal.values(t, b); });
    const std::size_t k = std::min(res.k, universe.size());
    std::vector<char> in_top(n, 0);
    for (std::size_t r = 0; r < k; ++r) in_top[universe[r]] = 1;

    // Slots already empty before today's drops are filled without the cap.
    const std::size_t pre_vacant = k > held_count ? k - held_count : 0;

    // Worst holdings outside the top k, lowest signal first.
    std::size_t dropped = 0;
    for (auto it = universe.rbegin(); it != universe.rend() && dropped < res.n_drop; ++it)
      if (held[*it] && !in_top[*it]) {
        held[*it] = 0;
        --held_count;
        ++dropped;
      }
    const std::size_t vacant = k > held_count ? k - held_count : 0;
    const std::size_t cap = std::min(vacant, pre_vacant + dropped);
    for (std::size_t r = 0; r < universe.size() && day.bought < cap; ++r)
      if (!held[universe[r]]) {
        held[universe[r]] = 1;
        ++held_count;
        ++day.bought;
      }
    day.sold = dropped + day.forced_exits;
    day.holdings = held_count;

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (held[i]) sum += returns.values(t, i);
    day.gross = sum / static_cast<double>(held_count);
    const double traded = static_cast<double>(day.bought + day.sold) / static_cast<double>(res.k);
    day.net = day.gross - cfg.cost_rate * traded;
    turnover_sum += traded;
    res.per_period_returns.push_back(day.net);
    res.days.push_back(day);
  }

  if (!res.per_period_returns.empty()) {
    const auto& r = res.per_period_returns;
    const double P = static_cast<double>(cfg.periods_per_year);
    res.ar = stats::mean(r) * P;
    const double m2 = stats::variance(r);
    if (!stats::degenerate_variance(m2, stats::max_abs(r))) res.ir = res.ar / (std::sqrt(m2) * std::sqrt(P));
    res.daily_turnover = turnover_sum / static_cast<double>(r.size());
  }
  return res;
}

/// Alpha-level turnover: each day's valid cross-section becomes weights
/// rank-0.5 (rank in [0,1]) scaled to unit gross exposure; the result is the
/// mean of sum|w_t - w_{t-1}| over consecutive usable days. Range [0, 2].
inline double alpha_daily_turnover(const MaskedGrid& alpha) {
  const MaskedGrid ranks = cross_sectional_rank(alpha);
  const std::size_t n = alpha.cols();
  std::vector<double> prev(n, 0.0), cur(n, 0.0);
  bool prev_ok = false;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t t = 0; t < alpha.rows(); ++t) {
    std::fill(cur.begin(), cur.end(), 0.0);
    double gross = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (ranks.is_valid(t, i)) {
        cur[i] = ranks.values(t, i) - 0.5;
        gross += std::abs(cur[i]);
      }
    const bool ok = gross > 0.0;
    if (ok) {
      for (auto& w : cur) w /= gross;
      if (prev_ok) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += std::abs(cur[i] - prev[i]);
        sum += d;
        ++pairs;
      }
    }
    std::swap(prev, cur);
    prev_ok = ok;
  }
  if (pairs == 0) throw UndefinedMetric("turnover needs 2 consecutive usable days");
  return sum / static_cast<double>(pairs);
}

/// Every metric of one alpha. Undefined metrics are NaN.
struct MetricBundle {
  double ic = kNaN;
  double rank_ic = kNaN;
  double rank_ir = kNaN;
  double ar = kNaN;
  double ir = kNaN;
  double daily_turnover = kNaN;
  std::vector<double> per_day_ic;
  std::vector<double> per_day_rank_ic;
};

/// `forward` carries the prediction-horizon returns used by IC/RankIC;
/// `next_day` drives the portfolio simulation.
inline MetricBundle compute_metrics(const MaskedGrid& alpha, const MaskedGrid& forward, const MaskedGrid& next_day,
                                    const BacktestConfig& cfg) {
  MetricBundle m;
  try {
    auto ic = information_coefficient(alpha, forward);
    m.ic = ic.value;
    m.per_day_ic = std::move(ic.per_day);
  } catch (const UndefinedMetric&) {
  }
  try {
    auto ric = rank_information_coefficient(alpha, forward);
    m.rank_ic = ric.value;
    m.per_day_rank_ic = std::move(ric.per_day);
    m.rank_ir = rank_ir(m.per_day_rank_ic);
  } catch (const UndefinedMetric&) {
  }
  try {
    m.daily_turnover = alpha_daily_turnover(alpha);
  } catch (const UndefinedMetric&) {
  }
  if (std::isfinite(m.rank_ic)) {
    const auto bt = simulate_topk(alpha, next_day, cfg);
    m.ar = bt.ar;
    m.ir = bt.ir;
  }
  return m;
}

}  // namespace alphamcts
