#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "alphamcts/panel.hpp"
#include "alphamcts/random.hpp"
#include "alphamcts/stats.hpp"

namespace alphamcts {

struct SyntheticSpec {
  std::size_t days = 500;
  std::size_t stocks = 50;
  std::size_t seed = 1;
  double signal = 0.5;      ///< loading of the planted signal in daily returns
  double vol = 0.01;        ///< daily return scale
  int signal_window = 10;   ///< window of the planted Ma(close - vwap, w)
  double missing = 0.0;     ///< probability that a cell is masked
};

/// Business-day ISO dates starting 2020-01-01.
inline std::vector<std::string> business_dates(std::size_t n) {
  using namespace std::chrono;
  std::vector<std::string> out;
  sys_days d = year{2020} / January / day{1};
  while (out.size() < n) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{d};
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
      out.emplace_back(buf);
    }
    d += days{1};
  }
  return out;
}

/// Panel whose next-day returns load on the cross-sectional z-score of
/// Ma(close - vwap, w):
///   vwap[t]    = close[t] * (1 + 0.01 e),  e ~ N(0,1)
///   r[t]       = vol * (signal * z[t] + N(0,1))
///   close[t+1] = close[t] * (1 + r[t])
/// Before the window fills, r is pure noise. Masked cells (if any) are
/// masked after the prices are generated, so they do not bend the dynamics.
inline MarketPanel synthetic_panel(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  const std::size_t T = spec.days, n = spec.stocks;
  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%03zu", i);
    symbols.emplace_back(buf);
  }
  MarketPanel panel(business_dates(T), symbols);

  std::vector<double> close(n), prev_close(n);
  for (auto& c : close) c = 20.0 * std::exp(rng.normal(0.0, 0.5));
  std::vector<std::vector<double>> gap(n);  // close - vwap history
  const int w = std::max(spec.signal_window, 1);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> ma(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double vwap = close[i] * (1.0 + 0.01 * rng.normal());
      const double open = (t == 0 ? close[i] : prev_close[i]) * (1.0 + 0.003 * rng.normal());
      const double hi = std::max({open, close[i], vwap}) * (1.0 + std::abs(0.004 * rng.normal()));
      const double lo = std::min({open, close[i], vwap}) * (1.0 - std::abs(0.004 * rng.normal()));
      const double volume = std::round(1e6 * std::exp(0.5 * rng.normal()));
      panel.set_cell(t, i, {open, hi, lo, close[i], volume, vwap});
      gap[i].push_back(close[i] - vwap);
      if (gap[i].size() >= static_cast<std::size_t>(w)) {
        double s = 0.0;
        for (std::size_t k = gap[i].size() - static_cast<std::size_t>(w); k < gap[i].size(); ++k) s += gap[i][k];
        ma[i] = s / w;
      }
    }
    std::vector<double> z(n, 0.0);
    if (t + 1 >= static_cast<std::size_t>(w)) {
      const double m = stats::mean(ma);
      const double sd = stats::stddev(ma);
      if (sd > 0)
        for (std::size_t i = 0; i < n; ++i) z[i] = (ma[i] - m) / sd;
    }
    prev_close = close;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = spec.vol * (spec.signal * z[i] + rng.normal());
      close[i] = std::max(close[i] * (1.0 + r), 0.01);
    }
  }
  if (spec.missing > 0)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < n; ++i)
        if (rng.bernoulli(spec.missing)) panel.mask_cell(t, i);
  return panel;
}

}  // namespace alphamcts
