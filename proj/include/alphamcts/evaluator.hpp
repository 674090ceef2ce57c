#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include "alphamcts/engine.hpp"
#include "alphamcts/metrics.hpp"
#include "alphamcts/panel.hpp"
#include "alphamcts/zoo.hpp"

namespace alphamcts {

/// Binds a panel to its return matrices and backtest settings.
class AlphaEvaluator {
 public:
  AlphaEvaluator(const MarketPanel& panel, BacktestConfig cfg)
      : panel_(&panel), cfg_(cfg), forward_(forward_returns(panel, cfg.horizon)), next_day_(forward_returns(panel, 1)) {}

  const MarketPanel& panel() const { return *panel_; }
  const BacktestConfig& config() const { return cfg_; }
  const ReturnMatrix& forward() const { return forward_; }
  const ReturnMatrix& next_day() const { return next_day_; }

  MetricBundle metrics(const AlphaMatrix& m) const { return compute_metrics(m, forward_, next_day_, cfg_); }

  /// Evaluates every argument set, keeps the one with the highest RankIC and
  /// computes its full metrics. Throws NoValidConfiguration when no set has
  /// a defined RankIC.
  Candidate evaluate(const AlphaFormula& f) const {
    auto best = evaluate_best(f, *panel_, [&](const AlphaMatrix& m) {
      return rank_information_coefficient(m, forward_).value;
    });
    Candidate c;
    c.formula = f;
    c.chosen_argument_set = best.index;
    c.metrics = metrics(best.matrix);
    c.matrix = std::move(best.matrix);
    return c;
  }

 private:
  const MarketPanel* panel_;
  BacktestConfig cfg_;
  ReturnMatrix forward_;
  ReturnMatrix next_day_;
};

inline std::string metric_summary(const MetricBundle& m) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "IC " << m.ic << ", RankIC " << m.rank_ic << ", RankIR " << m.rank_ir << ", AR " << m.ar << ", IR " << m.ir
      << ", turnover " << m.daily_turnover;
  return out.str();
}

}  // namespace alphamcts
