#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "alphamcts/error.hpp"
#include "alphamcts/expr.hpp"
#include "alphamcts/grid.hpp"
#include "alphamcts/panel.hpp"
#include "alphamcts/stats.hpp"

namespace alphamcts {

// Series are held stock-major (one row per instrument, one column per day)
// while a tree is being evaluated; NaN marks an invalid cell. Every rolling
// window is trailing and includes the current day.

namespace kernels {

using Series = std::span<const double>;
using Out = std::span<double>;

/// Calls fn(window) for every day whose trailing window of length t is
/// complete and finite; other days get NaN.
template <class Fn>
void rolling(Series x, int t, Out y, Fn&& fn) {
  const std::size_t T = x.size();
  std::fill(y.begin(), y.end(), kNaN);
  if (t < 1) return;
  const auto w = static_cast<std::size_t>(t);
  std::size_t last_bad = 0;  // one past the most recent non-finite index
  for (std::size_t i = 0; i < T; ++i) {
    if (!std::isfinite(x[i])) last_bad = i + 1;
    if (i + 1 < w || last_bad > i + 1 - w) continue;
    y[i] = fn(x.subspan(i + 1 - w, w));
  }
}

template <class Fn>
void rolling2(Series x, Series z, int t, Out y, Fn&& fn) {
  const std::size_t T = x.size();
  std::fill(y.begin(), y.end(), kNaN);
  if (t < 1) return;
  const auto w = static_cast<std::size_t>(t);
  std::size_t last_bad = 0;
  for (std::size_t i = 0; i < T; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(z[i])) last_bad = i + 1;
    if (i + 1 < w || last_bad > i + 1 - w) continue;
    y[i] = fn(x.subspan(i + 1 - w, w), z.subspan(i + 1 - w, w));
  }
}

template <class Fn>
void lagged(Series x, int t, Out y, Fn&& fn) {
  std::fill(y.begin(), y.end(), kNaN);
  if (t < 1) return;
  const auto lag = static_cast<std::size_t>(t);
  for (std::size_t i = lag; i < x.size(); ++i)
    if (std::isfinite(x[i]) && std::isfinite(x[i - lag])) y[i] = fn(x[i], x[i - lag]);
}

struct Moments {
  double mean = 0, m2 = 0, m3 = 0, m4 = 0, scale = 0;
};

inline Moments moments(Series w) {
  Moments m;
  const double n = static_cast<double>(w.size());
  for (double v : w) m.mean += v;
  m.mean /= n;
  for (double v : w) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
    m.scale = std::max(m.scale, std::abs(v));
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

inline double window_std(Series w) {
  const auto m = moments(w);
  return stats::degenerate_variance(m.m2, m.scale) ? 0.0 : std::sqrt(m.m2);
}

inline double window_median(Series w) {
  std::vector<double> v(w.begin(), w.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

/// Average rank of the last element within the window, mapped to [0, 1].
inline double window_rank(Series w) {
  if (w.size() == 1) return 0.5;
  const double x = w.back();
  double below = 0, equal = 0;
  for (double v : w) {
    below += v < x;
    equal += v == x;
  }
  const double r = 1.0 + below + (equal - 1.0) / 2.0;
  return (r - 1.0) / static_cast<double>(w.size() - 1);
}

/// Correlation of (w[j], w[j-lag]) over the pairs that fit in the window.
inline double window_autocorr(Series w, int lag) {
  if (lag < 1 || static_cast<std::size_t>(lag) + 2 > w.size()) return kNaN;
  const auto n = w.size() - static_cast<std::size_t>(lag);
  const auto r = stats::pearson(w.subspan(static_cast<std::size_t>(lag), n), w.subspan(0, n));
  return r ? *r : kNaN;
}

inline double window_cov(Series a, Series b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - ma) * (b[k] - mb);
  return s / n;
}

inline double window_corr(Series a, Series b) {
  const auto r = stats::pearson(a, b);
  return r ? *r : kNaN;
}

inline double unary(OpCode op, double x) {
  if (!std::isfinite(x)) return kNaN;
  switch (op) {
    case OpCode::Neg:
      return -x;
    case OpCode::Abs:
      return std::abs(x);
    case OpCode::Square:
      return x * x;
    case OpCode::Inv:
      return x == 0.0 ? kNaN : 1.0 / x;
    case OpCode::Sign:
      return static_cast<double>((x > 0) - (x < 0));
    case OpCode::Sin:
      return std::sin(x);
    case OpCode::Cos:
      return std::cos(x);
    case OpCode::Tanh:
      return std::tanh(x);
    case OpCode::Log:
      return x > 0.0 ? std::log(x) : kNaN;
    default:
      return kNaN;
  }
}

inline double binary(OpCode op, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) return kNaN;
  switch (op) {
    case OpCode::Add:
      return x + y;
    case OpCode::Sub:
      return x - y;
    case OpCode::Mul:
      return x * y;
    case OpCode::Div:
      return y == 0.0 ? kNaN : x / y;
    case OpCode::Greater:
      return x > y ? 1.0 : 0.0;
    case OpCode::Less:
      return x < y ? 1.0 : 0.0;
    default:
      return kNaN;
  }
}

/// Applies a one-input parameterised operator to a single series.
inline void rolling_op(OpCode op, Series x, int t, int n, Out y) {
  switch (op) {
    case OpCode::Delay:
      return lagged(x, t, y, [](double, double then) { return then; });
    case OpCode::Diff:
      return lagged(x, t, y, [](double now, double then) { return now - then; });
    case OpCode::Pct:
      return lagged(x, t, y, [](double now, double then) { return then == 0.0 ? kNaN : now / then - 1.0; });
    case OpCode::Ma:
      return rolling(x, t, y, [](Series w) { return moments(w).mean; });
    case OpCode::Sum:
      return rolling(x, t, y, [](Series w) {
        double s = 0;
        for (double v : w) s += v;
        return s;
      });
    case OpCode::Med:
      return rolling(x, t, y, window_median);
    case OpCode::Std:
      return rolling(x, t, y, window_std);
    case OpCode::Max:
      return rolling(x, t, y, [](Series w) { return *std::max_element(w.begin(), w.end()); });
    case OpCode::Min:
      return rolling(x, t, y, [](Series w) { return *std::min_element(w.begin(), w.end()); });
    case OpCode::Rank:
      return rolling(x, t, y, window_rank);
    case OpCode::Skew:
      return rolling(x, t, y, [](Series w) {
        const auto m = moments(w);
        return stats::degenerate_variance(m.m2, m.scale) ? kNaN : m.m3 / std::pow(m.m2, 1.5);
      });
    case OpCode::Kurt:
      return rolling(x, t, y, [](Series w) {
        const auto m = moments(w);
        return stats::degenerate_variance(m.m2, m.scale) ? kNaN : m.m4 / (m.m2 * m.m2) - 3.0;
      });
    case OpCode::Vari:
      return rolling(x, t, y, [](Series w) {
        const double mu = moments(w).mean;
        return mu == 0.0 ? kNaN : window_std(w) / mu;
      });
    case OpCode::Zscore:
      return rolling(x, t, y, [](Series w) {
        const auto m = moments(w);
        return stats::degenerate_variance(m.m2, m.scale) ? kNaN : (w.back() - m.mean) / std::sqrt(m.m2);
      });
    case OpCode::Autocorr:
      return rolling(x, t, y, [n](Series w) { return window_autocorr(w, n); });
    default:
      std::fill(y.begin(), y.end(), kNaN);
  }
}

}  // namespace kernels

namespace detail {

/// Stock-major evaluation of a subtree: rows are stocks, columns are days.
inline RealGrid eval_node(const ExprNode& node, const ArgumentSet& args, const MarketPanel& panel) {
  const std::size_t T = panel.days();
  const std::size_t n = panel.stocks();
  RealGrid out(n, T, kNaN);
  if (node.is_leaf()) {
    const auto& src = panel.feature(node.feature);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < n; ++i)
        if (!panel.is_missing(t, i)) out(i, t) = src(t, i);
    return out;
  }
  auto param = [&](std::size_t k) {
    const auto it = args.find(node.params.at(k));
    if (it == args.end()) throw Error("parameter '" + node.params[k] + "' has no binding");
    return it->second;
  };
  const auto& info = op_info(node.op);
  const RealGrid a = eval_node(node.children.at(0), args, panel);
  if (info.arity == 1 && info.kind == OpKind::elementwise) {
    auto src = a.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = kernels::unary(node.op, src[k]);
  } else if (info.arity == 1) {
    const int t = param(0);
    const int lag = info.param_count > 1 ? param(1) : 0;
    for (std::size_t i = 0; i < n; ++i) kernels::rolling_op(node.op, a.row(i), t, lag, out.row(i));
  } else {
    const RealGrid b = eval_node(node.children.at(1), args, panel);
    if (info.kind == OpKind::elementwise) {
      auto x = a.data();
      auto y = b.data();
      auto dst = out.data();
      for (std::size_t k = 0; k < x.size(); ++k) dst[k] = kernels::binary(node.op, x[k], y[k]);
    } else {
      const int t = param(0);
      for (std::size_t i = 0; i < n; ++i) {
        if (node.op == OpCode::Cov)
          kernels::rolling2(a.row(i), b.row(i), t, out.row(i), kernels::window_cov);
        else
          kernels::rolling2(a.row(i), b.row(i), t, out.row(i), kernels::window_corr);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Evaluates the tree under one argument binding.
inline AlphaMatrix evaluate(const ExprNode& root, const ArgumentSet& args, const MarketPanel& panel) {
  const RealGrid by_stock = detail::eval_node(root, args, panel);
  AlphaMatrix out(panel.days(), panel.stocks());
  for (std::size_t t = 0; t < panel.days(); ++t)
    for (std::size_t i = 0; i < panel.stocks(); ++i)
      if (!panel.is_missing(t, i)) out.set(t, i, by_stock(i, t));
  return out;
}

inline AlphaMatrix evaluate(const AlphaFormula& f, std::size_t argument_set_index, const MarketPanel& panel) {
  // A formula without parameters has nothing to bind.
  if (f.argument_sets.empty() && f.param_names.empty() && argument_set_index == 0)
    return evaluate(f.root, ArgumentSet{}, panel);
  if (argument_set_index >= f.argument_sets.size())
    throw Error("argument set " + std::to_string(argument_set_index) + " out of range (formula has " +
                std::to_string(f.argument_sets.size()) + ")");
  return evaluate(f.root, f.argument_sets[argument_set_index], panel);
}

struct BestEvaluation {
  std::size_t index = 0;
  AlphaMatrix matrix;
  double score = 0.0;
};

/// Scorer returns NaN or throws UndefinedMetric when a matrix cannot be scored.
using MatrixScorer = std::function<double(const AlphaMatrix&)>;

/// Evaluates every argument set and keeps the one the scorer likes best
/// (ties go to the lower index).
inline BestEvaluation evaluate_best(const AlphaFormula& f, const MarketPanel& panel, const MatrixScorer& scorer) {
  std::optional<BestEvaluation> best;
  const std::size_t sets = f.argument_sets.empty() && f.param_names.empty() ? 1 : f.argument_sets.size();
  for (std::size_t k = 0; k < sets; ++k) {
    AlphaMatrix m = evaluate(f, k, panel);
    double s = kNaN;
    try {
      s = scorer(m);
    } catch (const UndefinedMetric&) {
      continue;
    }
    if (!std::isfinite(s)) continue;
    if (!best || s > best->score) best = BestEvaluation{k, std::move(m), s};
  }
  if (!best) throw NoValidConfiguration("no argument set of '" + to_infix(f.root) + "' produced a usable alpha");
  return std::move(*best);
}

/// Mean over days of the cross-sectional Pearson correlation between two
/// alpha matrices. Days with fewer than 3 jointly valid stocks or a constant
/// side are skipped.
inline double pairwise_alpha_correlation(const AlphaMatrix& a, const AlphaMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("alpha matrices differ in shape");
  double sum = 0.0;
  std::size_t days = 0;
  std::vector<double> x, y;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < a.cols(); ++i)
      if (a.is_valid(t, i) && b.is_valid(t, i)) {
        x.push_back(a.values(t, i));
        y.push_back(b.values(t, i));
      }
    if (x.size() < 3) continue;
    if (const auto r = stats::pearson(x, y)) {
      sum += *r;
      ++days;
    }
  }
  if (days == 0) throw UndefinedMetric("no day with 3 or more jointly valid stocks");
  return std::clamp(sum / static_cast<double>(days), -1.0, 1.0);
}

/// Long-format dump: date,symbol,value for valid cells.
inline void write_alpha_csv(const AlphaMatrix& m, const MarketPanel& panel, std::ostream& out) {
  out << "date,symbol,value\n";
  for (std::size_t t = 0; t < m.rows(); ++t)
    for (std::size_t i = 0; i < m.cols(); ++i)
      if (m.is_valid(t, i))
        out << panel.dates()[t] << ',' << panel.symbols()[i] << ',' << detail::format_double(m.values(t, i)) << '\n';
}

}  // namespace alphamcts
