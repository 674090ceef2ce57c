#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphamcts/dimension.hpp"
#include "alphamcts/engine.hpp"
#include "alphamcts/error.hpp"
#include "alphamcts/expr.hpp"
#include "alphamcts/interchange.hpp"
#include "alphamcts/metrics.hpp"

namespace alphamcts {

enum class Better { higher, lower };

/// Share of finite repository values that beat `value`: for higher-is-better
/// metrics the count of v_i > value, for lower-is-better the count of
/// v_i < value, divided by the number of finite values. Empty gives 0; a
/// non-finite `value` loses to everything (1).
inline double relative_rank(double value, std::span<const double> repo, Better dir = Better::higher) {
  std::size_t n = 0, beaten = 0;
  for (double v : repo) {
    if (!std::isfinite(v)) continue;
    ++n;
    beaten += dir == Better::higher ? value < v : value > v;
  }
  if (n == 0) return 0.0;
  if (std::isnan(value)) return 1.0;
  return static_cast<double>(beaten) / static_cast<double>(n);
}

struct EffectivenessCriteria {
  double min_rank_ic = 0.015;
  double min_rank_ir = 0.3;
  double max_rel_rank_ic = 0.95;
  double max_rel_rank_ir = 0.95;
  double max_turnover = 1.6;
  double max_correlation = 0.8;
};

/// Everything known about an alpha before it enters the repository.
struct Candidate {
  AlphaFormula formula;
  std::size_t chosen_argument_set = 0;
  MetricBundle metrics;
  AlphaMatrix matrix;
};

struct ZooEntry {
  std::size_t id = 0;
  AlphaFormula formula;
  std::size_t chosen_argument_set = 0;
  MetricBundle metrics;
  AlphaMatrix matrix;
  std::size_t accepted_at = 0;
  double max_corr = -std::numeric_limits<double>::infinity();  ///< vs the other entries, kept current
  double max_corr_at_insert = -std::numeric_limits<double>::infinity();
};

struct CorrelationHit {
  double value = -std::numeric_limits<double>::infinity();  ///< -inf: nothing to compare with
  std::optional<std::size_t> id;
};

struct GateResult {
  bool pass = false;
  std::vector<std::string> failures;
  CorrelationHit correlation;
};

class AlphaZoo {
 public:
  const std::vector<ZooEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const ZooEntry* find(std::size_t id) const {
    for (const auto& e : entries_)
      if (e.id == id) return &e;
    return nullptr;
  }

  bool contains(const AlphaFormula& f, std::size_t arg_index) const {
    return keys_.count(identity_key(f, arg_index)) != 0;
  }

  /// |correlation| of `m` with every entry, NaN where undefined.
  std::vector<double> abs_correlations(const AlphaMatrix& m) const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
      try {
        out.push_back(std::abs(pairwise_alpha_correlation(m, e.matrix)));
      } catch (const UndefinedMetric&) {
        out.push_back(kNaN);
      }
    }
    return out;
  }

  CorrelationHit max_correlation(const AlphaMatrix& m) const {
    CorrelationHit hit;
    const auto c = abs_correlations(m);
    for (std::size_t k = 0; k < c.size(); ++k)
      if (std::isfinite(c[k]) && c[k] > hit.value) {
        hit.value = c[k];
        hit.id = entries_[k].id;
      }
    return hit;
  }

  std::vector<double> rank_ic_values() const { return collect([](const ZooEntry& e) { return e.metrics.rank_ic; }); }
  std::vector<double> rank_ir_values() const { return collect([](const ZooEntry& e) { return e.metrics.rank_ir; }); }
  std::vector<double> turnover_values() const {
    return collect([](const ZooEntry& e) { return e.metrics.daily_turnover; });
  }
  std::vector<double> max_corr_values() const { return collect([](const ZooEntry& e) { return e.max_corr; }); }

  /// Applies every gate; failures name each violated one.
  GateResult check(const Candidate& c, const EffectivenessCriteria& crit) const {
    return check(c, crit, max_correlation(c.matrix));
  }

  GateResult check(const Candidate& c, const EffectivenessCriteria& crit, const CorrelationHit& corr) const {
    GateResult r;
    r.correlation = corr;
    const auto& m = c.metrics;
    auto fail = [&](std::string what) { r.failures.push_back(std::move(what)); };
    if (!(m.rank_ic >= crit.min_rank_ic)) fail("min_rank_ic: RankIC " + num(m.rank_ic) + " < " + num(crit.min_rank_ic));
    if (!(m.rank_ir >= crit.min_rank_ir)) fail("min_rank_ir: RankIR " + num(m.rank_ir) + " < " + num(crit.min_rank_ir));
    const double rr_ic = relative_rank(m.rank_ic, rank_ic_values());
    if (!(rr_ic <= crit.max_rel_rank_ic))
      fail("max_rel_rank_ic: relative rank of RankIC " + num(rr_ic) + " > " + num(crit.max_rel_rank_ic));
    const double rr_ir = relative_rank(m.rank_ir, rank_ir_values());
    if (!(rr_ir <= crit.max_rel_rank_ir))
      fail("max_rel_rank_ir: relative rank of RankIR " + num(rr_ir) + " > " + num(crit.max_rel_rank_ir));
    if (!(m.daily_turnover <= crit.max_turnover))
      fail("max_turnover: turnover " + num(m.daily_turnover) + " > " + num(crit.max_turnover));
    if (!(corr.value < crit.max_correlation))
      fail("max_correlation: |corr| " + num(corr.value) + " with entry " + std::to_string(corr.id.value_or(0)) +
           " >= " + num(crit.max_correlation));
    if (contains(c.formula, c.chosen_argument_set)) fail("duplicate: identical formula already stored");
    r.pass = r.failures.empty();
    return r;
  }

  /// Inserts when every gate passes. Returns the new id.
  std::optional<std::size_t> try_insert(const Candidate& c, const EffectivenessCriteria& crit) {
    const auto corr = abs_correlations(c.matrix);
    CorrelationHit hit;
    for (std::size_t k = 0; k < corr.size(); ++k)
      if (std::isfinite(corr[k]) && corr[k] > hit.value) {
        hit.value = corr[k];
        hit.id = entries_[k].id;
      }
    if (!check(c, crit, hit).pass) return std::nullopt;
    return insert_unchecked(c, corr, hit.value);
  }

  /// Stores an entry without gating (used when restoring a saved zoo).
  std::size_t restore(const Candidate& c, std::size_t id, std::size_t accepted_at) {
    const auto corr = abs_correlations(c.matrix);
    double best = -std::numeric_limits<double>::infinity();
    for (double v : corr)
      if (std::isfinite(v)) best = std::max(best, v);
    next_id_ = std::max(next_id_, id);
    next_order_ = std::max(next_order_, accepted_at);
    const auto got = insert_unchecked(c, corr, best, id, accepted_at);
    return got;
  }

  /// Few-shot exemplars for a refinement along `dim`. Effectiveness and
  /// Stability drop the ceil(eta*N) entries most correlated with the current
  /// alpha, then take the k best by RankIC / RankIR; Diversity takes the k
  /// least correlated; the other dimensions get none.
  std::vector<const ZooEntry*> select_exemplars(const AlphaMatrix& current, Dimension dim, std::size_t k,
                                                double eta) const {
    std::vector<const ZooEntry*> out;
    if (entries_.empty() || k == 0) return out;
    if (dim == Dimension::Turnover || dim == Dimension::OverfittingRisk) return out;
    auto corr = abs_correlations(current);
    for (auto& c : corr)
      if (!std::isfinite(c)) c = 0.0;
    std::vector<std::size_t> order(entries_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (dim == Dimension::Diversity) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return corr[a] < corr[b]; });
    } else {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return corr[a] > corr[b]; });
      const auto drop = static_cast<std::size_t>(std::ceil(eta * static_cast<double>(order.size()) - 1e-9));
      order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(drop, order.size())));
      auto metric = [&](std::size_t i) {
        const double v = dim == Dimension::Effectiveness ? entries_[i].metrics.rank_ic : entries_[i].metrics.rank_ir;
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
      };
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = metric(a), mb = metric(b);
        return ma != mb ? ma > mb : a < b;
      });
    }
    for (std::size_t r = 0; r < order.size() && out.size() < k; ++r) out.push_back(&entries_[order[r]]);
    return out;
  }

  /// Best k by RankIR, ties by insertion order.
  std::vector<const ZooEntry*> export_topk(std::size_t k) const {
    std::vector<const ZooEntry*> all;
    for (const auto& e : entries_) all.push_back(&e);
    auto key = [](const ZooEntry* e) {
      return std::isfinite(e->metrics.rank_ir) ? e->metrics.rank_ir : -std::numeric_limits<double>::infinity();
    };
    std::stable_sort(all.begin(), all.end(), [&](const ZooEntry* a, const ZooEntry* b) { return key(a) > key(b); });
    if (all.size() > k) all.resize(k);
    return all;
  }

  std::vector<AlphaFormula> formulas() const {
    std::vector<AlphaFormula> out;
    for (const auto& e : entries_) out.push_back(e.formula);
    return out;
  }

 private:
  template <class Fn>
  std::vector<double> collect(Fn&& fn) const {
    std::vector<double> out;
    for (const auto& e : entries_) out.push_back(fn(e));
    return out;
  }

  static std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
  }

  std::size_t insert_unchecked(const Candidate& c, const std::vector<double>& corr, double best,
                               std::optional<std::size_t> id = std::nullopt,
                               std::optional<std::size_t> order = std::nullopt) {
    ZooEntry e;
    e.id = id ? *id : ++next_id_;
    e.accepted_at = order ? *order : ++next_order_;
    e.formula = c.formula;
    e.chosen_argument_set = c.chosen_argument_set;
    e.metrics = c.metrics;
    e.matrix = c.matrix;
    e.max_corr = best;
    e.max_corr_at_insert = best;
    for (std::size_t k = 0; k < corr.size(); ++k)
      if (std::isfinite(corr[k])) entries_[k].max_corr = std::max(entries_[k].max_corr, corr[k]);
    keys_.insert(identity_key(c.formula, c.chosen_argument_set));
    entries_.push_back(std::move(e));
    return entries_.back().id;
  }

  std::vector<ZooEntry> entries_;
  std::set<std::string> keys_;
  std::size_t next_id_ = 0;
  std::size_t next_order_ = 0;
};

// Persistence. zoo.jsonl holds one interchange document per line, extended
// with id, accepted_at and chosen_argument_set; zoo_metrics.csv is keyed by id.

inline constexpr const char* kZooFile = "zoo.jsonl";
inline constexpr const char* kZooMetricsFile = "zoo_metrics.csv";

inline std::string zoo_line(const ZooEntry& e) {
  auto doc = interchange_json(e.formula);
  doc["id"] = e.id;
  doc["accepted_at"] = e.accepted_at;
  doc["chosen_argument_set"] = e.chosen_argument_set;
  return doc.dump();
}

inline std::string metrics_csv_header() {
  return "id,formula,ic,rank_ic,rank_ir,ar,ir,daily_turnover,max_corr_at_insert";
}

inline std::string metrics_csv_row(const ZooEntry& e) {
  auto f = [](double v) { return std::isfinite(v) ? detail::format_double(v) : std::string(); };
  std::string formula = to_infix(e.formula, e.chosen_argument_set);
  return std::to_string(e.id) + ",\"" + formula + "\"," + f(e.metrics.ic) + "," + f(e.metrics.rank_ic) + "," +
         f(e.metrics.rank_ir) + "," + f(e.metrics.ar) + "," + f(e.metrics.ir) + "," + f(e.metrics.daily_turnover) +
         "," + f(e.max_corr_at_insert);
}

/// Appends one accepted entry to both files, creating headers as needed.
inline void append_zoo_entry(const std::filesystem::path& dir, const ZooEntry& e) {
  {
    std::ofstream out(dir / kZooFile, std::ios::app);
    if (!out) throw Error("cannot write " + (dir / kZooFile).string());
    out << zoo_line(e) << '\n';
  }
  const auto csv = dir / kZooMetricsFile;
  const bool fresh = !std::filesystem::exists(csv) || std::filesystem::file_size(csv) == 0;
  std::ofstream out(csv, std::ios::app);
  if (!out) throw Error("cannot write " + csv.string());
  if (fresh) out << metrics_csv_header() << '\n';
  out << metrics_csv_row(e) << '\n';
}

/// Rewrites both files from scratch.
inline void save_zoo(const std::filesystem::path& dir, const AlphaZoo& zoo) {
  std::filesystem::remove(dir / kZooFile);
  std::filesystem::remove(dir / kZooMetricsFile);
  std::ofstream(dir / kZooFile).flush();
  for (const auto& e : zoo.entries()) append_zoo_entry(dir, e);
}

struct StoredEntry {
  std::size_t id = 0;
  std::size_t accepted_at = 0;
  std::size_t chosen_argument_set = 0;
  AlphaFormula formula;
};

/// Reads zoo.jsonl. A missing file is an empty zoo.
inline std::vector<StoredEntry> read_zoo_file(const std::filesystem::path& path) {
  std::vector<StoredEntry> out;
  std::ifstream in(path);
  if (!in) {
    if (std::filesystem::exists(path)) throw Error("cannot read " + path.string());
    return out;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      StoredEntry s;
      s.formula = parse_interchange(doc);
      s.id = doc.value("id", line_no);
      s.accepted_at = doc.value("accepted_at", s.id);
      s.chosen_argument_set = doc.value("chosen_argument_set", std::size_t{0});
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad zoo record: ") + e.what(), line_no);
    } catch (const InterchangeError& e) {
      throw ParseError(std::string("bad zoo record: ") + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace alphamcts
