#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "alphamcts/dimension.hpp"
#include "alphamcts/evaluator.hpp"
#include "alphamcts/generator.hpp"
#include "alphamcts/random.hpp"
#include "alphamcts/zoo.hpp"

namespace alphamcts {

enum class BudgetScope { tree, global };

struct SearchConfig {
  double uct_c = 1.0;
  int budget_init = 3;
  int budget_increment = 1;
  BudgetScope budget_scope = BudgetScope::tree;
  double temperature = 1.0;
  double e_max = 1.0;
  double eta = 0.5;
  std::size_t exemplars = 1;
  EffectivenessCriteria gates;
};

struct SearchNode {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  std::optional<Dimension> refined_along;  ///< empty for the root
  Candidate candidate;
  DimensionScores scores{};
  double aggregate = 0.0;
  double q = 0.0;
  std::size_t visits = 0;
  OverfittingAssessment overfitting;
  std::vector<std::string> history;  ///< summaries from the root down to this node
};

// Scoring.

/// Per-dimension scores against the repository: one minus the relative rank
/// for the four metric dimensions, the overfitting score over ten for the
/// last. An undefined metric scores 0.
inline DimensionScores score_dimensions(const Candidate& c, const AlphaZoo& zoo, double overfitting_score) {
  DimensionScores e{};
  const auto& m = c.metrics;
  auto score = [](double metric, const std::vector<double>& repo, Better dir) {
    if (!std::isfinite(metric)) return 0.0;
    return 1.0 - relative_rank(metric, repo, dir);
  };
  e[0] = score(m.rank_ic, zoo.rank_ic_values(), Better::higher);
  e[1] = score(m.rank_ir, zoo.rank_ir_values(), Better::higher);
  e[2] = score(m.daily_turnover, zoo.turnover_values(), Better::lower);
  const double corr = zoo.max_correlation(c.matrix).value;
  e[3] = 1.0 - relative_rank(corr, zoo.max_corr_values(), Better::lower);
  e[4] = std::isfinite(overfitting_score) ? std::clamp(overfitting_score, 0.0, 10.0) / 10.0 : 0.0;
  return e;
}

/// Softmax over (e_max - E_d) / T: weaker dimensions are refined more often.
inline std::array<double, kDimensionCount> dimension_probabilities(const DimensionScores& e, double e_max, double t) {
  std::array<double, kDimensionCount> p{};
  const double temp = std::max(t, 1e-9);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < kDimensionCount; ++d) hi = std::max(hi, (e_max - e[d]) / temp);
  double sum = 0.0;
  for (std::size_t d = 0; d < kDimensionCount; ++d) sum += p[d] = std::exp((e_max - e[d]) / temp - hi);
  for (auto& v : p) v /= sum;
  return p;
}

inline Dimension sample_dimension(const DimensionScores& e, double e_max, double t, Rng& rng) {
  const auto p = dimension_probabilities(e, e_max, t);
  double u = rng.uniform();
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    if (u < p[d]) return kAllDimensions[d];
    u -= p[d];
  }
  return kAllDimensions.back();
}

// Selection.

inline double uct(double q, double parent_visits, double visits, double c) {
  if (visits <= 0) return std::numeric_limits<double>::infinity();
  return q + c * std::sqrt(std::log(std::max(parent_visits, 1.0)) / visits);
}

struct SelectionStep {
  bool expand_here = false;
  std::size_t child = 0;  ///< index into the node list when descending
};

/// At `n`: compare the best child by UCT (ties to the earliest) with the
/// virtual expand-here action, valued at the node's own aggregate with the
/// child count as its visit count. The virtual action wins only when strictly
/// better; a childless node always expands.
inline SelectionStep select_step(const std::vector<SearchNode>& nodes, std::size_t n, double c) {
  const auto& node = nodes[n];
  if (node.children.empty()) return {true, 0};
  const double ns = static_cast<double>(node.visits);
  std::size_t best = node.children.front();
  double best_u = -std::numeric_limits<double>::infinity();
  for (auto ch : node.children) {
    const double u = uct(nodes[ch].q, ns, static_cast<double>(nodes[ch].visits), c);
    if (u > best_u) {
      best_u = u;
      best = ch;
    }
  }
  const double virt = uct(node.aggregate, ns, static_cast<double>(node.children.size()), c);
  if (virt > best_u) return {true, 0};
  return {false, best};
}

inline std::size_t select_node(const std::vector<SearchNode>& nodes, double c) {
  std::size_t n = 0;
  for (;;) {
    const auto step = select_step(nodes, n, c);
    if (step.expand_here) return n;
    n = step.child;
  }
}

/// Adds a visit to `from` and each ancestor and raises their Q to `value`.
/// A skipped expansion passes -inf: visits move, Q does not.
inline void backpropagate(std::vector<SearchNode>& nodes, std::size_t from, double value) {
  std::optional<std::size_t> n = from;
  while (n) {
    auto& node = nodes[*n];
    ++node.visits;
    node.q = std::max(node.q, value);
    n = node.parent;
  }
}

// One search tree.

struct TreeOutcome {
  std::vector<SearchNode> nodes;
  std::vector<std::size_t> accepted;  ///< zoo ids, in harvest order
  std::size_t expansions = 0;         ///< attempted, including skipped ones
  std::size_t skipped = 0;
  std::size_t generator_calls = 0;
  bool seeded = false;
  bool interrupted = false;  ///< stopped by the caller's limit before the budget ran out
};

struct TreeHooks {
  /// Asked before every seed or refine call; false stops the tree.
  std::function<bool()> may_generate = [] { return true; };
  std::ostream* trace = nullptr;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s << std::setprecision(4) << v;
  return s.str();
}

inline std::string fmt_scores(const DimensionScores& e) {
  std::string out = "[";
  for (std::size_t d = 0; d < kDimensionCount; ++d) out += (d ? " " : "") + fmt(e[d]);
  return out + "]";
}

}  // namespace detail

class TreeSearch {
 public:
  TreeSearch(AlphaGenerator& gen, const AlphaEvaluator& eval, AlphaZoo& zoo, const SearchConfig& cfg, Rng& rng)
      : gen_(gen), eval_(eval), zoo_(zoo), cfg_(cfg), rng_(rng) {}

  /// Grows one tree from a fresh seed, then offers every node to the zoo in
  /// descending aggregate order. `global_best` is read and updated when the
  /// budget scope is global.
  TreeOutcome run(const GenerationContext& ctx, std::size_t tree_index, double& global_best, const TreeHooks& hooks) {
    TreeOutcome out;
    trace_ = hooks.trace;
    tree_ = tree_index;
    if (!hooks.may_generate()) {
      out.interrupted = true;
      return out;
    }
    ++out.generator_calls;
    SearchNode root;
    try {
      root.candidate = eval_.evaluate(gen_.generate_seed(ctx));
    } catch (const GenerationFailed& e) {
      log("seed failed: " + first_line(e.what()));
      return out;
    } catch (const NoValidConfiguration& e) {
      log("seed unusable: " + first_line(e.what()));
      return out;
    }
    root.history.push_back("Seed alpha: " + to_infix(root.candidate.formula, root.candidate.chosen_argument_set));
    root.overfitting = gen_.assess_overfitting(root.candidate.formula, root.candidate.chosen_argument_set, root.history);
    root.scores = score_dimensions(root.candidate, zoo_, root.overfitting.score);
    root.aggregate = aggregate(root.scores);
    root.q = root.aggregate;
    root.visits = 1;
    out.seeded = true;
    out.nodes.push_back(std::move(root));
    log("seed node 0 agg " + detail::fmt(out.nodes[0].aggregate) + " scores " + detail::fmt_scores(out.nodes[0].scores) +
        " " + describe(out.nodes[0].candidate));

    double& best = cfg_.budget_scope == BudgetScope::global ? global_best : local_best_;
    local_best_ = out.nodes[0].aggregate;
    if (cfg_.budget_scope == BudgetScope::global) global_best = std::max(global_best, out.nodes[0].aggregate);
    std::size_t budget = static_cast<std::size_t>(std::max(cfg_.budget_init, 0));

    while (out.expansions < budget) {
      if (!hooks.may_generate()) {
        out.interrupted = true;
        break;
      }
      ++out.expansions;
      ++out.generator_calls;
      const std::size_t at = select_node(out.nodes, cfg_.uct_c);
      const Dimension dim = sample_dimension(out.nodes[at].scores, cfg_.e_max, cfg_.temperature, rng_);
      log("select node " + std::to_string(at) + " along " + std::string(dimension_name(dim)));
      auto child = expand(out.nodes, at, dim, ctx);
      if (!child) {
        ++out.skipped;
        backpropagate(out.nodes, at, -std::numeric_limits<double>::infinity());
        continue;
      }
      const std::size_t id = out.nodes.size();
      child->id = id;
      out.nodes[at].children.push_back(id);
      const double agg = child->aggregate;
      out.nodes.push_back(std::move(*child));
      log("expand node " + std::to_string(at) + " -> node " + std::to_string(id) + " " +
          describe(out.nodes[id].candidate));
      log("score node " + std::to_string(id) + " agg " + detail::fmt(agg) + " scores " +
          detail::fmt_scores(out.nodes[id].scores));
      backpropagate(out.nodes, at, agg);
      log("backprop from node " + std::to_string(at) + " root q " + detail::fmt(out.nodes[0].q) + " visits " +
          std::to_string(out.nodes[0].visits));
      if (agg > best) {
        best = agg;
        budget += static_cast<std::size_t>(std::max(cfg_.budget_increment, 0));
        log("new best " + detail::fmt(agg) + ", budget " + std::to_string(budget));
      }
    }
    harvest(out);
    return out;
  }

 private:
  std::optional<SearchNode> expand(const std::vector<SearchNode>& nodes, std::size_t at, Dimension dim,
                                   const GenerationContext& ctx) {
    const auto& parent = nodes[at];
    RefinementRequest req;
    req.parent = parent.candidate.formula;
    req.parent_argument_set = parent.candidate.chosen_argument_set;
    req.dimension = dim;
    req.scores = parent.scores;
    req.evaluation_summary = metric_summary(parent.candidate.metrics);
    for (const auto* e : zoo_.select_exemplars(parent.candidate.matrix, dim, cfg_.exemplars, cfg_.eta))
      req.exemplars.push_back({e->formula, e->chosen_argument_set, metric_summary(e->metrics)});
    req.history = parent.history;
    for (auto ch : parent.children)
      req.history.push_back("Earlier attempt from this alpha: " + nodes[ch].history.back());

    SearchNode child;
    try {
      child.candidate = eval_.evaluate(gen_.refine(req, ctx));
    } catch (const GenerationFailed& e) {
      log("skip node " + std::to_string(at) + " along " + std::string(dimension_name(dim)) + ": " +
          first_line(e.what()));
      return std::nullopt;
    } catch (const NoValidConfiguration& e) {
      log("skip node " + std::to_string(at) + " along " + std::string(dimension_name(dim)) + ": " +
          first_line(e.what()));
      return std::nullopt;
    }
    const auto note = gen_.last_change_note();
    auto pending = parent.history;
    pending.push_back(std::string(dimension_name(dim)) + " refinement: " + note);
    child.overfitting =
        gen_.assess_overfitting(child.candidate.formula, child.candidate.chosen_argument_set, pending);
    child.scores = score_dimensions(child.candidate, zoo_, child.overfitting.score);
    child.aggregate = aggregate(child.scores);
    child.q = child.aggregate;
    child.visits = 1;
    child.parent = at;
    child.refined_along = dim;

    SummaryRequest sreq;
    sreq.dimension = dim;
    sreq.parent = parent.candidate.formula;
    sreq.parent_argument_set = parent.candidate.chosen_argument_set;
    sreq.child = child.candidate.formula;
    sreq.child_argument_set = child.candidate.chosen_argument_set;
    for (std::size_t d = 0; d < kDimensionCount; ++d) sreq.delta[d] = child.scores[d] - parent.scores[d];
    sreq.change_note = note;
    child.history = parent.history;
    child.history.push_back(gen_.summarize(sreq));
    return child;
  }

  void harvest(TreeOutcome& out) {
    std::vector<std::size_t> order(out.nodes.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.nodes[a].aggregate > out.nodes[b].aggregate; });
    for (auto n : order) {
      const auto& c = out.nodes[n].candidate;
      const auto gate = zoo_.check(c, cfg_.gates);
      if (!gate.pass) {
        log("harvest node " + std::to_string(n) + " rejected: " + gate.failures.front());
        continue;
      }
      const auto id = zoo_.try_insert(c, cfg_.gates);
      out.accepted.push_back(*id);
      log("harvest node " + std::to_string(n) + " accepted as " + std::to_string(*id));
    }
  }

  static std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

  static std::string describe(const Candidate& c) {
    return "rank_ic " + detail::fmt(c.metrics.rank_ic) + " " + to_infix(c.formula, c.chosen_argument_set);
  }

  void log(const std::string& line) {
    if (trace_) *trace_ << "tree " << tree_ << ' ' << line << '\n';
  }

  AlphaGenerator& gen_;
  const AlphaEvaluator& eval_;
  AlphaZoo& zoo_;
  SearchConfig cfg_;
  Rng& rng_;
  std::ostream* trace_ = nullptr;
  std::size_t tree_ = 0;
  double local_best_ = -std::numeric_limits<double>::infinity();
};

}  // namespace alphamcts
