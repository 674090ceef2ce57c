#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alphamcts/dimension.hpp"
#include "alphamcts/expr.hpp"
#include "alphamcts/genes.hpp"
#include "alphamcts/random.hpp"
#include "alphamcts/validate.hpp"

// Random formula grammar and structural mutations for the offline generator.

namespace alphamcts::grammar {

inline constexpr std::array<const char*, 3> kParamNames{"window_a", "window_b", "window_c"};
inline constexpr std::array<int, 9> kWindowPool{2, 3, 5, 10, 15, 20, 30, 40, 60};

inline std::vector<int> window_pool(WindowRange r) {
  std::vector<int> out;
  for (int w : kWindowPool)
    if (w >= r.lo && w <= r.hi) out.push_back(w);
  if (out.empty()) out.push_back(r.lo);
  return out;
}

inline int random_window(Rng& rng, WindowRange r) {
  const auto pool = window_pool(r);
  return pool[rng.index(pool.size())];
}

inline constexpr std::array<OpCode, 13> kRollingUnary{OpCode::Delay, OpCode::Diff, OpCode::Pct,  OpCode::Ma,
                                                      OpCode::Med,   OpCode::Sum,  OpCode::Std,  OpCode::Max,
                                                      OpCode::Min,   OpCode::Rank, OpCode::Skew, OpCode::Vari,
                                                      OpCode::Zscore};
inline constexpr std::array<OpCode, 9> kElementUnary{OpCode::Neg, OpCode::Abs, OpCode::Square,
                                                     OpCode::Inv, OpCode::Sign, OpCode::Sin,
                                                     OpCode::Cos, OpCode::Tanh, OpCode::Log};
inline constexpr std::array<OpCode, 6> kElementBinary{OpCode::Add, OpCode::Sub,     OpCode::Mul,
                                                      OpCode::Div, OpCode::Greater, OpCode::Less};
inline constexpr std::array<OpCode, 2> kPairwise{OpCode::Cov, OpCode::Corr};
inline constexpr std::array<OpCode, 4> kSmoothers{OpCode::Ma, OpCode::Med, OpCode::Zscore, OpCode::Rank};

/// Operators interchangeable with `op` (same inputs and parameters).
inline std::vector<OpCode> same_kind(OpCode op) {
  const auto& info = op_info(op);
  std::vector<OpCode> out;
  for (const auto& o : kOperators)
    if (o.arity == info.arity && o.param_count == info.param_count && o.kind == info.kind && o.code != op)
      out.push_back(o.code);
  return out;
}

template <class C>
auto pick(Rng& rng, const C& c) {
  return c[rng.index(c.size())];
}

/// Hands out at most three parameter names, reusing earlier ones once the
/// budget is spent.
class ParamAllocator {
 public:
  explicit ParamAllocator(std::vector<std::string> taken = {}) : used_(std::move(taken)) {}

  std::string next(Rng& rng) {
    if (used_.size() < kParamNames.size() && (used_.empty() || rng.bernoulli(0.6))) {
      for (const char* n : kParamNames)
        if (std::find(used_.begin(), used_.end(), n) == used_.end()) {
          used_.emplace_back(n);
          return n;
        }
    }
    return used_[rng.index(used_.size())];
  }

 private:
  std::vector<std::string> used_;
};

inline ExprNode random_leaf(Rng& rng) { return leaf(pick(rng, kAllFeatures)); }

inline ExprNode grow(Rng& rng, int depth, ParamAllocator& params) {
  if (depth <= 0 || rng.bernoulli(0.25)) return random_leaf(rng);
  const double u = rng.uniform();
  if (u < 0.45) {
    const OpCode op = pick(rng, kRollingUnary);
    return apply(op, {grow(rng, depth - 1, params)}, {params.next(rng)});
  }
  if (u < 0.75) {
    const OpCode op = pick(rng, kElementBinary);
    return apply(op, {grow(rng, depth - 1, params), grow(rng, depth - 1, params)});
  }
  if (u < 0.9) {
    const OpCode op = pick(rng, kElementUnary);
    return apply(op, {grow(rng, depth - 1, params)});
  }
  const OpCode op = pick(rng, kPairwise);
  return apply(op, {grow(rng, depth - 1, params), grow(rng, depth - 1, params)}, {params.next(rng)});
}

inline ArgumentSet random_arguments(Rng& rng, const std::vector<std::string>& names, WindowRange r) {
  ArgumentSet set;
  for (const auto& n : names) set[n] = random_window(rng, r);
  return set;
}

/// Renames parameters to window_a.. in pre-order, folding any beyond the
/// third into the last kept name, and rebuilds the argument sets to match.
inline void normalize_params(AlphaFormula& f, WindowRange r) {
  const auto old_names = collect_param_names(f.root);
  std::map<std::string, std::string> rename;
  for (std::size_t k = 0; k < old_names.size(); ++k)
    rename[old_names[k]] = kParamNames[std::min(k, kParamNames.size() - 1)];
  for_each_node(f.root, [&](ExprNode& n) {
    for (auto& p : n.params) p = rename.at(p);
  });
  f.param_names = collect_param_names(f.root);
  std::vector<ArgumentSet> sets;
  for (const auto& old : f.argument_sets) {
    ArgumentSet s;
    for (const auto& name : old_names) {
      const auto& target = rename.at(name);
      if (s.count(target)) continue;
      auto it = old.find(name);
      s[target] = std::clamp(it == old.end() ? 10 : it->second, r.lo, r.hi);
    }
    if (std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(std::move(s));
  }
  if (sets.empty()) sets.emplace_back();
  if (sets.size() > kMaxArgumentSets) sets.resize(kMaxArgumentSets);
  for (auto& s : sets)
    for (const auto& n : f.param_names)
      if (!s.count(n)) s[n] = std::clamp(10, r.lo, r.hi);
  f.argument_sets = std::move(sets);
}

inline bool avoids(const AlphaFormula& f, const std::vector<RootGene>& avoid) {
  for (const auto& g : avoid)
    if (contains_gene(f, g)) return false;
  return true;
}

/// Shapes that are constant across stocks whatever the data: an operation on
/// two identical inputs, a comparison between a bar's high or low and another
/// price, the sign of a raw field.
inline bool degenerate(const AlphaFormula& f) {
  auto is_price = [](const ExprNode& n) { return n.is_leaf() && n.feature != Feature::volume; };
  bool bad = false;
  for_each_node(f.root, [&](const ExprNode& n) {
    if (n.is_leaf() || bad) return;
    if (n.children.size() == 2 && n.children[0] == n.children[1]) bad = true;
    if ((n.op == OpCode::Greater || n.op == OpCode::Less) && is_price(n.children[0]) && is_price(n.children[1])) {
      const auto a = n.children[0].feature, b = n.children[1].feature;
      if (a == Feature::high || a == Feature::low || b == Feature::high || b == Feature::low) bad = true;
    }
    if (n.op == OpCode::Sign && n.children[0].is_leaf()) bad = true;
  });
  return bad;
}

inline bool acceptable(const AlphaFormula& f, WindowRange r, const std::vector<RootGene>& avoid) {
  return validate(f, r).empty() && avoids(f, avoid) && node_count(f.root) <= 15 && !degenerate(f);
}

/// A random valid formula with 2-5 operations.
inline AlphaFormula random_formula(Rng& rng, WindowRange r, const std::vector<RootGene>& avoid = {}) {
  for (int attempt = 0;; ++attempt) {
    ParamAllocator params;
    AlphaFormula f;
    f.root = grow(rng, 2 + static_cast<int>(rng.index(2)), params);
    const auto ops = op_count(f.root);
    if (ops < 2 || ops > 5) continue;
    f.param_names = collect_param_names(f.root);
    const std::size_t sets = 1 + rng.index(kMaxArgumentSets);
    for (std::size_t k = 0; k < sets; ++k) {
      auto s = random_arguments(rng, f.param_names, r);
      if (std::find(f.argument_sets.begin(), f.argument_sets.end(), s) == f.argument_sets.end())
        f.argument_sets.push_back(std::move(s));
    }
    normalize_params(f, r);
    if (acceptable(f, r, avoid) || attempt > 500) return f;
  }
}

// Mutations. Each returns nullopt when it does not apply to the formula.

struct Mutation {
  AlphaFormula formula;
  std::string label;
};

/// Pointers to every node, pre-order.
inline std::vector<ExprNode*> nodes_of(ExprNode& root) {
  std::vector<ExprNode*> out;
  for_each_node(root, [&](ExprNode& n) { out.push_back(&n); });
  return out;
}

inline std::vector<ExprNode*> op_nodes_of(ExprNode& root) {
  auto all = nodes_of(root);
  std::erase_if(all, [](ExprNode* n) { return n->is_leaf(); });
  return all;
}

inline std::optional<Mutation> swap_operator(const AlphaFormula& parent, Rng& rng) {
  AlphaFormula f = parent;
  auto ops = op_nodes_of(f.root);
  if (ops.empty()) return std::nullopt;
  ExprNode* n = pick(rng, ops);
  const auto alts = same_kind(n->op);
  if (alts.empty()) return std::nullopt;
  const OpCode from = n->op;
  n->op = pick(rng, alts);
  return Mutation{std::move(f), "operator swap " + std::string(op_name(from)) + "->" + std::string(op_name(n->op))};
}

/// Moves one parameter to a neighbouring pool value in every argument set.
/// direction: -1 shorter, +1 longer, 0 either.
inline std::optional<Mutation> tweak_window(const AlphaFormula& parent, Rng& rng, WindowRange r, int direction = 0) {
  if (parent.param_names.empty()) return std::nullopt;
  AlphaFormula f = parent;
  const auto pool = window_pool(r);
  const auto name = pick(rng, f.param_names);
  const int dir = direction != 0 ? direction : (rng.bernoulli(0.5) ? 1 : -1);
  bool changed = false;
  for (auto& s : f.argument_sets) {
    const int cur = s[name];
    auto it = std::lower_bound(pool.begin(), pool.end(), cur);
    std::ptrdiff_t idx = it - pool.begin();
    if (dir > 0) idx = (it != pool.end() && *it == cur) ? idx + 1 : idx;
    else idx = idx - 1;
    if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(pool.size())) continue;
    s[name] = pool[static_cast<std::size_t>(idx)];
    changed = true;
  }
  if (!changed) return std::nullopt;
  return Mutation{std::move(f), "parameter tweak " + name};
}

/// Replaces a random subtree with a subtree of an exemplar, carrying the
/// exemplar's chosen windows along.
inline std::optional<Mutation> graft(const AlphaFormula& parent, const AlphaFormula& donor, std::size_t donor_set,
                                     Rng& rng, WindowRange r) {
  AlphaFormula d = donor;
  auto donor_ops = op_nodes_of(d.root);
  if (donor_ops.empty()) return std::nullopt;
  ExprNode piece = *pick(rng, donor_ops);
  const ArgumentSet donor_args =
      donor_set < donor.argument_sets.size() ? donor.argument_sets[donor_set] : ArgumentSet{};
  std::map<std::string, std::string> rename;
  for_each_node(piece, [&](ExprNode& n) {
    for (auto& p : n.params) {
      auto [it, fresh] = rename.emplace(p, "graft_" + std::to_string(rename.size()));
      p = it->second;
    }
  });
  AlphaFormula f = parent;
  auto targets = nodes_of(f.root);
  ExprNode* slot = pick(rng, targets);
  *slot = std::move(piece);
  for (auto& s : f.argument_sets)
    for (const auto& [from, to] : rename) {
      auto it = donor_args.find(from);
      s[to] = it == donor_args.end() ? random_window(rng, r) : it->second;
    }
  normalize_params(f, r);
  return Mutation{std::move(f), "exemplar graft"};
}

inline std::optional<Mutation> regrow(const AlphaFormula& parent, Rng& rng, WindowRange r) {
  AlphaFormula f = parent;
  auto targets = nodes_of(f.root);
  ExprNode* slot = pick(rng, targets);
  ParamAllocator params(f.param_names);
  *slot = grow(rng, 2, params);
  for (const auto& n : collect_param_names(f.root))
    for (auto& s : f.argument_sets)
      if (!s.count(n)) s[n] = random_window(rng, r);
  normalize_params(f, r);
  return Mutation{std::move(f), "subtree regrowth"};
}

inline std::optional<Mutation> wrap(const AlphaFormula& parent, Rng& rng, WindowRange r, OpCode op) {
  AlphaFormula f = parent;
  ParamAllocator params(f.param_names);
  const auto name = params.next(rng);
  f.root = apply(op, {std::move(f.root)}, {name});
  for (auto& s : f.argument_sets)
    if (!s.count(name)) s[name] = random_window(rng, r);
  normalize_params(f, r);
  return Mutation{std::move(f), "smoothing wrap " + std::string(op_name(op))};
}

/// Replaces one operator node by one of its inputs.
inline std::optional<Mutation> shrink(const AlphaFormula& parent, Rng& rng, WindowRange r) {
  AlphaFormula f = parent;
  auto ops = op_nodes_of(f.root);
  std::erase_if(ops, [](ExprNode* n) {
    return std::all_of(n->children.begin(), n->children.end(), [](const ExprNode& c) { return c.is_leaf(); });
  });
  if (ops.empty()) return std::nullopt;
  ExprNode* n = pick(rng, ops);
  ExprNode keep = pick(rng, n->children);
  *n = std::move(keep);
  normalize_params(f, r);
  return Mutation{std::move(f), "simplification"};
}

inline std::optional<Mutation> combine(const AlphaFormula& parent, Rng& rng, WindowRange r) {
  AlphaFormula f = parent;
  ParamAllocator params(f.param_names);
  ExprNode other = grow(rng, 1, params);
  const OpCode op = pick(rng, std::array<OpCode, 4>{OpCode::Add, OpCode::Sub, OpCode::Mul, OpCode::Div});
  f.root = apply(op, {std::move(f.root), std::move(other)});
  for (const auto& n : collect_param_names(f.root))
    for (auto& s : f.argument_sets)
      if (!s.count(n)) s[n] = random_window(rng, r);
  normalize_params(f, r);
  return Mutation{std::move(f), "combination with " + std::string(op_name(op))};
}

/// Merges two parameters into one.
inline std::optional<Mutation> merge_params(const AlphaFormula& parent, WindowRange r) {
  if (parent.param_names.size() < 2) return std::nullopt;
  AlphaFormula f = parent;
  const auto keep = f.param_names[0];
  const auto drop = f.param_names.back();
  for_each_node(f.root, [&](ExprNode& n) {
    for (auto& p : n.params)
      if (p == drop) p = keep;
  });
  for (auto& s : f.argument_sets) s.erase(drop);
  normalize_params(f, r);
  return Mutation{std::move(f), "parameter merge"};
}

inline constexpr std::array<Feature, 5> kPriceFields{Feature::open, Feature::high, Feature::low, Feature::close,
                                                     Feature::vwap};

inline std::vector<ExprNode*> leaves_of(ExprNode& root) {
  auto all = nodes_of(root);
  std::erase_if(all, [](ExprNode* n) { return !n->is_leaf(); });
  return all;
}

/// Replaces one input field with another.
inline std::optional<Mutation> swap_field(const AlphaFormula& parent, Rng& rng) {
  AlphaFormula f = parent;
  ExprNode* n = pick(rng, leaves_of(f.root));
  std::vector<Feature> alts;
  for (auto x : kAllFeatures)
    if (x != n->feature) alts.push_back(x);
  const Feature from = n->feature;
  n->feature = pick(rng, alts);
  return Mutation{std::move(f), "field swap " + std::string(feature_name(from)) + "->" +
                                    std::string(feature_name(n->feature))};
}

/// Turns one price input into its spread against another price field.
inline std::optional<Mutation> insert_spread(const AlphaFormula& parent, Rng& rng) {
  AlphaFormula f = parent;
  auto slots = leaves_of(f.root);
  std::erase_if(slots, [](ExprNode* n) { return n->feature == Feature::volume; });
  if (slots.empty()) return std::nullopt;
  ExprNode* n = pick(rng, slots);
  std::vector<Feature> others;
  for (auto x : kPriceFields)
    if (x != n->feature) others.push_back(x);
  const Feature base = n->feature, other = pick(rng, others);
  *n = apply(OpCode::Sub, {leaf(base), leaf(other)});
  return Mutation{std::move(f), "spread " + std::string(feature_name(base)) + "-" + std::string(feature_name(other))};
}

struct DonorAlpha {
  AlphaFormula formula;
  std::size_t chosen_argument_set = 0;
};

/// A local variant of an exemplar: its chosen windows with one parameter
/// moved or one input field replaced.
inline std::optional<Mutation> exemplar_variant(const DonorAlpha& donor, Rng& rng, WindowRange r) {
  AlphaFormula base = donor.formula;
  if (donor.chosen_argument_set < base.argument_sets.size())
    base.argument_sets = {base.argument_sets[donor.chosen_argument_set]};
  auto m = rng.bernoulli(0.6) ? tweak_window(base, rng, r) : swap_field(base, rng);
  if (!m) return std::nullopt;
  m->label = "exemplar variant (" + m->label + ")";
  return m;
}

/// Negates the alpha, or strips an outer negation.
inline Mutation flip_sign(const AlphaFormula& parent) {
  AlphaFormula f = parent;
  if (!f.root.is_leaf() && f.root.op == OpCode::Neg) {
    ExprNode inner = std::move(f.root.children.front());
    f.root = std::move(inner);
  } else {
    f.root = apply(OpCode::Neg, {std::move(f.root)});
  }
  return Mutation{std::move(f), "sign flip"};
}

/// One refinement step aimed at `dim`: a mutation drawn from a
/// dimension-specific mix, retried until the result is valid, avoids the
/// banned genes and differs from the parent. A parent with negative RankIC
/// is usually flipped first.
inline Mutation mutate(const AlphaFormula& parent, Dimension dim, const std::vector<DonorAlpha>& donors, Rng& rng,
                       WindowRange r, const std::vector<RootGene>& avoid,
                       double parent_rank_ic = std::numeric_limits<double>::quiet_NaN()) {
  if (parent_rank_ic < 0 && rng.bernoulli(dim == Dimension::Effectiveness ? 0.9 : 0.6)) {
    auto m = flip_sign(parent);
    if (acceptable(m.formula, r, avoid)) return m;
  }
  enum Kind { kSwap, kTweak, kLonger, kGraft, kRegrow, kSmooth, kShrink, kCombine, kMerge, kVariant, kField };
  std::vector<std::pair<Kind, double>> mix;
  const bool weak = std::abs(parent_rank_ic) < 0.03;
  switch (dim) {
    case Dimension::Effectiveness:
      if (weak)
        mix = {{kVariant, 3}, {kRegrow, 3}, {kGraft, 2}, {kSwap, 2}, {kField, 1}};
      else
        mix = {{kTweak, 4}, {kField, 3}, {kVariant, 2}, {kSwap, 1}, {kGraft, 1}};
      break;
    case Dimension::Stability:
      mix = {{kSmooth, 2}, {kLonger, 2}, {kTweak, 2}, {kSwap, 1}, {kGraft, 2}};
      break;
    case Dimension::Turnover:
      mix = {{kSmooth, 3}, {kLonger, 3}, {kShrink, 1}, {kTweak, 1}};
      break;
    case Dimension::Diversity:
      mix = {{kRegrow, 3}, {kSwap, 2}, {kGraft, 2}, {kCombine, 1}};
      break;
    case Dimension::OverfittingRisk:
      mix = {{kShrink, 3}, {kMerge, 2}, {kTweak, 1}};
      break;
  }
  double total = 0;
  for (const auto& [k, w] : mix) total += w;
  for (int attempt = 0; attempt < 60; ++attempt) {
    double u = rng.uniform() * total;
    Kind kind = mix.back().first;
    for (const auto& [k, w] : mix) {
      if (u < w) {
        kind = k;
        break;
      }
      u -= w;
    }
    std::optional<Mutation> m;
    switch (kind) {
      case kSwap:
        m = swap_operator(parent, rng);
        break;
      case kTweak:
        m = tweak_window(parent, rng, r);
        break;
      case kLonger:
        m = tweak_window(parent, rng, r, +1);
        break;
      case kGraft:
        if (!donors.empty()) {
          const auto& d = pick(rng, donors);
          m = graft(parent, d.formula, d.chosen_argument_set, rng, r);
        } else {
          m = regrow(parent, rng, r);
        }
        break;
      case kRegrow:
        m = regrow(parent, rng, r);
        break;
      case kSmooth:
        m = wrap(parent, rng, r, pick(rng, kSmoothers));
        break;
      case kShrink:
        m = shrink(parent, rng, r);
        break;
      case kCombine:
        m = combine(parent, rng, r);
        break;
      case kMerge:
        m = merge_params(parent, r);
        break;
      case kField:
        m = swap_field(parent, rng);
        break;
      case kVariant:
        m = donors.empty() ? tweak_window(parent, rng, r) : exemplar_variant(pick(rng, donors), rng, r);
        break;
    }
    if (!m || structurally_equal(m->formula, parent)) continue;
    if (!acceptable(m->formula, r, avoid)) continue;
    return std::move(*m);
  }
  AlphaFormula fresh = random_formula(rng, r, avoid);
  return Mutation{std::move(fresh), "fresh restart"};
}

}  // namespace alphamcts::grammar
