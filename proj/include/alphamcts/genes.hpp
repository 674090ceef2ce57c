#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "alphamcts/expr.hpp"

namespace alphamcts {

// A root gene is a complete subtree grown upward from raw-feature leaves,
// with operator parameters abstracted away. Since formula trees hold no
// numeric constants, these are exactly the full subtrees rooted at each node.

struct RootGene {
  ExprNode pattern;  ///< parameters replaced by the wildcard "t"
  std::string key;   ///< canonical prefix text, e.g. `Ma(vwap,t)`

  bool operator==(const RootGene& o) const { return key == o.key; }
  bool operator<(const RootGene& o) const { return key < o.key; }
};

inline ExprNode wildcard_params(ExprNode n) {
  for_each_node(n, [](ExprNode& m) {
    for (auto& p : m.params) p = "t";
  });
  return n;
}

inline std::string gene_key(const ExprNode& n) { return to_prefix(n, ParamStyle::wildcard); }

inline RootGene make_gene(const ExprNode& subtree) {
  RootGene g{wildcard_params(subtree), {}};
  g.key = gene_key(g.pattern);
  return g;
}

/// Readable form with `t` for parameters, e.g. `Std(high-low,t)`.
inline std::string gene_infix(const RootGene& g) { return to_infix(g.pattern, ParamStyle::wildcard); }

/// Distinct genes of a tree, sorted by key.
inline std::vector<RootGene> root_genes(const ExprNode& root) {
  std::vector<RootGene> out;
  for_each_node(root, [&](const ExprNode& n) { out.push_back(make_gene(n)); });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<RootGene> root_genes(const AlphaFormula& f) { return root_genes(f.root); }

namespace detail {

inline bool matches_wildcard(const ExprNode& n, const ExprNode& pattern) {
  if (n.kind != pattern.kind) return false;
  if (n.is_leaf()) return n.feature == pattern.feature;
  if (n.op != pattern.op || n.children.size() != pattern.children.size() || n.params.size() != pattern.params.size())
    return false;
  for (std::size_t k = 0; k < n.children.size(); ++k)
    if (!matches_wildcard(n.children[k], pattern.children[k])) return false;
  return true;
}

}  // namespace detail

inline bool contains_gene(const ExprNode& root, const RootGene& gene) {
  if (detail::matches_wildcard(root, gene.pattern)) return true;
  for (const auto& c : root.children)
    if (contains_gene(c, gene)) return true;
  return false;
}

inline bool contains_gene(const AlphaFormula& f, const RootGene& gene) { return contains_gene(f.root, gene); }

}  // namespace alphamcts
