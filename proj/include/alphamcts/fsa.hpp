#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "alphamcts/expr.hpp"
#include "alphamcts/genes.hpp"

namespace alphamcts {

struct GenePattern {
  RootGene gene;
  std::size_t support = 0;  ///< formulas containing the gene
  std::size_t nodes = 0;
  bool closed = false;
};

namespace detail {

/// Calls fn(child_gene_key, parent_gene_key) for every parent/child pair.
inline void for_each_extension(const ExprNode& n,
                               const std::function<void(const std::string&, const std::string&)>& fn) {
  if (n.children.empty()) return;
  const auto parent = gene_key(n);
  for (const auto& c : n.children) {
    fn(gene_key(c), parent);
    for_each_extension(c, fn);
  }
}

}  // namespace detail

/// Every gene with support >= min_support, flagged closed when each of its
/// one-step extensions (the gene plus its parent node, with the parent's
/// other inputs) is contained in strictly fewer formulas. Sorted by support,
/// then node count, both descending, then canonical text.
inline std::vector<GenePattern> mine_genes(const std::vector<AlphaFormula>& formulas, std::size_t min_support) {
  std::map<std::string, GenePattern> table;
  std::map<std::string, std::set<std::string>> extensions;
  for (const auto& f : formulas) {
    for (auto& g : root_genes(f)) {
      auto& p = table[g.key];
      if (p.support == 0) {
        p.nodes = node_count(g.pattern);
        p.gene = std::move(g);
      }
      ++p.support;
    }
    detail::for_each_extension(f.root, [&](const std::string& child, const std::string& parent) {
      extensions[child].insert(parent);
    });
  }
  std::vector<GenePattern> out;
  for (auto& [key, p] : table) {
    if (p.support < std::max<std::size_t>(min_support, 1)) continue;
    p.closed = true;
    if (auto it = extensions.find(key); it != extensions.end())
      for (const auto& sup : it->second)
        if (table.at(sup).support == p.support) p.closed = false;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const GenePattern& a, const GenePattern& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.nodes != b.nodes) return a.nodes > b.nodes;
    return a.gene.key < b.gene.key;
  });
  return out;
}

inline std::vector<GenePattern> mine_closed_genes(const std::vector<AlphaFormula>& formulas, std::size_t min_support) {
  auto all = mine_genes(formulas, min_support);
  std::erase_if(all, [](const GenePattern& p) { return !p.closed; });
  return all;
}

/// Top k_avoid closed genes, skipping bare fields.
inline std::vector<RootGene> update_avoidance(const std::vector<AlphaFormula>& formulas, std::size_t k_avoid,
                                              std::size_t min_support = 2) {
  std::vector<RootGene> out;
  for (const auto& p : mine_closed_genes(formulas, min_support)) {
    if (out.size() >= k_avoid) break;
    if (p.gene.pattern.is_leaf()) continue;
    out.push_back(p.gene);
  }
  return out;
}

/// One gene per line in readable form, `t` standing for any window.
inline std::string render_avoidance(const std::vector<RootGene>& genes) {
  std::string out;
  for (const auto& g : genes) {
    if (!out.empty()) out += '\n';
    out += gene_infix(g);
  }
  return out;
}

}  // namespace alphamcts
