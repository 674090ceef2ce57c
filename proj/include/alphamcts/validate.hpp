#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "alphamcts/expr.hpp"

namespace alphamcts {

/// Inclusive range every bound window/lag value must fall in.
struct WindowRange {
  int lo = 2;
  int hi = 250;
  bool operator==(const WindowRange&) const = default;
};

inline std::string to_string(const WindowRange& r) {
  return "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
}

inline constexpr std::size_t kMaxParameters = 3;
inline constexpr std::size_t kMaxArgumentSets = 3;
inline constexpr std::size_t kMinOperations = 2;

struct Violation {
  std::string code;
  std::string message;
  bool operator==(const Violation&) const = default;
};

/// All reasons the formula may not enter the search. Empty means valid.
inline std::vector<Violation> validate(const AlphaFormula& f, WindowRange range) {
  std::vector<Violation> out;
  for_each_node(f.root, [&](const ExprNode& n) {
    if (n.is_leaf()) {
      if (!n.children.empty() || !n.params.empty())
        out.push_back({"arity", "field leaf '" + std::string(feature_name(n.feature)) + "' carries children or parameters"});
      return;
    }
    const auto& info = op_info(n.op);
    if (static_cast<int>(n.children.size()) != info.arity)
      out.push_back({"arity", std::string(info.name) + " expects " + std::to_string(info.arity) + " input(s), has " +
                                  std::to_string(n.children.size())});
    if (static_cast<int>(n.params.size()) != info.param_count)
      out.push_back({"param_count", std::string(info.name) + " expects " + std::to_string(info.param_count) +
                                        " parameter(s), has " + std::to_string(n.params.size())});
  });

  const auto ops = op_count(f.root);
  if (ops < kMinOperations)
    out.push_back({"too_few_operations", "formula uses " + std::to_string(ops) +
                                             " operation(s); at least two are required"});

  const auto names = collect_param_names(f.root);
  if (names.size() > kMaxParameters)
    out.push_back({"too_many_parameters", "formula declares " + std::to_string(names.size()) +
                                              " parameters; at most 3 are allowed"});
  if (f.param_names != names)
    out.push_back({"param_names", "declared parameter names do not match the parameters used in the tree"});

  if (f.argument_sets.empty() || f.argument_sets.size() > kMaxArgumentSets)
    out.push_back({"argument_sets", "expected 1 to 3 argument sets, got " + std::to_string(f.argument_sets.size())});

  const std::set<std::string> used(names.begin(), names.end());
  for (std::size_t k = 0; k < f.argument_sets.size(); ++k) {
    const auto& set = f.argument_sets[k];
    const auto where = "argument set " + std::to_string(k + 1);
    for (const auto& name : names) {
      auto it = set.find(name);
      if (it == set.end()) {
        out.push_back({"unbound_parameter", where + " does not bind parameter '" + name + "'"});
      } else if (it->second < range.lo || it->second > range.hi) {
        out.push_back({"window_range", where + ": parameter '" + name + "' = " + std::to_string(it->second) +
                                           " outside window range " + to_string(range)});
      }
    }
    for (const auto& [name, value] : set)
      if (!used.count(name)) out.push_back({"unknown_argument", where + " binds unused parameter '" + name + "'"});
  }
  return out;
}

inline std::string format_violations(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) out += "- " + v.message + "\n";
  return out;
}

}  // namespace alphamcts
