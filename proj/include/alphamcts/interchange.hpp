#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphamcts/error.hpp"
#include "alphamcts/expr.hpp"

namespace alphamcts {

// Formula interchange document:
//
//   {"name": ..., "description": ...,
//    "formula": [{"name": "Ma", "param": ["w"], "input": ["close"], "output": "ma_0"}, ...],
//    "arguments": [{"w": 5}, ...]}
//
// Steps are three-address operations stitched together through their
// output/input variable names. A bare field formula has no steps and names
// the field under a top-level "output" key.

namespace detail {

inline bool looks_numeric(std::string_view s) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '-' || s.front() == '+' || s.front() == '.') return s.size() > 1 && (std::isdigit(static_cast<unsigned char>(s[1])) || s[1] == '.');
  return std::isdigit(static_cast<unsigned char>(s.front())) != 0;
}

inline std::vector<std::string> string_list(const nlohmann::json& step, const char* key, std::size_t index) {
  const auto it = step.find(key);
  if (it == step.end()) return {};
  std::vector<std::string> out;
  if (it->is_string()) {
    out.push_back(it->get<std::string>());
    return out;
  }
  if (!it->is_array()) throw InterchangeError("step " + std::to_string(index) + ": '" + key + "' must be a list");
  for (const auto& v : *it) {
    if (v.is_number()) throw InterchangeError("step " + std::to_string(index) + ": numeric " + key + " '" + v.dump() + "' is not allowed");
    if (!v.is_string()) throw InterchangeError("step " + std::to_string(index) + ": '" + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

struct Step {
  OpCode op;
  std::vector<std::string> params;
  std::vector<std::string> inputs;
  std::string output;
};

}  // namespace detail

/// Builds an AlphaFormula from an interchange document. Throws
/// InterchangeError on malformed JSON, unknown operators, arity/parameter
/// mismatches, numeric inputs, dangling or cyclic references, and anything
/// other than exactly one terminal output.
inline AlphaFormula parse_interchange(const nlohmann::json& doc) {
  using detail::Step;
  if (!doc.is_object()) throw InterchangeError("document must be a JSON object");
  const auto formula_it = doc.find("formula");
  if (formula_it == doc.end() || !formula_it->is_array()) throw InterchangeError("missing 'formula' list");

  AlphaFormula out;
  if (auto it = doc.find("name"); it != doc.end() && it->is_string()) out.name = it->get<std::string>();
  if (auto it = doc.find("description"); it != doc.end() && it->is_string()) out.description = it->get<std::string>();

  std::vector<Step> steps;
  std::map<std::string, std::size_t> producer;
  for (std::size_t k = 0; k < formula_it->size(); ++k) {
    const auto& s = (*formula_it)[k];
    const auto where = "step " + std::to_string(k);
    if (!s.is_object()) throw InterchangeError(where + ": must be an object");
    const auto name_it = s.find("name");
    if (name_it == s.end() || !name_it->is_string()) throw InterchangeError(where + ": missing operator 'name'");
    const auto op_text = name_it->get<std::string>();
    const auto op = op_from_name(op_text);
    if (!op) throw InterchangeError(where + ": unknown operator '" + op_text + "'");
    Step step{*op, detail::string_list(s, "param", k), detail::string_list(s, "input", k), {}};
    const auto out_it = s.find("output");
    if (out_it == s.end() || !out_it->is_string() || out_it->get<std::string>().empty())
      throw InterchangeError(where + ": missing 'output'");
    step.output = std::string(detail::trim(out_it->get<std::string>()));
    const auto& info = op_info(*op);
    if (static_cast<int>(step.inputs.size()) != info.arity)
      throw InterchangeError(where + ": " + std::string(info.name) + " takes " + std::to_string(info.arity) +
                             " input(s), got " + std::to_string(step.inputs.size()));
    if (static_cast<int>(step.params.size()) != info.param_count)
      throw InterchangeError(where + ": " + std::string(info.name) + " takes " + std::to_string(info.param_count) +
                             " parameter(s), got " + std::to_string(step.params.size()));
    for (auto& in : step.inputs) {
      in = std::string(detail::trim(in));
      if (detail::looks_numeric(in)) throw InterchangeError(where + ": numeric input '" + in + "' is not allowed");
    }
    for (const auto& p : step.params)
      if (detail::looks_numeric(p) || detail::trim(p).empty())
        throw InterchangeError(where + ": parameter '" + p + "' must be a name, not a value");
    if (feature_from_name(step.output)) throw InterchangeError(where + ": output '" + step.output + "' shadows a data field");
    if (!producer.emplace(step.output, k).second)
      throw InterchangeError(where + ": output '" + step.output + "' defined twice");
    steps.push_back(std::move(step));
  }

  if (steps.empty()) {
    const auto it = doc.find("output");
    if (it == doc.end() || !it->is_string()) throw InterchangeError("empty 'formula' list");
    const auto f = feature_from_name(it->get<std::string>());
    if (!f) throw InterchangeError("output '" + it->get<std::string>() + "' is not a data field");
    out.root = leaf(*f);
  } else {
    std::set<std::string> consumed;
    for (const auto& s : steps)
      for (const auto& in : s.inputs) {
        if (feature_from_name(in)) continue;
        if (!producer.count(in)) throw InterchangeError("undefined variable '" + in + "'");
        consumed.insert(in);
      }
    std::vector<std::string> terminals;
    for (const auto& s : steps)
      if (!consumed.count(s.output)) terminals.push_back(s.output);

    // Cycle check over every step, reachable or not.
    std::vector<int> state(steps.size(), 0);  // 0 new, 1 on stack, 2 done
    std::function<void(std::size_t)> visit = [&](std::size_t k) {
      if (state[k] == 2) return;
      if (state[k] == 1) throw InterchangeError("cyclic reference through '" + steps[k].output + "'");
      state[k] = 1;
      for (const auto& in : steps[k].inputs)
        if (auto it = producer.find(in); it != producer.end()) visit(it->second);
      state[k] = 2;
    };
    for (std::size_t k = 0; k < steps.size(); ++k) visit(k);

    if (terminals.size() != 1) {
      std::string names;
      for (const auto& t : terminals) names += (names.empty() ? "" : ", ") + t;
      throw InterchangeError("expected exactly one terminal output, found " + std::to_string(terminals.size()) +
                             (names.empty() ? "" : " (" + names + ")"));
    }
    std::function<ExprNode(const std::string&)> build = [&](const std::string& var) -> ExprNode {
      if (auto f = feature_from_name(var)) return leaf(*f);
      const auto& s = steps[producer.at(var)];
      std::vector<ExprNode> kids;
      for (const auto& in : s.inputs) kids.push_back(build(in));
      std::vector<std::string> params;
      for (const auto& p : s.params) params.emplace_back(detail::trim(p));
      return apply(s.op, std::move(kids), std::move(params));
    };
    out.root = build(terminals.front());
  }
  out.param_names = collect_param_names(out.root);

  if (auto it = doc.find("arguments"); it != doc.end()) {
    // A single set given without the surrounding list is tolerated.
    const nlohmann::json sets = it->is_object() ? nlohmann::json::array({*it}) : *it;
    if (!sets.is_array()) throw InterchangeError("'arguments' must be a list of objects");
    for (const auto& set : sets) {
      if (!set.is_object()) throw InterchangeError("'arguments' entries must be objects");
      ArgumentSet args;
      for (const auto& [key, value] : set.items()) {
        double v = 0.0;
        if (value.is_number_integer() || value.is_number_unsigned()) {
          v = static_cast<double>(value.get<long long>());
        } else if (value.is_number_float()) {
          v = value.get<double>();
          if (v != std::floor(v)) throw InterchangeError("argument '" + key + "' must be an integer");
        } else {
          throw InterchangeError("argument '" + key + "' must be a number");
        }
        if (std::abs(v) > 1e9) throw InterchangeError("argument '" + key + "' out of range");
        args[key] = static_cast<int>(v);
      }
      out.argument_sets.push_back(std::move(args));
    }
  }
  if (out.argument_sets.empty() && out.param_names.empty()) out.argument_sets.emplace_back();
  return out;
}

inline AlphaFormula parse_interchange(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InterchangeError(std::string("invalid JSON: ") + e.what());
  }
  return parse_interchange(doc);
}

inline AlphaFormula parse_interchange(const std::string& text) { return parse_interchange(std::string_view(text)); }
inline AlphaFormula parse_interchange(const char* text) { return parse_interchange(std::string_view(text)); }

/// Interchange document as ordered JSON. Step outputs are named
/// `<op>_<k>` in post-order; the final step writes `alpha`.
inline nlohmann::ordered_json interchange_json(const AlphaFormula& f) {
  nlohmann::ordered_json doc;
  doc["name"] = f.name;
  doc["description"] = f.description;
  auto steps = nlohmann::ordered_json::array();
  std::size_t counter = 0;
  std::function<std::string(const ExprNode&, bool)> emit = [&](const ExprNode& n, bool terminal) -> std::string {
    if (n.is_leaf()) return std::string(feature_name(n.feature));
    std::vector<std::string> inputs;
    for (const auto& c : n.children) inputs.push_back(emit(c, false));
    const auto out = terminal ? std::string("alpha") : detail::to_lower(op_name(n.op)) + "_" + std::to_string(counter++);
    nlohmann::ordered_json step;
    step["name"] = std::string(op_name(n.op));
    step["param"] = n.params;
    step["input"] = inputs;
    step["output"] = out;
    steps.push_back(std::move(step));
    return out;
  };
  if (f.root.is_leaf()) {
    doc["formula"] = steps;
    doc["output"] = std::string(feature_name(f.root.feature));
  } else {
    emit(f.root, true);
    doc["formula"] = steps;
  }
  auto args = nlohmann::ordered_json::array();
  for (const auto& set : f.argument_sets) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& name : f.param_names)
      if (auto it = set.find(name); it != set.end()) obj[name] = it->second;
    for (const auto& [name, value] : set)
      if (!obj.contains(name)) obj[name] = value;
    args.push_back(std::move(obj));
  }
  doc["arguments"] = args;
  return doc;
}

/// `indent < 0` gives the single-line form used in repository files.
inline std::string serialize_interchange(const AlphaFormula& f, int indent = -1) {
  return interchange_json(f).dump(indent);
}

}  // namespace alphamcts
