#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphamcts/chat.hpp"
#include "alphamcts/generator.hpp"
#include "alphamcts/grammar.hpp"

namespace alphamcts {

namespace mockchat {

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

/// Text between `start` and the next occurrence of `stop` (or the end).
inline std::string between(const std::string& text, const std::string& start, const std::string& stop = {}) {
  const auto a = text.find(start);
  if (a == std::string::npos) return {};
  const auto from = a + start.size();
  const auto b = stop.empty() ? std::string::npos : text.find(stop, from);
  return text.substr(from, b == std::string::npos ? std::string::npos : b - from);
}

/// Value of the first line that starts with `prefix`.
inline std::optional<std::string> line_value(const std::string& text, const std::string& prefix) {
  for (const auto& l : lines_of(text))
    if (l.rfind(prefix, 0) == 0) return l.substr(prefix.size());
  return std::nullopt;
}

inline WindowRange window_range_in(const std::string& text) {
  static const std::regex re(R"((?:within the|between)\s*\[(\d+),\s*(\d+)\])");
  std::smatch m;
  if (std::regex_search(text, m, re)) return {std::stoi(m[1].str()), std::stoi(m[2].str())};
  return {};
}

/// Genes listed after "sub-expressions:" up to the next blank line.
inline std::vector<RootGene> avoided_genes_in(const std::string& text) {
  std::vector<RootGene> out;
  const auto block = between(text, "sub-expressions:", "\n\n");
  for (const auto& l : lines_of(block)) {
    const auto t = std::string(detail::trim(l));
    if (t.empty() || t == "(none)") continue;
    try {
      out.push_back(make_gene(parse_expression(t).root));
    } catch (const InterchangeError&) {
    }
  }
  return out;
}

inline std::optional<AlphaFormula> formula_from_lines(const std::string& expr, const std::string& args) {
  try {
    AlphaFormula f = parse_expression(expr);
    const auto j = nlohmann::json::parse(args);
    if (j.is_array() && !j.empty()) {
      f.argument_sets.clear();
      for (const auto& s : j) {
        ArgumentSet a;
        for (const auto& [k, v] : s.items()) a[k] = v.get<int>();
        f.argument_sets.push_back(std::move(a));
      }
    }
    return f;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::string windows_note(const AlphaFormula& f) {
  std::string out;
  for (const auto& s : f.argument_sets) {
    if (!out.empty()) out += " |";
    for (const auto& n : f.param_names) out += " " + n + "=" + std::to_string(s.at(n));
  }
  return out.empty() ? std::string() : " Windows:" + out;
}

inline std::vector<ArgumentSet> windows_from_note(const std::string& description) {
  std::vector<ArgumentSet> out;
  const auto pos = description.find("Windows:");
  if (pos == std::string::npos) return out;
  static const std::regex kv(R"((\w+)=(\d+))");
  for (const auto& chunk : detail::split(std::string_view(description).substr(pos + 8), '|')) {
    ArgumentSet s;
    const std::string text(chunk);
    for (std::sregex_iterator it(text.begin(), text.end(), kv), end; it != end; ++it)
      s[(*it)[1].str()] = std::stoi((*it)[2].str());
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mockchat

/// Offline stand-in for a chat model. It reads the same prompts a real model
/// would get and answers each request kind in the expected format, using the
/// formula grammar for its ideas. Deterministic for a given seed and
/// request sequence.
class MockChatTransport : public ChatTransport {
 public:
  explicit MockChatTransport(std::uint64_t seed) : rng_(seed) {}

  ChatResponse complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    const std::string prompt = request.messages.empty() ? std::string() : request.messages.back().content;
    ++calls_;
    if (request.kind == "portrait") return {portrait(prompt)};
    if (request.kind == "formula") return {formula(prompt)};
    if (request.kind == "suggestions") return {suggestions(prompt)};
    if (request.kind == "refine") return {refine(prompt)};
    if (request.kind == "repair") return {repair(prompt)};
    if (request.kind == "overfitting") return {overfitting(prompt)};
    if (request.kind == "summarize") return {summarize(prompt)};
    return {"I can only help with alpha design requests."};
  }

  std::size_t calls() const { return calls_; }
  std::string save_state() const { return rng_.save() + ";" + std::to_string(counter_); }
  void load_state(const std::string& s) {
    const auto cut = s.rfind(';');
    rng_.load(s.substr(0, cut));
    counter_ = std::stoul(s.substr(cut + 1));
  }

 private:
  std::string portrait(const std::string& prompt) {
    AlphaFormula f = grammar::random_formula(rng_, WindowRange{}, mockchat::avoided_genes_in(prompt));
    f.name = "composed_alpha_" + std::to_string(++counter_);
    f.description = "Seed idea from the offline model." + mockchat::windows_note(f);
    return "```json\n" + portrait_json(f).dump(4) + "\n```";
  }

  std::string formula(const std::string& prompt) {
    const auto range = mockchat::window_range_in(prompt);
    const auto portrait = extract_json_object(mockchat::between(prompt, "Alpha Requirements:"));
    nlohmann::ordered_json doc;
    std::vector<std::string> lines;
    std::string description;
    if (portrait && portrait->is_object()) {
      if (portrait->contains("name")) doc["name"] = (*portrait)["name"];
      if (portrait->contains("description") && (*portrait)["description"].is_string()) {
        description = (*portrait)["description"].get<std::string>();
        doc["description"] = description;
      }
      if (auto it = portrait->find("pseudo_code"); it != portrait->end() && it->is_array())
        for (const auto& l : *it)
          if (l.is_string()) lines.push_back(l.get<std::string>());
    }
    doc["formula"] = steps_from_pseudo_code(lines);
    std::vector<std::string> names;
    for (const auto& step : doc["formula"])
      for (const auto& p : step["param"]) {
        const auto n = p.get<std::string>();
        if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
      }
    auto sets = mockchat::windows_from_note(description);
    if (sets.empty()) sets.push_back({});
    auto args = nlohmann::ordered_json::array();
    for (auto& s : sets) {
      nlohmann::ordered_json obj = nlohmann::ordered_json::object();
      for (const auto& n : names) {
        const auto it = s.find(n);
        obj[n] = std::clamp(it == s.end() ? grammar::random_window(rng_, range) : it->second, range.lo, range.hi);
      }
      args.push_back(std::move(obj));
    }
    doc["arguments"] = args;
    return "```json\n" + doc.dump(4) + "\n```";
  }

  std::string suggestions(const std::string& prompt) {
    static const std::regex target_re(R"(raise its (.+?) score)");
    std::smatch m;
    std::string target = "Effectiveness";
    if (std::regex_search(prompt, m, target_re)) target = m[1].str();
    std::string out = "Target: " + target + "\n";
    const double ric = summary_rank_ic(prompt);
    if (std::isfinite(ric)) out += "Parent RankIC " + detail::format_double(ric) + "\n";
    out += "1. Revisit the window lengths against the holding horizon.\n";
    out += "2. Consider borrowing structure from the accepted alphas listed.\n";
    const auto pool = mockchat::between(prompt, "borrow ideas from:", "Earlier refinements");
    std::optional<std::string> expr;
    for (const auto& l : mockchat::lines_of(pool)) {
      if (l.rfind("expression: ", 0) == 0) expr = l.substr(12);
      if (l.rfind("arguments: ", 0) == 0 && expr) {
        out += "donor expression: " + *expr + "\ndonor arguments: " + l.substr(11) + "\n";
        expr.reset();
      }
    }
    return out;
  }

  std::string refine(const std::string& prompt) {
    const auto avoid = mockchat::avoided_genes_in(prompt);
    const auto target = dimension_from_name(mockchat::line_value(prompt, "Target: ").value_or("Effectiveness"));
    const auto dim = target.value_or(Dimension::Effectiveness);
    std::vector<grammar::DonorAlpha> donors;
    std::optional<std::string> dexpr;
    for (const auto& l : mockchat::lines_of(prompt)) {
      if (l.rfind("donor expression: ", 0) == 0) dexpr = l.substr(18);
      if (l.rfind("donor arguments: ", 0) == 0 && dexpr) {
        if (auto f = mockchat::formula_from_lines(*dexpr, l.substr(17))) donors.push_back({*f, 0});
        dexpr.reset();
      }
    }
    const auto origin = mockchat::formula_from_lines(mockchat::line_value(prompt, "expression: ").value_or(""),
                                                     mockchat::line_value(prompt, "arguments: ").value_or("[]"));
    grammar::Mutation m;
    if (origin) {
      m = grammar::mutate(*origin, dim, donors, rng_, WindowRange{}, avoid,
                          summary_rank_ic(mockchat::line_value(prompt, "Parent ").value_or("")));
    } else {
      m = {grammar::random_formula(rng_, WindowRange{}, avoid), "fresh restart"};
    }
    m.formula.name = "revised_alpha_" + std::to_string(++counter_);
    m.formula.description =
        std::string(dimension_name(dim)) + " refinement: " + m.label + "." + mockchat::windows_note(m.formula);
    return "```json\n" + portrait_json(m.formula).dump(4) + "\n```";
  }

  std::string repair(const std::string& prompt) {
    GenerationContext ctx;
    ctx.window = mockchat::window_range_in(prompt);
    ctx.avoid = mockchat::avoided_genes_in(prompt);
    const auto doc = extract_json_object(mockchat::between(prompt, "Rejected formula:", "Problems:"));
    return mock_repair(doc, ctx, rng_).dump(4);
  }

  std::string overfitting(const std::string& prompt) {
    std::size_t nodes = 0;
    const auto expr = std::string(detail::trim(mockchat::between(prompt, "Alpha Expression:", "- Refinement History:")));
    try {
      nodes = node_count(parse_expression(expr).root);
    } catch (const InterchangeError&) {
      nodes = 9;
    }
    const auto history = mockchat::between(prompt, "Refinement History:", "Evaluation Criteria:");
    const auto tweaks = count_occurrences(history, "parameter tweak");
    nlohmann::ordered_json j;
    j["reason"] = "Expression has " + std::to_string(nodes) + " nodes; history shows " + std::to_string(tweaks) +
                  " window tweak(s).";
    j["score"] = heuristic_overfitting_score(nodes, tweaks);
    return j.dump(4);
  }

  std::string summarize(const std::string& prompt) {
    const auto dim = mockchat::line_value(prompt, "Targeted dimension: ").value_or("?");
    const auto after = mockchat::between(prompt, "After:", "Score changes");
    const auto note = mockchat::line_value(after, "description: ").value_or("");
    auto changes = std::string(detail::trim(mockchat::between(prompt, "(after minus before):", "Reply with")));
    std::replace(changes.begin(), changes.end(), '\n', ',');
    return dim + " targeted. " + note + " Score changes: " + changes + ".";
  }

  Rng rng_;
  std::size_t counter_ = 0;
  std::size_t calls_ = 0;
  std::mutex mu_;
};

}  // namespace alphamcts
