#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphamcts/chat.hpp"
#include "alphamcts/dimension.hpp"
#include "alphamcts/error.hpp"
#include "alphamcts/expr.hpp"
#include "alphamcts/fsa.hpp"
#include "alphamcts/genes.hpp"
#include "alphamcts/grammar.hpp"
#include "alphamcts/interchange.hpp"
#include "alphamcts/prompts.hpp"
#include "alphamcts/random.hpp"
#include "alphamcts/validate.hpp"

namespace alphamcts {

struct GenerationContext {
  std::vector<RootGene> avoid;
  WindowRange window;
};

struct ExemplarInfo {
  AlphaFormula formula;
  std::size_t chosen_argument_set = 0;
  std::string metrics;  ///< one-line metric summary
};

struct RefinementRequest {
  AlphaFormula parent;
  std::size_t parent_argument_set = 0;
  Dimension dimension = Dimension::Effectiveness;
  DimensionScores scores{};
  std::string evaluation_summary;
  std::vector<ExemplarInfo> exemplars;
  std::vector<std::string> history;  ///< refinement summaries around the parent
};

struct OverfittingAssessment {
  double score = 5.0;
  std::string reason;
  bool parsed = true;  ///< false when the reply could not be read and the neutral score was used
};

struct SummaryRequest {
  Dimension dimension = Dimension::Effectiveness;
  AlphaFormula parent;
  std::size_t parent_argument_set = 0;
  AlphaFormula child;
  std::size_t child_argument_set = 0;
  DimensionScores delta{};
  std::string change_note;
};

struct GeneratorStats {
  std::size_t seeds = 0;
  std::size_t refinements = 0;
  std::size_t repairs = 0;
  std::size_t failures = 0;
  std::size_t chat_calls = 0;
};

// Text renderings shared by prompts and the offline emulators.

inline std::string render_arguments(const AlphaFormula& f, std::optional<std::size_t> only = std::nullopt) {
  auto doc = interchange_json(f);
  if (only) return nlohmann::ordered_json::array({doc["arguments"].at(*only)}).dump();
  return doc["arguments"].dump();
}

/// "expression: <infix>\narguments: [...]".
inline std::string render_origin_formula(const AlphaFormula& f, std::optional<std::size_t> only = std::nullopt) {
  return "expression: " + to_infix(f.root) + "\narguments: " + render_arguments(f, only);
}

inline std::string render_scores(const DimensionScores& s, bool signed_values = false) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  for (auto d : kAllDimensions) {
    if (d != Dimension::Effectiveness) out << '\n';
    const double v = s[static_cast<std::size_t>(d)];
    out << dimension_name(d) << ": " << (signed_values && v >= 0 ? "+" : "") << v;
  }
  return out.str();
}

inline std::string render_history(const std::vector<std::string>& history) {
  if (history.empty()) return "(none)";
  std::string out;
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (k) out += '\n';
    out += std::to_string(k + 1) + ". " + history[k];
  }
  return out;
}

inline std::string render_exemplars(const std::vector<ExemplarInfo>& ex) {
  if (ex.empty()) return "(none)";
  std::string out;
  for (const auto& e : ex) {
    if (!out.empty()) out += "\n\n";
    out += render_origin_formula(e.formula, e.chosen_argument_set);
    if (!e.metrics.empty()) out += "\nmetrics: " + e.metrics;
  }
  return out;
}

inline std::string render_avoidance_block(const std::vector<RootGene>& avoid) {
  return avoid.empty() ? std::string("(none)") : render_avoidance(avoid);
}

inline std::string dimension_guidance(Dimension d) {
  switch (d) {
    case Dimension::Effectiveness:
      return "how strongly the alpha ranks next-period returns (RankIC relative to the repository).";
    case Dimension::Stability:
      return "how steady that predictive power is from day to day (RankIC mean over its volatility).";
    case Dimension::Turnover:
      return "how little the implied portfolio trades; lower daily turnover scores higher.";
    case Dimension::Diversity:
      return "how different the alpha's daily values are from alphas already in the repository.";
    case Dimension::OverfittingRisk:
      return "how likely the alpha is to hold up out of sample given its complexity and tuning history.";
  }
  return {};
}

// Pseudo-code lines: `var = Op(input=[a, b], param=[p])`.

inline std::vector<std::string> pseudo_code(const AlphaFormula& f) {
  std::vector<std::string> lines;
  const auto doc = interchange_json(f);
  for (const auto& step : doc["formula"]) {
    auto join = [](const nlohmann::ordered_json& arr) {
      std::string s;
      for (const auto& v : arr) {
        if (!s.empty()) s += ", ";
        s += v.get<std::string>();
      }
      return s;
    };
    lines.push_back(step["output"].get<std::string>() + " = " + step["name"].get<std::string>() + "(input=[" +
                    join(step["input"]) + "], param=[" + join(step["param"]) + "])");
  }
  return lines;
}

/// Steps of the interchange format from pseudo-code lines. Lines that do not
/// match the pattern are skipped.
inline nlohmann::ordered_json steps_from_pseudo_code(const std::vector<std::string>& lines) {
  static const std::regex line_re(R"(^\s*([A-Za-z_]\w*)\s*=\s*([A-Za-z_]\w*)\s*\((.*)\)\s*$)");
  static const std::regex list_re(R"((input|param)\s*=\s*\[([^\]]*)\])");
  auto steps = nlohmann::ordered_json::array();
  for (const auto& line : lines) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    nlohmann::ordered_json step;
    step["name"] = m[2].str();
    step["param"] = nlohmann::ordered_json::array();
    step["input"] = nlohmann::ordered_json::array();
    const std::string body = m[3].str();
    for (std::sregex_iterator it(body.begin(), body.end(), list_re), end; it != end; ++it) {
      auto& target = step[(*it)[1].str()];
      const std::string items = (*it)[2].str();
      for (const auto& item : detail::split(items, ',')) {
        auto v = std::string(detail::trim(item));
        if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) v = v.substr(1, v.size() - 2);
        if (!v.empty()) target.push_back(v);
      }
    }
    step["output"] = m[1].str();
    steps.push_back(std::move(step));
  }
  return steps;
}

inline nlohmann::ordered_json portrait_json(const AlphaFormula& f) {
  nlohmann::ordered_json j;
  j["name"] = f.name;
  j["description"] = f.description;
  j["pseudo_code"] = pseudo_code(f);
  return j;
}

/// Parses a model reply holding an interchange document.
inline AlphaFormula parse_formula_reply(const std::string& reply) {
  const auto j = extract_json_object(reply);
  if (!j) throw InterchangeError("reply contains no JSON object");
  return parse_interchange(*j);
}

/// Everything that keeps `f` from being accepted as a generated alpha.
inline std::vector<std::string> candidate_problems(const AlphaFormula& f, const GenerationContext& ctx,
                                                   const AlphaFormula* parent) {
  std::vector<std::string> problems;
  for (const auto& v : validate(f, ctx.window)) problems.push_back(v.message);
  for (const auto& g : ctx.avoid)
    if (contains_gene(f, g)) problems.push_back("uses the avoided sub-expression " + gene_infix(g));
  if (parent && structurally_equal(f, *parent)) problems.push_back("identical to the original alpha");
  return problems;
}

/// Overfitting score used by the offline generators: smaller trees and fewer
/// window tweaks in the history score higher.
inline double heuristic_overfitting_score(std::size_t nodes, std::size_t tweaks) {
  const double raw = 10.0 - static_cast<double>(nodes) / 3.0 - static_cast<double>(tweaks);
  return std::round(std::clamp(raw, 0.0, 10.0) * 10.0) / 10.0;
}

/// The value after "RankIC " in a metric summary line, NaN when absent.
inline double summary_rank_ic(const std::string& summary) {
  static const std::regex re(R"(RankIC (-?[0-9.]+(?:e-?[0-9]+)?))");
  std::smatch m;
  if (std::regex_search(summary, m, re))
    if (auto v = detail::parse_double(m[1].str())) return *v;
  return std::numeric_limits<double>::quiet_NaN();
}

inline std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + needle.size())) ++n;
  return n;
}

/// Common misnamings of operators.
inline std::optional<OpCode> lenient_op_from_name(std::string_view name) {
  if (auto op = op_from_name(name)) return op;
  static const std::map<std::string, OpCode> aliases{
      {"sma", OpCode::Ma},      {"mean", OpCode::Ma},          {"avg", OpCode::Ma},
      {"ema", OpCode::Ma},      {"ts_mean", OpCode::Ma},       {"stddev", OpCode::Std},
      {"ts_std", OpCode::Std},  {"delta", OpCode::Diff},       {"ref", OpCode::Delay},
      {"lag", OpCode::Delay},   {"shift", OpCode::Delay},      {"ts_rank", OpCode::Rank},
      {"median", OpCode::Med},  {"variance", OpCode::Vari},    {"var", OpCode::Vari},
      {"correlation", OpCode::Corr}, {"covariance", OpCode::Cov}, {"plus", OpCode::Add},
      {"minus", OpCode::Sub},   {"multiply", OpCode::Mul},     {"divide", OpCode::Div},
      {"ts_max", OpCode::Max},  {"ts_min", OpCode::Min},       {"pct_change", OpCode::Pct},
      {"zscore", OpCode::Zscore}, {"negate", OpCode::Neg},     {"log1p", OpCode::Log}};
  if (auto it = aliases.find(detail::to_lower(detail::trim(name))); it != aliases.end()) return it->second;
  return std::nullopt;
}

/// Mechanical fix-up of a rejected document: operator names mapped to known
/// ones, windows clamped into range, surplus argument sets dropped. Falls
/// back to a fresh random formula when the result still fails.
inline nlohmann::ordered_json mock_repair(const std::optional<nlohmann::json>& doc, const GenerationContext& ctx,
                                          Rng& rng, const AlphaFormula* parent = nullptr) {
  if (doc && doc->is_object()) {
    nlohmann::ordered_json fixed = *doc;
    if (auto it = fixed.find("formula"); it != fixed.end() && it->is_array())
      for (auto& step : *it)
        if (step.is_object() && step.contains("name") && step["name"].is_string())
          if (auto op = lenient_op_from_name(step["name"].get<std::string>())) step["name"] = std::string(op_name(*op));
    if (auto it = fixed.find("arguments"); it != fixed.end() && it->is_array()) {
      while (it->size() > kMaxArgumentSets) it->erase(it->size() - 1);
      for (auto& set : *it)
        if (set.is_object())
          for (auto& [k, v] : set.items())
            if (v.is_number()) v = std::clamp(static_cast<int>(std::lround(v.get<double>())), ctx.window.lo, ctx.window.hi);
    }
    try {
      auto f = parse_interchange(nlohmann::json(fixed));
      if (candidate_problems(f, ctx, parent).empty()) return fixed;
    } catch (const InterchangeError&) {
    }
  }
  AlphaFormula fresh = grammar::random_formula(rng, ctx.window, ctx.avoid);
  fresh.name = "repaired_alpha";
  fresh.description = "Replacement drawn after an unrepairable rejection.";
  return interchange_json(fresh);
}

/// Source of candidate alphas. Subclasses propose raw documents; this base
/// parses and validates them and runs the repair loop.
class AlphaGenerator {
 public:
  virtual ~AlphaGenerator() = default;

  AlphaFormula generate_seed(const GenerationContext& ctx) {
    ++stats_.seeds;
    return finish(propose_seed(ctx), ctx, nullptr);
  }

  AlphaFormula refine(const RefinementRequest& req, const GenerationContext& ctx) {
    ++stats_.refinements;
    return finish(propose_refinement(req, ctx), ctx, &req.parent);
  }

  /// Returns the document's formula, repairing it first when it has
  /// problems. A valid document costs no repair call.
  AlphaFormula repair(const std::string& document, const GenerationContext& ctx) {
    return finish(document, ctx, nullptr);
  }

  virtual OverfittingAssessment assess_overfitting(const AlphaFormula& f, std::size_t argument_set,
                                                   const std::vector<std::string>& history) = 0;
  virtual std::string summarize(const SummaryRequest& req) = 0;

  /// Short label for the change made by the last refine() call.
  virtual std::string last_change_note() const { return {}; }

  virtual nlohmann::json save_state() const { return nlohmann::json::object(); }
  virtual void load_state(const nlohmann::json&) {}

  int max_repairs() const noexcept { return max_repairs_; }
  void set_max_repairs(int n) { max_repairs_ = std::max(0, n); }
  const GeneratorStats& stats() const noexcept { return stats_; }

 protected:
  virtual std::string propose_seed(const GenerationContext& ctx) = 0;
  virtual std::string propose_refinement(const RefinementRequest& req, const GenerationContext& ctx) = 0;
  virtual std::string propose_repair(const std::string& document, const std::vector<std::string>& problems,
                                     const GenerationContext& ctx, const AlphaFormula* parent) = 0;

  GeneratorStats stats_;

 private:
  AlphaFormula finish(std::string doc, const GenerationContext& ctx, const AlphaFormula* parent) {
    for (int attempt = 0;; ++attempt) {
      std::vector<std::string> problems;
      std::optional<AlphaFormula> f;
      try {
        f = parse_formula_reply(doc);
      } catch (const InterchangeError& e) {
        problems.emplace_back(e.what());
      }
      if (f) problems = candidate_problems(*f, ctx, parent);
      if (problems.empty()) return std::move(*f);
      if (attempt >= max_repairs_) {
        ++stats_.failures;
        std::string msg = "no valid formula after " + std::to_string(max_repairs_) + " repair(s):";
        for (const auto& p : problems) msg += "\n- " + p;
        throw GenerationFailed(msg);
      }
      ++stats_.repairs;
      doc = propose_repair(doc, problems, ctx, parent);
    }
  }

  int max_repairs_ = 3;
};

/// Offline generator: random grammar for seeds and dimension-biased
/// structural mutations for refinements.
class MockGenerator : public AlphaGenerator {
 public:
  explicit MockGenerator(std::uint64_t seed) : rng_(seed) {}

  OverfittingAssessment assess_overfitting(const AlphaFormula& f, std::size_t,
                                           const std::vector<std::string>& history) override {
    std::size_t tweaks = 0;
    for (const auto& h : history) tweaks += count_occurrences(h, "parameter tweak");
    const auto nodes = node_count(f.root);
    OverfittingAssessment a;
    a.score = heuristic_overfitting_score(nodes, tweaks);
    a.reason = std::to_string(nodes) + " nodes and " + std::to_string(tweaks) + " window tweak(s) in the history.";
    return a;
  }

  std::string summarize(const SummaryRequest& req) override {
    return std::string(dimension_name(req.dimension)) + " refinement by " +
           (req.change_note.empty() ? std::string("an unlabelled change") : req.change_note) + ": " +
           to_infix(req.parent, req.parent_argument_set) + " -> " + to_infix(req.child, req.child_argument_set) +
           ". " + score_line(req.delta);
  }

  std::string last_change_note() const override { return note_; }

  nlohmann::json save_state() const override { return {{"rng", rng_.save()}, {"counter", counter_}}; }
  void load_state(const nlohmann::json& j) override {
    rng_.load(j.at("rng").get<std::string>());
    counter_ = j.at("counter").get<std::size_t>();
  }

  static std::string score_line(const DimensionScores& delta) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    out << "Score changes:";
    for (auto d : kAllDimensions) {
      const double v = delta[static_cast<std::size_t>(d)];
      out << ' ' << dimension_name(d) << ' ' << (v >= 0 ? "+" : "") << v << (d == Dimension::OverfittingRisk ? "" : ",");
    }
    return out.str();
  }

 protected:
  std::string propose_seed(const GenerationContext& ctx) override {
    AlphaFormula f = grammar::random_formula(rng_, ctx.window, ctx.avoid);
    f.name = "seed_alpha_" + std::to_string(++counter_);
    f.description = "Randomly composed seed alpha.";
    note_ = "seed";
    return serialize_interchange(f);
  }

  std::string propose_refinement(const RefinementRequest& req, const GenerationContext& ctx) override {
    std::vector<grammar::DonorAlpha> donors;
    for (const auto& e : req.exemplars) donors.push_back({e.formula, e.chosen_argument_set});
    auto m = grammar::mutate(req.parent, req.dimension, donors, rng_, ctx.window, ctx.avoid,
                             summary_rank_ic(req.evaluation_summary));
    m.formula.name = "refined_alpha_" + std::to_string(++counter_);
    m.formula.description = std::string(dimension_name(req.dimension)) + " refinement: " + m.label + ".";
    note_ = m.label;
    return serialize_interchange(m.formula);
  }

  std::string propose_repair(const std::string& document, const std::vector<std::string>&,
                             const GenerationContext& ctx, const AlphaFormula* parent) override {
    note_ += " (repaired)";
    return mock_repair(extract_json_object(document), ctx, rng_, parent).dump();
  }

 private:
  Rng rng_;
  std::size_t counter_ = 0;
  std::string note_;
};

/// Generator backed by a chat-completions model. Seeds take two calls
/// (portrait, then formula); refinements take three (suggestions, refined
/// portrait, formula).
class LlmGenerator : public AlphaGenerator {
 public:
  LlmGenerator(std::shared_ptr<ChatTransport> transport, PromptSet prompts, std::string model)
      : transport_(std::move(transport)), prompts_(std::move(prompts)), model_(std::move(model)) {}

  OverfittingAssessment assess_overfitting(const AlphaFormula& f, std::size_t argument_set,
                                           const std::vector<std::string>& history) override {
    const auto reply = chat(PromptKind::overfitting, {{"alpha_formula", to_infix(f, argument_set)},
                                                      {"refinement_history", render_history(history)}});
    return parse_overfitting_reply(reply);
  }

  std::string summarize(const SummaryRequest& req) override {
    return chat(PromptKind::summarize,
                {{"refinement_dimension", std::string(dimension_name(req.dimension))},
                 {"parent_formula", describe(req.parent, req.parent_argument_set)},
                 {"alpha_formula", describe(req.child, req.child_argument_set)},
                 {"score_changes", render_scores(req.delta, true)}});
  }

  std::string last_change_note() const override { return note_; }

  /// Reads {"reason", "score"}; unreadable replies give the neutral score 5.
  static OverfittingAssessment parse_overfitting_reply(const std::string& reply) {
    OverfittingAssessment a;
    const auto j = extract_json_object(reply);
    if (j && j->contains("score")) {
      const auto& s = (*j)["score"];
      std::optional<double> v;
      if (s.is_number()) v = s.get<double>();
      else if (s.is_string()) v = detail::parse_double(s.get<std::string>());
      if (v && std::isfinite(*v)) {
        a.score = std::clamp(*v, 0.0, 10.0);
        if (j->contains("reason") && (*j)["reason"].is_string()) a.reason = (*j)["reason"].get<std::string>();
        return a;
      }
    }
    a.score = 5.0;
    a.parsed = false;
    a.reason = "unreadable assessment; neutral score used";
    return a;
  }

 protected:
  std::string propose_seed(const GenerationContext& ctx) override {
    const auto portrait = chat(PromptKind::portrait, {{"available_fields", render_fields()},
                                                      {"available_operators", render_operators()},
                                                      {"freq_subtrees", render_avoidance_block(ctx.avoid)}});
    note_ = "seed";
    return formula_from_portrait(portrait, ctx);
  }

  std::string propose_refinement(const RefinementRequest& req, const GenerationContext& ctx) override {
    const auto origin = render_origin_formula(req.parent);
    const auto suggestions =
        chat(PromptKind::suggestions,
             {{"refinement_dimension", std::string(dimension_name(req.dimension))},
              {"origin_alpha_formula", origin},
              {"evaluation_summary", req.evaluation_summary},
              {"dimension_scores", render_scores(req.scores)},
              {"dimension_guidance", dimension_guidance(req.dimension)},
              {"exemplars", render_exemplars(req.exemplars)},
              {"refinement_history", render_history(req.history)},
              {"freq_subtrees", render_avoidance_block(ctx.avoid)},
              {"available_operators", render_operators()}});
    const auto portrait = chat(PromptKind::refine, {{"available_fields", render_fields()},
                                                    {"available_operators", render_operators()},
                                                    {"freq_subtrees", render_avoidance_block(ctx.avoid)},
                                                    {"origin_alpha_formula", origin},
                                                    {"refinement_suggestions", suggestions}});
    note_.clear();
    if (const auto j = extract_json_object(portrait); j && j->contains("description") && (*j)["description"].is_string())
      note_ = (*j)["description"].get<std::string>();
    return formula_from_portrait(portrait, ctx);
  }

  std::string propose_repair(const std::string& document, const std::vector<std::string>& problems,
                             const GenerationContext& ctx, const AlphaFormula*) override {
    std::string listed;
    for (const auto& p : problems) listed += (listed.empty() ? "- " : "\n- ") + p;
    return chat(PromptKind::repair, {{"invalid_document", document},
                                     {"violations", listed},
                                     {"available_fields", render_field_list()},
                                     {"available_operators", render_operators()},
                                     {"window_range", render_window_range(ctx.window.lo, ctx.window.hi)},
                                     {"freq_subtrees", render_avoidance_block(ctx.avoid)}});
  }

 private:
  std::string formula_from_portrait(const std::string& portrait, const GenerationContext& ctx) {
    const auto j = extract_json_object(portrait);
    const std::string text = j ? nlohmann::ordered_json(*j).dump(4) : portrait;
    auto doc = chat(PromptKind::formula, {{"available_fields", render_fields()},
                                          {"available_operators", render_operators()},
                                          {"alpha_portrait_prompt", text},
                                          {"window_range", render_window_range(ctx.window.lo, ctx.window.hi)}});
    // Carry name and description over from the portrait when the formula
    // reply omits them.
    if (auto f = extract_json_object(doc); f && f->is_object() && j && j->is_object()) {
      bool changed = false;
      for (const char* key : {"name", "description"})
        if (!f->contains(key) && j->contains(key)) {
          (*f)[key] = (*j)[key];
          changed = true;
        }
      if (changed) doc = f->dump();
    }
    return doc;
  }

  static std::string describe(const AlphaFormula& f, std::size_t arg) {
    return "name: " + f.name + "\ndescription: " + f.description + "\n" + render_origin_formula(f, arg);
  }

  std::string chat(PromptKind kind, const PromptVars& vars) {
    ChatRequest req;
    req.model = model_;
    req.kind = std::string(prompt_kind_name(kind));
    req.temperature = prompt_temperature(kind);
    req.messages.push_back({"user", prompts_.render(kind, vars)});
    ++stats_.chat_calls;
    return transport_->complete(req).content;
  }

  std::shared_ptr<ChatTransport> transport_;
  PromptSet prompts_;
  std::string model_;
  std::string note_;
};

}  // namespace alphamcts
