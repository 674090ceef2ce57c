#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "alphamcts/alphamcts.hpp"

namespace support {

using namespace alphamcts;

inline std::filesystem::path source_dir() { return ALPHAMCTS_SOURCE_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("alphamcts_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

inline std::vector<std::string> symbols(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(1000 + i));
  return out;
}

/// Panel of independent lognormal walks. `missing` masks cells at random.
inline MarketPanel random_panel(std::size_t T, std::size_t n, std::uint64_t seed, double missing = 0.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MarketPanel p(business_dates(T), symbols(n));
  for (std::size_t i = 0; i < n; ++i) {
    double c = 10.0 + 40.0 * u(gen);
    for (std::size_t t = 0; t < T; ++t) {
      c *= std::exp(0.02 * z(gen));
      const double o = c * std::exp(0.005 * z(gen));
      const double v = c * std::exp(0.005 * z(gen));
      const double hi = std::max({o, c, v}) * (1.0 + 0.01 * u(gen));
      const double lo = std::min({o, c, v}) * (1.0 - 0.01 * u(gen));
      p.set_cell(t, i, {o, hi, lo, c, std::round(1e5 * (1.0 + u(gen))), v});
    }
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (u(gen) < missing) p.mask_cell(t, i);
  return p;
}

/// T x n grid of N(0,1) values with invalid cells at rate `missing`.
inline MaskedGrid random_grid(std::size_t T, std::size_t n, std::mt19937_64& gen, double missing = 0.0) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MaskedGrid g(T, n);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const double v = z(gen);
      if (u(gen) >= missing) g.set(t, i, v);
    }
  return g;
}

inline AlphaFormula formula(const std::string& infix, std::vector<ArgumentSet> sets = {}) {
  auto f = parse_expression(infix);
  if (!sets.empty()) f.argument_sets = std::move(sets);
  return f;
}

/// Random tree of exactly `size` nodes over a small alphabet, so that random
/// corpora share subtrees often.
inline ExprNode small_tree(std::mt19937_64& gen, std::size_t size) {
  static const Feature leaves[] = {Feature::close, Feature::vwap, Feature::high};
  static const OpCode unary[] = {OpCode::Ma, OpCode::Std, OpCode::Abs};
  static const OpCode binary[] = {OpCode::Sub, OpCode::Div};
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(gen() % n); };
  if (size <= 1) return leaf(leaves[pick(3)]);
  if (size == 2 || pick(2) == 0) {
    const OpCode op = unary[pick(3)];
    std::vector<std::string> params;
    if (op_info(op).param_count) params.push_back("p1");
    return apply(op, {small_tree(gen, size - 1)}, params);
  }
  const std::size_t left = 1 + pick(size - 2);
  return apply(binary[pick(2)], {small_tree(gen, left), small_tree(gen, size - 1 - left)});
}

// Scripted generation for search tests.

/// Serves a fixed formula sequence and a fixed overfitting-score sequence.
/// With an empty zoo every metric dimension scores 1, so the aggregate of a
/// node is (4 + score/10) / 5 and the script fully decides the search.
class ScriptedGenerator : public AlphaGenerator {
 public:
  ScriptedGenerator(std::vector<AlphaFormula> formulas, std::vector<double> overfitting)
      : formulas_(formulas.begin(), formulas.end()), scores_(overfitting.begin(), overfitting.end()) {}

  OverfittingAssessment assess_overfitting(const AlphaFormula&, std::size_t, const std::vector<std::string>&) override {
    OverfittingAssessment a;
    a.score = scores_.empty() ? 0.0 : scores_.front();
    if (!scores_.empty()) scores_.pop_front();
    return a;
  }
  std::string summarize(const SummaryRequest& req) override { return "step along " + std::string(dimension_name(req.dimension)); }

  std::size_t refine_calls = 0;

 protected:
  std::string next() {
    if (formulas_.empty()) return "{}";
    auto f = formulas_.front();
    formulas_.pop_front();
    return serialize_interchange(f);
  }
  std::string propose_seed(const GenerationContext&) override { return next(); }
  std::string propose_refinement(const RefinementRequest&, const GenerationContext&) override {
    ++refine_calls;
    return next();
  }
  std::string propose_repair(const std::string&, const std::vector<std::string>&, const GenerationContext&,
                             const AlphaFormula*) override {
    return next();
  }

 private:
  std::deque<AlphaFormula> formulas_;
  std::deque<double> scores_;
};

/// Distinct two-operation formulas Ma(a-b, 5) over ordered feature pairs.
inline std::vector<AlphaFormula> distinct_formulas(std::size_t count) {
  std::vector<AlphaFormula> out;
  for (auto a : kAllFeatures)
    for (auto b : kAllFeatures) {
      if (a == b || out.size() >= count) continue;
      out.push_back(formula("Ma(" + std::string(feature_name(a)) + "-" + std::string(feature_name(b)) + ",5)"));
    }
  return out;
}

// Prompt capture.

/// Forwards to an inner transport and keeps every request.
class CapturingTransport : public ChatTransport {
 public:
  explicit CapturingTransport(std::shared_ptr<ChatTransport> inner) : inner_(std::move(inner)) {}
  ChatResponse complete(const ChatRequest& r) override {
    requests.push_back(r);
    return inner_->complete(r);
  }
  std::vector<ChatRequest> requests;

 private:
  std::shared_ptr<ChatTransport> inner_;
};

inline constexpr const char* kGoldenKinds[] = {"portrait", "formula", "overfitting", "refine"};

/// First prompt of each golden kind from a fixed generation sequence against
/// the chat emulator: one seed, one overfitting assessment, one refinement.
inline std::map<std::string, std::string> capture_prompts() {
  auto cap = std::make_shared<CapturingTransport>(std::make_shared<MockChatTransport>(11));
  LlmGenerator gen(cap, PromptSet::builtin(), "gpt-4.1");
  GenerationContext ctx;
  ctx.window = {2, 250};
  ctx.avoid = {make_gene(parse_expression("Ma(vwap,5)").root)};
  gen.generate_seed(ctx);

  const auto parent = formula("Zscore(Ma(close-vwap,20),30)");
  gen.assess_overfitting(parent, 0, {"Seed alpha: Zscore(Ma(close-vwap,20),30)"});

  RefinementRequest req;
  req.parent = parent;
  req.dimension = Dimension::Stability;
  req.scores = {0.8, 0.4, 0.6, 1.0, 0.9};
  req.evaluation_summary = "IC 0.0412, RankIC 0.0518, RankIR 0.4100, AR 0.1200, IR 1.1000, turnover 0.8000";
  req.exemplars.push_back({formula("Std(high-low,15)/Ma(volume,10)"), 0, "RankIC 0.0300, RankIR 0.5000"});
  req.history = {"Seed alpha: Zscore(Ma(close-vwap,20),30)"};
  gen.refine(req, ctx);

  std::map<std::string, std::string> out;
  for (const auto& r : cap->requests)
    if (!out.count(r.kind)) out[r.kind] = r.messages.back().content;
  return out;
}

inline std::filesystem::path golden_path(const std::string& kind) {
  return source_dir() / "tests" / "golden" / (kind + ".txt");
}

/// Writes the golden files when ALPHAMCTS_REGEN_GOLDEN is set.
inline void maybe_regenerate_golden(const std::map<std::string, std::string>& prompts) {
  if (!std::getenv("ALPHAMCTS_REGEN_GOLDEN")) return;
  for (const char* k : kGoldenKinds) std::ofstream(golden_path(k), std::ios::binary) << prompts.at(k);
}

}  // namespace support
