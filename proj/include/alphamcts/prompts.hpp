#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alphamcts/error.hpp"
#include "alphamcts/operators.hpp"
#include "alphamcts/panel.hpp"

namespace alphamcts {

enum class PromptKind : std::uint8_t { portrait, formula, overfitting, refine, suggestions, repair, summarize };

inline constexpr std::size_t kPromptKindCount = 7;
inline constexpr std::array<PromptKind, kPromptKindCount> kAllPromptKinds{
    PromptKind::portrait, PromptKind::formula,    PromptKind::overfitting, PromptKind::refine,
    PromptKind::suggestions, PromptKind::repair, PromptKind::summarize};
inline constexpr std::array<std::string_view, kPromptKindCount> kPromptKindNames{
    "portrait", "formula", "overfitting", "refine", "suggestions", "repair", "summarize"};

inline std::string_view prompt_kind_name(PromptKind k) { return kPromptKindNames[static_cast<std::size_t>(k)]; }

/// Sampling temperature used for each request kind.
inline double prompt_temperature(PromptKind k) {
  switch (k) {
    case PromptKind::repair:
      return 0.8;
    case PromptKind::overfitting:
    case PromptKind::summarize:
      return 0.1;
    default:
      return 1.0;
  }
}

/// Placeholders each template must carry.
inline std::vector<std::string> required_placeholders(PromptKind k) {
  switch (k) {
    case PromptKind::portrait:
      return {"available_fields", "available_operators", "freq_subtrees"};
    case PromptKind::formula:
      return {"available_fields", "available_operators", "alpha_portrait_prompt", "window_range"};
    case PromptKind::overfitting:
      return {"alpha_formula", "refinement_history"};
    case PromptKind::refine:
      return {"available_fields", "available_operators", "freq_subtrees", "origin_alpha_formula",
              "refinement_suggestions"};
    case PromptKind::suggestions:
      return {"refinement_dimension", "origin_alpha_formula", "evaluation_summary", "dimension_scores",
              "dimension_guidance", "exemplars", "refinement_history", "freq_subtrees", "available_operators"};
    case PromptKind::repair:
      return {"invalid_document", "violations", "available_fields", "available_operators", "window_range",
              "freq_subtrees"};
    case PromptKind::summarize:
      return {"refinement_dimension", "parent_formula", "alpha_formula", "score_changes"};
  }
  return {};
}

namespace builtin_prompts {
// Generated from prompts/*.txt; a unit test keeps the two in sync.
inline constexpr std::string_view portrait = R"TPL(Task Description:
You are a quantitative finance expert specializing in factor-based investing. Please design an alpha factor used in investment strategies according to the following requirements, and then provide the content of the alpha in the required format.

Available Data Fields:
The following data fields are available for use:
{available_fields}

Available Operators:
The following operators are available for use:
{available_operators}

Alpha Requirements:
1. The alpha value should be dimensionless (unitless).
2. The alpha should incorporate at least two distinct operations from the "Available Operators" list to ensure it has sufficient complexity. Avoid creating overly simplistic alphas.
3. All look-back windows and other numerical parameters used in the alpha calculation MUST be represented as named parameters in the pseudo-code. These parameter names MUST follow Python naming conventions (e.g., lookback_period, volatility_window, smoothing_factor).
4. The alpha should have NO MORE than 3 parameters in total.
5. The pseudo-code should represent the alpha calculation step-by-step, using only the "Available Operators" and clearly defined parameters. Each line in the pseudo-code should represent a single operation.
6. Use descriptive variable names in the pseudo-code that clearly indicate the data they represent.
7. When designing alpha expressions, try to avoid including the following sub-expressions:
{freq_subtrees}

Formatting Requirements:
The output must be in JSON format with three key-value pairs:
1. "name": A short, descriptive name for the alpha (following Python variable naming style, e.g., price_volatility_ratio).
2. "description": A concise explanation of the alpha's purpose or what it measures. Avoid overly technical language. Focus on the intuition behind the alpha.
3. "pseudo_code": A list of strings, where each string is a line of simplified pseudo-code representing a single operation in the alpha calculation. Each line should follow the format: variable_name = op_name(input=[input1, input2, ...], param=[param1, param2, ...]), where:
   - variable_name is the output variable of the operation.
   - op_name is the name of one of the "Available Operators".
   - input1, input2, ... are input variables (either from "Available Data Fields" or previously calculated variables, cannot be of a numeric type).
   - param1, param2, ... are parameter names defined in the alpha requirements.

The format example is as follows:
{
    "name": "volatility_adjusted_momentum",
    "description": "......",
    "pseudo_code": [......]
}
)TPL";

inline constexpr std::string_view formula = R"TPL(Task Description:
Please design a quantitative investment alpha expression according to the following requirements.

Available Data Fields:
- The following data fields are available for use:
{available_fields}

Available Operators:
- The following operators are available for use:
{available_operators}

Alpha Requirements:
- {alpha_portrait_prompt}

Formatting Requirements:
1. Provide the output in JSON format.
2. The JSON object should contain two fields: "formula", and "arguments".
   - "formula": Represents the mathematical expression for calculating the alpha.
   - "arguments": Represents the configurable parameters of the alpha.
3. "formula" is a list of dictionaries. Each dictionary represents a single operation and must contain four keys: "name", "param", "input", and "output".
   - "name": The operator's name (a string), which MUST be one of the operators provided in the "Available Operators" section.
   - "param": A list of strings, representing the parameter names for the operator. These parameter names MUST be used as keys in the "arguments" section.
   - "input": A list of strings, representing the input variable names for the operator. These MUST be data fields from the "Available Data Fields" or output variables from previous operations in the "formula", cannot be of a numeric type.
   - "output": A string, representing the output variable name for the operator. This output can be used as an input for subsequent operations.
4. "arguments" is a list of dictionaries. Each dictionary represents a set of parameter values for the alpha.
   - The keys of each dictionary in "arguments" MUST correspond exactly to the parameter names defined in the "param" lists of the "formula".
   - The values in each dictionary in "arguments" are the specific numerical values for the parameters.
5. You may include a maximum of 3 sets of parameters within the "arguments" field.
6. The parameter value that indicates the length of the lookback window (if applicable) must be within the {window_range} range.
7. Ensure that the alpha expression is both reasonable and computationally feasible.
8. Parameter names should be descriptive and follow Python naming conventions (e.g., window_size, lag_period, smoothing_factor). Avoid using single characters or numbers as parameter names.
9. Refer to the following example:

{
    "formula": [......],
    "arguments": [......]
}
)TPL";

inline constexpr std::string_view overfitting = R"TPL(Task: Critical Alpha Overfitting Risk Assessment
Critically evaluate the overfitting risk and generalization potential of the provided quantitative investment alpha, based on its expression and refinement history.
Your assessment must focus on whether complexity and optimization appear justified or are likely signs of overfitting.

Input:
- Alpha Expression:
{alpha_formula}
- Refinement History:
{refinement_history}

Evaluation Criteria:
1. Justified Rationale vs. Complexity:
   Critique: Is the complexity of the alpha expression plausibly justified by an inferred economic rationale, or does it seem arbitrary/excessive, suggesting fitting to noise?
2. Principled Development vs. Data Dredging:
   Critique: Does the refinement history indicate hypothesis-driven improvements, or does it suggest excessive optimization and curve-fitting (e.g., frequent, unjustified parameter tweaks)?
3. Transparency vs. Opacity:
   Critique: Is the alpha's logic reasonably interpretable despite its complexity, or is it opaque, potentially masking overfitting?

Scoring & Output:
- Assign a single Overfitting Risk Score from 0 to 10.
  - 10 = Very Low Risk (High confidence in generalization)
  - 0 = Very High Risk (Low confidence in generalization)
- Use the full 0-10 range to differentiate risk levels effectively.
- Provide a concise, one-sentence Justification explaining the score, citing the key factors from the criteria.
- Format the output as JSON, like the examples below:

Example JSON Outputs:
{
    "reason": "Complexity is justified by a strong rationale; principled refinement history suggests low risk.",
    "score": 9
}

{
    "reason": "Plausible rationale, but some expression opacity and parameter tuning in history indicate moderate risk.",
    "score": 5
}

{
    "reason": "High risk inferred from opaque expression lacking clear rationale, supported by history showing excessive tuning.",
    "score": 1
}
)TPL";

inline constexpr std::string_view refine = R"TPL(Task Description:
There is an alpha factor used in quantitative investment to predict asset price trends.
Please improve it according to the following suggestions and provide the improved alpha expression.

Available Data Fields:
The following data fields are available for use:
{available_fields}

Available Operators:
The following operators are available for use:
{available_operators}

Alpha Suggestions:
1. The alpha value should be dimensionless (unitless).
2. All look-back windows and other numerical parameters used in the alpha calculation MUST be represented as named parameters in the pseudo-code. These parameter names MUST follow Python naming conventions (e.g., lookback_period, volatility_window, smoothing_factor).
3. The alpha should have NO MORE than 3 parameters in total.
4. The pseudo-code should represent the alpha calculation step-by-step, using only the "Available Operators" and clearly defined parameters. Each line in the pseudo-code should represent a single operation.
5. Use descriptive variable names in the pseudo-code that clearly indicate the data they represent.
6. When designing alpha expressions, try to avoid including the following sub-expressions: {freq_subtrees}

Original alpha expression:
{origin_alpha_formula}

Refinement suggestions:
NOTE: The following improvement suggestions do not need to be all adopted; they just need to be considered and reasonable ones selected for adoption.
{refinement_suggestions}

Formatting Requirements:
The output must be in JSON format with three key-value pairs:
1. "name": A short, descriptive name for the alpha (following Python variable naming style, e.g., price_volatility_ratio).
2. "description": A concise explanation of the alpha's purpose or what it measures. Avoid overly technical language. Focus on the intuition behind the alpha.
3. "pseudo_code": A list of strings, where each string is a line of simplified pseudo-code representing a single operation in the alpha calculation. Each line should follow the format: variable_name = op_name(input=[input1, input2, ...], param=[param1, param2, ...]), where:
   - variable_name is the output variable of the operation.
   - op_name is the name of one of the "Available Operators".
   - input1, input2, ... are input variables (either from "Available Data Fields" or previously calculated variables, cannot be of a numeric type).
   - param1, param2, ... are parameter names defined in the alpha requirements.

The format example is as follows:
{
    "name": "volatility_adjusted_momentum",
    "description": "......",
    "pseudo_code": [......]
}
)TPL";

inline constexpr std::string_view suggestions = R"TPL(You review alpha factors for a quantitative equity desk. Propose concrete edits to the alpha below that would raise its {refinement_dimension} score.

Alpha:
{origin_alpha_formula}

Backtest summary:
{evaluation_summary}

Scores per dimension (1 is the best in the current repository, 0 the worst):
{dimension_scores}

What {refinement_dimension} means here: {dimension_guidance}

Accepted alphas you may borrow ideas from:
{exemplars}

Earlier refinements near this alpha:
{refinement_history}

Sub-expressions to avoid:
{freq_subtrees}

Reply with 2 to 4 short numbered suggestions in plain text. Use only these operators: {available_operators}
)TPL";

inline constexpr std::string_view repair = R"TPL(The alpha formula below was rejected by the validator. Fix every listed problem and return the corrected formula.

Rejected formula:
{invalid_document}

Problems:
{violations}

Available data fields: {available_fields}

Available operators:
{available_operators}

Constraints: at least two operations, at most 3 named parameters, at most 3 argument sets, every window between {window_range}, inputs are data fields or earlier outputs only, never numbers. Do not use these sub-expressions:
{freq_subtrees}

Return only JSON with the keys "formula" and "arguments" in the same step format as the rejected formula.
)TPL";

inline constexpr std::string_view summarize = R"TPL(Summarize in one short paragraph what changed between these two alpha versions and how the scores moved.

Targeted dimension: {refinement_dimension}

Before:
{parent_formula}

After:
{alpha_formula}

Score changes (after minus before):
{score_changes}

Reply with plain text only.
)TPL";
}  // namespace builtin_prompts

using PromptVars = std::map<std::string, std::string>;

/// Replaces `{name}` for every name in `vars`. Braces that do not enclose a
/// known name (JSON examples) are left alone.
inline std::string render_template(std::string_view tpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = std::string(tpl.substr(i + 1, close - i - 1));
        if (auto it = vars.find(name); it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

class PromptSet {
 public:
  static PromptSet builtin() {
    PromptSet p;
    p.templates_ = {std::string(builtin_prompts::portrait), std::string(builtin_prompts::formula),
                    std::string(builtin_prompts::overfitting), std::string(builtin_prompts::refine),
                    std::string(builtin_prompts::suggestions), std::string(builtin_prompts::repair),
                    std::string(builtin_prompts::summarize)};
    return p;
  }

  /// Reads `<kind>.txt` from `dir`; kinds without a file keep the built-in text.
  static PromptSet load(const std::filesystem::path& dir) {
    PromptSet p = builtin();
    if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory '" + dir.string() + "' not found");
    for (auto k : kAllPromptKinds) {
      const auto path = dir / (std::string(prompt_kind_name(k)) + ".txt");
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      p.templates_[static_cast<std::size_t>(k)] = s.str();
    }
    p.check();
    return p;
  }

  const std::string& text(PromptKind k) const { return templates_[static_cast<std::size_t>(k)]; }

  /// Throws ConfigError when a template lacks one of its placeholders.
  void check() const {
    for (auto k : kAllPromptKinds)
      for (const auto& name : required_placeholders(k))
        if (text(k).find("{" + name + "}") == std::string::npos)
          throw ConfigError(std::string(prompt_kind_name(k)) + " template lacks {" + name + "}");
  }

  std::string render(PromptKind k, const PromptVars& vars) const {
    for (const auto& name : required_placeholders(k))
      if (!vars.count(name))
        throw Error(std::string(prompt_kind_name(k)) + " prompt rendered without {" + name + "}");
    return render_template(text(k), vars);
  }

 private:
  std::array<std::string, kPromptKindCount> templates_;
};

// Renderings of the shared context blocks.

inline std::string render_fields() {
  static constexpr std::array<std::string_view, kFeatureCount> what{
      "opening price", "highest price of the day", "lowest price of the day", "closing price",
      "traded volume", "volume-weighted average price"};
  std::string out;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (k) out += '\n';
    out += std::string(kFeatureNames[k]) + ": " + std::string(what[k]);
  }
  return out;
}

inline std::string render_field_list() {
  std::string out;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (k) out += ", ";
    out += kFeatureNames[k];
  }
  return out;
}

inline std::string render_operators() {
  std::string out;
  for (const auto& op : kOperators) {
    if (!out.empty()) out += '\n';
    out += std::string(op.signature) + ": " + std::string(op.summary);
  }
  return out;
}

inline std::string render_window_range(int lo, int hi) {
  return "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
}

}  // namespace alphamcts
