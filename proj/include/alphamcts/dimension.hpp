#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace alphamcts {

/// Evaluation dimensions, in score-vector order.
enum class Dimension : std::uint8_t { Effectiveness, Stability, Turnover, Diversity, OverfittingRisk };

inline constexpr std::size_t kDimensionCount = 5;
inline constexpr std::array<Dimension, kDimensionCount> kAllDimensions{
    Dimension::Effectiveness, Dimension::Stability, Dimension::Turnover, Dimension::Diversity,
    Dimension::OverfittingRisk};
inline constexpr std::array<std::string_view, kDimensionCount> kDimensionNames{
    "Effectiveness", "Stability", "Turnover", "Diversity", "Overfitting Risk"};

inline std::string_view dimension_name(Dimension d) { return kDimensionNames[static_cast<std::size_t>(d)]; }

inline std::optional<Dimension> dimension_from_name(std::string_view name) {
  std::string key;
  for (char c : name)
    if (c != ' ' && c != '_' && c != '-') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto d : kAllDimensions) {
    std::string cand;
    for (char c : dimension_name(d))
      if (c != ' ') cand += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (cand == key) return d;
  }
  return std::nullopt;
}

using DimensionScores = std::array<double, kDimensionCount>;

inline double aggregate(const DimensionScores& e) {
  double s = 0.0;
  for (double v : e) s += v;
  return s / static_cast<double>(kDimensionCount);
}

}  // namespace alphamcts
