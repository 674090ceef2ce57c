#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "alphamcts/panel.hpp"

namespace alphamcts {

enum class OpKind : std::uint8_t { elementwise, rolling, pairwise_rolling };

// clang-format off
enum class OpCode : std::uint8_t {
  Neg, Abs, Square, Inv, Sign, Sin, Cos, Tanh, Log,
  Delay, Diff, Pct, Ma, Med, Sum, Std, Max, Min, Rank, Skew, Kurt, Vari, Zscore, Autocorr,
  Add, Sub, Mul, Div, Greater, Less,
  Cov, Corr,
};
// clang-format on

struct OperatorInfo {
  OpCode code;
  std::string_view name;
  int arity;
  int param_count;
  OpKind kind;
  std::string_view signature;
  std::string_view summary;
};

// clang-format off
inline constexpr std::array<OperatorInfo, 32> kOperators{{
    {OpCode::Neg,      "Neg",      1, 0, OpKind::elementwise,      "Neg(x)",            "negated value of x"},
    {OpCode::Abs,      "Abs",      1, 0, OpKind::elementwise,      "Abs(x)",            "absolute value of x"},
    {OpCode::Square,   "Square",   1, 0, OpKind::elementwise,      "Square(x)",         "x squared"},
    {OpCode::Inv,      "Inv",      1, 0, OpKind::elementwise,      "Inv(x)",            "reciprocal 1/x"},
    {OpCode::Sign,     "Sign",     1, 0, OpKind::elementwise,      "Sign(x)",           "sign of x (-1, 0 or 1)"},
    {OpCode::Sin,      "Sin",      1, 0, OpKind::elementwise,      "Sin(x)",            "sine of x"},
    {OpCode::Cos,      "Cos",      1, 0, OpKind::elementwise,      "Cos(x)",            "cosine of x"},
    {OpCode::Tanh,     "Tanh",     1, 0, OpKind::elementwise,      "Tanh(x)",           "hyperbolic tangent of x"},
    {OpCode::Log,      "Log",      1, 0, OpKind::elementwise,      "Log(x)",            "natural logarithm of x"},
    {OpCode::Delay,    "Delay",    1, 1, OpKind::rolling,          "Delay(x, t)",       "value of x t trading days ago"},
    {OpCode::Diff,     "Diff",     1, 1, OpKind::rolling,          "Diff(x, t)",        "x minus Delay(x, t)"},
    {OpCode::Pct,      "Pct",      1, 1, OpKind::rolling,          "Pct(x, t)",         "x / Delay(x, t) - 1"},
    {OpCode::Ma,       "Ma",       1, 1, OpKind::rolling,          "Ma(x, t)",          "mean of x over the last t days"},
    {OpCode::Med,      "Med",      1, 1, OpKind::rolling,          "Med(x, t)",         "median of x over the last t days"},
    {OpCode::Sum,      "Sum",      1, 1, OpKind::rolling,          "Sum(x, t)",         "sum of x over the last t days"},
    {OpCode::Std,      "Std",      1, 1, OpKind::rolling,          "Std(x, t)",         "standard deviation of x over the last t days"},
    {OpCode::Max,      "Max",      1, 1, OpKind::rolling,          "Max(x, t)",         "maximum of x over the last t days"},
    {OpCode::Min,      "Min",      1, 1, OpKind::rolling,          "Min(x, t)",         "minimum of x over the last t days"},
    {OpCode::Rank,     "Rank",     1, 1, OpKind::rolling,          "Rank(x, t)",        "rank of today's x within the last t days, scaled to [0, 1]"},
    {OpCode::Skew,     "Skew",     1, 1, OpKind::rolling,          "Skew(x, t)",        "skewness of x over the last t days"},
    {OpCode::Kurt,     "Kurt",     1, 1, OpKind::rolling,          "Kurt(x, t)",        "excess kurtosis of x over the last t days"},
    {OpCode::Vari,     "Vari",     1, 1, OpKind::rolling,          "Vari(x, t)",        "Std(x, t) / Ma(x, t)"},
    {OpCode::Zscore,   "Zscore",   1, 1, OpKind::rolling,          "Zscore(x, t)",      "(x - Ma(x, t)) / Std(x, t)"},
    {OpCode::Autocorr, "Autocorr", 1, 2, OpKind::rolling,          "Autocorr(x, t, n)", "lag-n autocorrelation of x within the last t days"},
    {OpCode::Add,      "Add",      2, 0, OpKind::elementwise,      "Add(x, y)",         "x + y"},
    {OpCode::Sub,      "Sub",      2, 0, OpKind::elementwise,      "Sub(x, y)",         "x - y"},
    {OpCode::Mul,      "Mul",      2, 0, OpKind::elementwise,      "Mul(x, y)",         "x * y"},
    {OpCode::Div,      "Div",      2, 0, OpKind::elementwise,      "Div(x, y)",         "x / y"},
    {OpCode::Greater,  "Greater",  2, 0, OpKind::elementwise,      "Greater(x, y)",     "1 if x > y else 0"},
    {OpCode::Less,     "Less",     2, 0, OpKind::elementwise,      "Less(x, y)",        "1 if x < y else 0"},
    {OpCode::Cov,      "Cov",      2, 1, OpKind::pairwise_rolling, "Cov(x, y, t)",      "covariance of x and y over the last t days"},
    {OpCode::Corr,     "Corr",     2, 1, OpKind::pairwise_rolling, "Corr(x, y, t)",     "Pearson correlation of x and y over the last t days"},
}};
// clang-format on

inline const OperatorInfo& op_info(OpCode code) { return kOperators[static_cast<std::size_t>(code)]; }
inline std::string_view op_name(OpCode code) { return op_info(code).name; }

/// Case-insensitive lookup of a canonical operator name.
inline std::optional<OpCode> op_from_name(std::string_view name) {
  const auto lower = detail::to_lower(detail::trim(name));
  for (const auto& info : kOperators)
    if (detail::to_lower(info.name) == lower) return info.code;
  return std::nullopt;
}

}  // namespace alphamcts
