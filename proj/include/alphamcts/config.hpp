#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "alphamcts/error.hpp"
#include "alphamcts/mcts.hpp"
#include "alphamcts/metrics.hpp"
#include "alphamcts/panel.hpp"
#include "alphamcts/synthetic.hpp"
#include "alphamcts/validate.hpp"

namespace alphamcts {

// Run configuration. The file is `key = value` lines; `#` starts a comment,
// `[section]` headers are accepted and ignored, values may be quoted.

struct RunConfig {
  // data
  std::string data;  ///< panel CSV; empty means a synthetic panel
  SyntheticSpec synthetic;
  BacktestConfig backtest;

  // search
  SearchConfig search;
  std::size_t k_avoid = 3;
  std::size_t min_support = 2;
  WindowRange window;

  // generator
  std::string generator = "mock";  ///< mock | llm
  std::string endpoint = "https://api.openai.com/v1/chat/completions";  ///< mock:// uses the offline chat emulator
  std::string model = "gpt-4.1";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
  int max_repairs = 3;
  int retry_attempts = 4;
  int retry_base_ms = 500;
  double retry_multiplier = 2.0;
  bool record_traffic = false;
  std::string replay_file;
  std::string prompt_dir;

  // run
  std::size_t seed = 7;
  std::size_t max_generations = 300;
  std::size_t max_trees = 0;         ///< 0: no limit
  double max_wall_seconds = 0.0;     ///< 0: no limit
};

namespace detail {

struct ConfigField {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
T parse_value(const std::string& key, const std::string& v);

template <>
inline std::string parse_value<std::string>(const std::string&, const std::string& v) {
  return v;
}

template <>
inline double parse_value<double>(const std::string& key, const std::string& v) {
  auto d = parse_double(v);
  if (!d) throw ConfigError(key + ": '" + v + "' is not a number");
  return *d;
}

template <>
inline int parse_value<int>(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": '" + v + "' is not an integer");
}

template <>
inline std::size_t parse_value<std::size_t>(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used == v.size() && !v.empty() && v.front() != '-') return static_cast<std::size_t>(out);
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
}

template <>
inline bool parse_value<bool>(const std::string& key, const std::string& v) {
  const auto l = to_lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

template <class T>
std::string show_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

template <class T, class Access>
ConfigField field(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = parse_value<T>("", v); },
          [access](const RunConfig& c) { return show_value<T>(access(const_cast<RunConfig&>(c))); }};
}

#define ALPHAMCTS_FIELD(T, key, expr) \
  {key, field<T>([](RunConfig& c) -> T& { return expr; })}

// Ordered as written in config snapshots.
inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const std::vector<std::pair<std::string, ConfigField>> fields{
      ALPHAMCTS_FIELD(std::string, "data", c.data),
      ALPHAMCTS_FIELD(std::size_t, "synthetic_days", c.synthetic.days),
      ALPHAMCTS_FIELD(std::size_t, "synthetic_stocks", c.synthetic.stocks),
      ALPHAMCTS_FIELD(std::size_t, "synthetic_seed", c.synthetic.seed),
      ALPHAMCTS_FIELD(double, "synthetic_signal", c.synthetic.signal),
      ALPHAMCTS_FIELD(double, "synthetic_missing", c.synthetic.missing),
      ALPHAMCTS_FIELD(int, "horizon", c.backtest.horizon),
      ALPHAMCTS_FIELD(double, "top_fraction", c.backtest.top_fraction),
      ALPHAMCTS_FIELD(double, "cost_rate", c.backtest.cost_rate),
      ALPHAMCTS_FIELD(int, "periods_per_year", c.backtest.periods_per_year),
      ALPHAMCTS_FIELD(double, "uct_c", c.search.uct_c),
      ALPHAMCTS_FIELD(int, "budget_init", c.search.budget_init),
      ALPHAMCTS_FIELD(int, "budget_increment", c.search.budget_increment),
      {"budget_scope",
       {[](RunConfig& c, const std::string& v) {
          const auto l = to_lower(v);
          if (l == "tree") c.search.budget_scope = BudgetScope::tree;
          else if (l == "global") c.search.budget_scope = BudgetScope::global;
          else throw ConfigError("budget_scope: expected tree or global, got '" + v + "'");
        },
        [](const RunConfig& c) {
          return std::string(c.search.budget_scope == BudgetScope::tree ? "tree" : "global");
        }}},
      ALPHAMCTS_FIELD(double, "temperature", c.search.temperature),
      ALPHAMCTS_FIELD(double, "e_max", c.search.e_max),
      ALPHAMCTS_FIELD(double, "eta", c.search.eta),
      ALPHAMCTS_FIELD(std::size_t, "exemplars", c.search.exemplars),
      ALPHAMCTS_FIELD(std::size_t, "k_avoid", c.k_avoid),
      ALPHAMCTS_FIELD(std::size_t, "min_support", c.min_support),
      ALPHAMCTS_FIELD(int, "window_lo", c.window.lo),
      ALPHAMCTS_FIELD(int, "window_hi", c.window.hi),
      ALPHAMCTS_FIELD(double, "min_rank_ic", c.search.gates.min_rank_ic),
      ALPHAMCTS_FIELD(double, "min_rank_ir", c.search.gates.min_rank_ir),
      ALPHAMCTS_FIELD(double, "max_rel_rank_ic", c.search.gates.max_rel_rank_ic),
      ALPHAMCTS_FIELD(double, "max_rel_rank_ir", c.search.gates.max_rel_rank_ir),
      ALPHAMCTS_FIELD(double, "max_turnover", c.search.gates.max_turnover),
      ALPHAMCTS_FIELD(double, "max_correlation", c.search.gates.max_correlation),
      ALPHAMCTS_FIELD(std::string, "generator", c.generator),
      ALPHAMCTS_FIELD(std::string, "endpoint", c.endpoint),
      ALPHAMCTS_FIELD(std::string, "model", c.model),
      ALPHAMCTS_FIELD(std::string, "api_key_env", c.api_key_env),
      ALPHAMCTS_FIELD(int, "timeout_seconds", c.timeout_seconds),
      ALPHAMCTS_FIELD(int, "max_repairs", c.max_repairs),
      ALPHAMCTS_FIELD(int, "retry_attempts", c.retry_attempts),
      ALPHAMCTS_FIELD(int, "retry_base_ms", c.retry_base_ms),
      ALPHAMCTS_FIELD(double, "retry_multiplier", c.retry_multiplier),
      ALPHAMCTS_FIELD(bool, "record_traffic", c.record_traffic),
      ALPHAMCTS_FIELD(std::string, "replay_file", c.replay_file),
      ALPHAMCTS_FIELD(std::string, "prompt_dir", c.prompt_dir),
      ALPHAMCTS_FIELD(std::size_t, "seed", c.seed),
      ALPHAMCTS_FIELD(std::size_t, "max_generations", c.max_generations),
      ALPHAMCTS_FIELD(std::size_t, "max_trees", c.max_trees),
      ALPHAMCTS_FIELD(double, "max_wall_seconds", c.max_wall_seconds),
  };
  return fields;
}

#undef ALPHAMCTS_FIELD

}  // namespace detail

/// Sets one key. Throws ConfigError for unknown keys and bad values.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, f] : detail::config_fields())
    if (name == key) {
      try {
        f.set(cfg, value);
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        throw ConfigError(msg.rfind(": ", 0) == 0 ? key + msg : msg);
      }
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  for (const auto& [name, f] : detail::config_fields())
    if (name == key) return f.get(cfg);
  throw ConfigError("unknown config key '" + key + "'");
}

/// Throws ConfigError when values are out of range or inconsistent.
inline void check_config(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.backtest.horizon >= 1, "horizon must be at least 1");
  need(c.backtest.top_fraction > 0 && c.backtest.top_fraction <= 1, "top_fraction must be in (0, 1]");
  need(c.backtest.cost_rate >= 0, "cost_rate must not be negative");
  need(c.backtest.periods_per_year > 0, "periods_per_year must be positive");
  need(c.search.uct_c >= 0, "uct_c must not be negative");
  need(c.search.budget_init >= 0 && c.search.budget_increment >= 0, "budget values must not be negative");
  need(c.search.temperature > 0, "temperature must be positive");
  need(c.search.e_max > 0, "e_max must be positive");
  need(c.search.eta >= 0 && c.search.eta <= 1, "eta must be in [0, 1]");
  need(c.window.lo >= 1 && c.window.lo <= c.window.hi, "window range must satisfy 1 <= window_lo <= window_hi");
  need(c.generator == "mock" || c.generator == "llm", "generator must be mock or llm");
  need(c.max_repairs >= 0, "max_repairs must not be negative");
  need(c.retry_attempts >= 1, "retry_attempts must be at least 1");
  need(c.synthetic.days >= 2 && c.synthetic.stocks >= 1, "synthetic panel needs at least 2 days and 1 stock");
  need(c.synthetic.missing >= 0 && c.synthetic.missing < 1, "synthetic_missing must be in [0, 1)");
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = std::string(detail::trim(line));
    if (t.empty() || (t.front() == '[' && t.back() == ']')) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", n);
    const auto key = std::string(detail::trim(std::string_view(t).substr(0, eq)));
    auto value = std::string(detail::trim(std::string_view(t).substr(eq + 1)));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), n);
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return parse_config(in);
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Every key with its value, one per line; parse_config reads it back.
inline std::string config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : detail::config_fields()) {
    const auto v = f.get(cfg);
    const bool quote = v.empty() || v.find_first_of(" #") != std::string::npos;
    out += name + " = " + (quote ? "\"" + v + "\"" : v) + "\n";
  }
  return out;
}

/// The configured panel: the CSV at `data`, or the synthetic one.
inline MarketPanel load_run_panel(const RunConfig& cfg) {
  if (cfg.data.empty()) return synthetic_panel(cfg.synthetic);
  if (!std::filesystem::exists(cfg.data)) throw ConfigError("data file '" + cfg.data + "' not found");
  return load_panel(cfg.data);
}

}  // namespace alphamcts
