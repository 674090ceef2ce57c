#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "alphamcts/alphamcts.hpp"

namespace alphamcts::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigOrIo = 2,
  kInvalidFormula = 3,
  kUndefinedMetric = 4,
  kGeneratorUnavailable = 5,
};

/// Panel and backtest settings shared by eval and backtest.
struct DataOptions {
  std::string config;
  std::string data;
  std::optional<std::size_t> synthetic_seed;
  std::optional<int> horizon;
  std::optional<double> top_fraction;
  std::optional<double> cost;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "run config supplying data and backtest settings");
    cmd->add_option("--data", data, "panel CSV (date,symbol,open,high,low,close,volume,vwap)");
    cmd->add_option("--synthetic-seed", synthetic_seed, "seed of the synthetic panel used when no data is given");
    cmd->add_option("--horizon", horizon, "prediction horizon w in days");
    cmd->add_option("--top-fraction", top_fraction, "share of the pool held by the top-k strategy");
    cmd->add_option("--cost", cost, "one-way cost per traded name");
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    if (!data.empty()) cfg.data = data;
    if (synthetic_seed) cfg.synthetic.seed = *synthetic_seed;
    if (horizon) cfg.backtest.horizon = *horizon;
    if (top_fraction) cfg.backtest.top_fraction = *top_fraction;
    if (cost) cfg.backtest.cost_rate = *cost;
    check_config(cfg);
    return cfg;
  }
};

/// A formula from a file (interchange JSON or one infix line) or from the
/// argument text itself.
inline AlphaFormula load_formula(const std::string& arg) {
  std::string text = arg;
  if (std::filesystem::is_regular_file(arg)) {
    std::ifstream in(arg);
    std::ostringstream s;
    s << in.rdbuf();
    text = s.str();
  }
  const auto t = std::string(detail::trim(text));
  if (!t.empty() && t.front() == '{') return parse_interchange(t);
  return parse_expression(t);
}

namespace detail {

inline std::string num(double v, int precision = 4) {
  if (!std::isfinite(v)) return "undefined";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s << std::setprecision(precision) << v;
  return s.str();
}

inline void metric_table(std::ostream& out, const MetricBundle& m) {
  const std::pair<const char*, double> rows[] = {{"IC", m.ic},       {"RankIC", m.rank_ic}, {"RankIR", m.rank_ir},
                                                 {"AR", m.ar},       {"IR", m.ir},          {"turnover", m.daily_turnover}};
  for (const auto& [name, v] : rows) out << std::left << std::setw(10) << name << num(v) << '\n';
}

struct ZooRow {
  std::size_t id = 0;
  std::string formula;
  double rank_ic = std::nan("");
  double rank_ir = std::nan("");
  double turnover = std::nan("");
  std::string line;  // the raw CSV row
};

inline double cell(const std::string& s) {
  if (auto v = alphamcts::detail::parse_double(s)) return *v;
  return std::nan("");
}

/// Rows of zoo_metrics.csv. The formula column is quoted.
inline std::vector<ZooRow> read_zoo_metrics(const std::filesystem::path& path) {
  std::vector<ZooRow> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto q1 = line.find('"');
    const auto q2 = line.find('"', q1 + 1);
    if (q1 == std::string::npos || q2 == std::string::npos) throw Error("malformed row in " + path.string());
    ZooRow r;
    r.line = line;
    r.id = static_cast<std::size_t>(std::stoull(line.substr(0, q1 - 1)));
    r.formula = line.substr(q1 + 1, q2 - q1 - 1);
    const auto rest = alphamcts::detail::split(std::string_view(line).substr(q2 + 2), ',');
    if (rest.size() < 7) throw Error("malformed row in " + path.string());
    r.rank_ic = cell(std::string(rest[1]));
    r.rank_ir = cell(std::string(rest[2]));
    r.turnover = cell(std::string(rest[5]));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void print_zoo_rows(std::ostream& out, const std::vector<ZooRow>& rows) {
  out << std::left << std::setw(6) << "id" << std::setw(10) << "RankIC" << std::setw(10) << "RankIR" << std::setw(10)
      << "turnover"
      << "formula\n";
  for (const auto& r : rows)
    out << std::left << std::setw(6) << r.id << std::setw(10) << num(r.rank_ic) << std::setw(10) << num(r.rank_ir)
        << std::setw(10) << num(r.turnover) << r.formula << '\n';
}

inline void print_run_summary(std::ostream& out, const Miner& m, const std::filesystem::path& dir) {
  const auto& c = m.counters();
  out << "run directory  " << dir.string() << '\n'
      << "generations    " << c.generations << '\n'
      << "trees          " << c.trees << '\n'
      << "expansions     " << c.expansions << " (" << c.skipped << " skipped)\n"
      << "repairs        " << c.repairs << '\n'
      << "zoo size       " << m.zoo().size() << '\n';
  const auto top = m.zoo().export_topk(5);
  if (top.empty()) return;
  out << "\ntop alphas by RankIR\n";
  for (const auto* e : top)
    out << "  #" << e->id << "  RankIC " << num(e->metrics.rank_ic) << "  RankIR " << num(e->metrics.rank_ir) << "  "
        << to_infix(e->formula, e->chosen_argument_set) << '\n';
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one command.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Formulaic alpha mining with tree search over generated formulas", "alphamcts"};
  app.require_subcommand(1);

  // mine
  auto* mine = app.add_subcommand("mine", "search for alphas and write a run directory");
  std::string mine_config, run_dir;
  bool use_mock = false, resume = false, record = false;
  std::optional<std::size_t> seed, max_generations, max_trees;
  std::vector<std::string> overrides;
  mine->add_option("--config", mine_config, "run config file");
  mine->add_option("--run-dir", run_dir, "output directory")->required();
  mine->add_flag("--mock", use_mock, "use the offline generator");
  mine->add_option("--seed", seed, "run seed");
  mine->add_option("--max-generations", max_generations, "stop after this many generator calls");
  mine->add_option("--max-trees", max_trees, "stop after this many trees");
  mine->add_flag("--resume", resume, "continue the run in --run-dir");
  mine->add_flag("--record", record, "write the chat traffic to llm_traffic.jsonl");
  mine->add_option("--set", overrides, "override one config key (key=value); repeatable");

  // replay
  auto* replay = app.add_subcommand("replay", "re-run a recorded run from its chat traffic");
  std::string replay_from, replay_dir;
  replay->add_option("--from", replay_from, "recorded run directory")->required();
  replay->add_option("--run-dir", replay_dir, "output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "compute the metrics of one formula");
  std::string eval_formula, dump_values;
  std::optional<std::size_t> arg_set;
  DataOptions eval_data;
  eval->add_option("formula", eval_formula, "interchange JSON file, or an infix expression")->required();
  eval->add_option("--dump-values", dump_values, "write the alpha values as date,symbol,value CSV");
  eval->add_option("--arg-set", arg_set, "use this argument set (1-based) instead of the best by RankIC");
  eval_data.add_to(eval);

  // backtest
  auto* bt = app.add_subcommand("backtest", "top-k/drop-n simulation of one formula");
  std::string bt_formula, bt_out;
  std::optional<std::size_t> bt_arg_set;
  DataOptions bt_data;
  bt->add_option("formula", bt_formula, "interchange JSON file, or an infix expression")->required();
  bt->add_option("--out", bt_out, "per-period and cumulative return CSV");
  bt->add_option("--arg-set", bt_arg_set, "argument set (1-based); default is the best by RankIC");
  bt_data.add_to(bt);

  // zoo
  auto* zoo = app.add_subcommand("zoo", "inspect a run's alpha repository");
  zoo->require_subcommand(1);
  std::string zoo_dir;
  auto* zoo_list = zoo->add_subcommand("list", "accepted alphas in acceptance order");
  zoo_list->add_option("--run-dir", zoo_dir, "run directory")->required();
  auto* zoo_export = zoo->add_subcommand("export", "top alphas by RankIR as interchange JSONL plus CSV");
  std::size_t export_k = 10;
  std::string export_out;
  zoo_export->add_option("--run-dir", zoo_dir, "run directory")->required();
  zoo_export->add_option("--top", export_k, "number of alphas");
  zoo_export->add_option("--out", export_out, "output path stem (.jsonl and .csv are appended)")->required();
  auto* zoo_stats = zoo->add_subcommand("stats", "summary statistics");
  zoo_stats->add_option("--run-dir", zoo_dir, "run directory")->required();

  // fsa
  auto* fsa = app.add_subcommand("fsa", "closed frequent subtrees of a zoo");
  std::string fsa_zoo;
  std::size_t fsa_support = 2, fsa_k = 3;
  fsa->add_option("zoo", fsa_zoo, "zoo.jsonl or a run directory")->required();
  fsa->add_option("--min-support", fsa_support, "minimum number of formulas containing a gene");
  fsa->add_option("-k,--avoid", fsa_k, "number of genes marked for avoidance");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic panel with a planted signal");
  std::string synth_out;
  SyntheticSpec spec;
  synth->add_option("--out", synth_out, "panel CSV path")->required();
  synth->add_option("--days", spec.days, "trading days");
  synth->add_option("--stocks", spec.stocks, "stocks");
  synth->add_option("--seed", spec.seed, "random seed");
  synth->add_option("--signal", spec.signal, "loading of the planted signal");
  synth->add_option("--missing", spec.missing, "probability that a cell is masked");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kConfigOrIo;
  }

  try {
    if (*mine) {
      RunConfig cfg = mine_config.empty() ? RunConfig{} : load_config(mine_config);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, std::string(alphamcts::detail::trim(kv.substr(0, eq))),
                         std::string(alphamcts::detail::trim(kv.substr(eq + 1))));
      }
      if (use_mock) cfg.generator = "mock";
      if (seed) cfg.seed = *seed;
      if (max_generations) cfg.max_generations = *max_generations;
      if (max_trees) cfg.max_trees = *max_trees;
      if (record) cfg.record_traffic = true;
      if (resume) {
        // The snapshot is authoritative for everything but the stop conditions.
        const auto snapshot = std::filesystem::path(run_dir) / kConfigSnapshot;
        if (!std::filesystem::exists(snapshot))
          throw ConfigError("run directory '" + run_dir + "' has no " + kConfigSnapshot);
        RunConfig saved = load_config(snapshot);
        saved.max_generations = cfg.max_generations;
        saved.max_trees = cfg.max_trees;
        saved.max_wall_seconds = cfg.max_wall_seconds;
        cfg = saved;
      }
      check_config(cfg);
      Miner m(cfg, run_dir);
      if (resume) m.resume();
      else m.start();
      m.run();
      detail::print_run_summary(out, m, run_dir);
      return kOk;
    }

    if (*replay) {
      const std::filesystem::path from(replay_from);
      RunConfig cfg = load_config(from / kConfigSnapshot);
      if (cfg.generator != "llm") throw ConfigError("run '" + replay_from + "' used the offline generator; nothing to replay");
      const auto log = from / kTrafficFile;
      if (!std::filesystem::exists(log)) throw ConfigError("run '" + replay_from + "' has no " + kTrafficFile);
      cfg.replay_file = log.string();
      cfg.record_traffic = false;
      Miner m(cfg, replay_dir);
      m.start();
      m.run();
      detail::print_run_summary(out, m, replay_dir);
      return kOk;
    }

    if (*eval || *bt) {
      const bool is_eval = static_cast<bool>(*eval);
      const RunConfig cfg = (is_eval ? eval_data : bt_data).resolve();
      AlphaFormula f;
      try {
        f = load_formula(is_eval ? eval_formula : bt_formula);
      } catch (const InterchangeError& e) {
        err << "invalid formula: " << e.what() << '\n';
        return kInvalidFormula;
      }
      if (const auto v = validate(f, cfg.window); !v.empty()) {
        err << "invalid formula:\n" << format_violations(v) << '\n';
        return kInvalidFormula;
      }
      const MarketPanel panel = load_run_panel(cfg);
      const AlphaEvaluator ev(panel, cfg.backtest);
      const auto chosen = is_eval ? arg_set : bt_arg_set;
      Candidate c;
      if (chosen) {
        if (*chosen < 1 || *chosen > f.argument_sets.size()) {
          err << "--arg-set " << *chosen << " out of range: formula has " << f.argument_sets.size()
              << " argument set(s)\n";
          return kInvalidFormula;
        }
        c.formula = f;
        c.chosen_argument_set = *chosen - 1;
        c.matrix = evaluate(f, c.chosen_argument_set, panel);
        c.metrics = ev.metrics(c.matrix);
      } else {
        try {
          c = ev.evaluate(f);
        } catch (const NoValidConfiguration& e) {
          err << "undefined metrics: " << e.what() << '\n';
          return kUndefinedMetric;
        }
      }

      if (is_eval) {
        out << "formula   " << to_infix(c.formula, c.chosen_argument_set) << '\n'
            << "arg set   " << c.chosen_argument_set + 1 << " of " << f.argument_sets.size() << '\n'
            << "panel     " << panel.days() << " days x " << panel.stocks() << " stocks, horizon "
            << cfg.backtest.horizon << "\n\n";
        detail::metric_table(out, c.metrics);
        if (!dump_values.empty()) {
          std::ofstream dump(dump_values);
          if (!dump) throw Error("cannot write " + dump_values);
          write_alpha_csv(c.matrix, panel, dump);
        }
        if (!std::isfinite(c.metrics.rank_ic)) {
          err << "undefined metrics: no day has 3 or more valid stocks\n";
          return kUndefinedMetric;
        }
        return kOk;
      }

      const auto res = simulate_topk(c.matrix, ev.next_day(), cfg.backtest);
      out << "k=" << res.k << " w=" << cfg.backtest.horizon << " n=" << res.n_drop << '\n'
          << "formula   " << to_infix(c.formula, c.chosen_argument_set) << '\n'
          << "cost      " << detail::num(cfg.backtest.cost_rate, 6) << '\n'
          << "days      " << res.per_period_returns.size() << '\n'
          << "AR        " << detail::num(res.ar) << '\n'
          << "IR        " << detail::num(res.ir) << '\n'
          << "turnover  " << detail::num(res.daily_turnover) << '\n';
      if (!bt_out.empty()) {
        std::ofstream csv(bt_out);
        if (!csv) throw Error("cannot write " + bt_out);
        csv << "date,net_return,cumulative_return\n";
        double wealth = 1.0;
        for (std::size_t k = 0; k < res.days.size(); ++k) {
          wealth *= 1.0 + res.per_period_returns[k];
          csv << panel.dates()[res.days[k].day] << ',' << alphamcts::detail::format_double(res.per_period_returns[k])
              << ',' << alphamcts::detail::format_double(wealth - 1.0) << '\n';
        }
      }
      if (res.per_period_returns.empty()) {
        err << "undefined metrics: no tradable day\n";
        return kUndefinedMetric;
      }
      return kOk;
    }

    if (*zoo) {
      const std::filesystem::path dir(zoo_dir);
      if (!std::filesystem::is_directory(dir)) throw ConfigError("run directory '" + zoo_dir + "' not found");
      auto rows = detail::read_zoo_metrics(dir / kZooMetricsFile);
      if (*zoo_list) {
        detail::print_zoo_rows(out, rows);
        return kOk;
      }
      if (*zoo_export) {
        const auto stored = read_zoo_file(dir / kZooFile);
        std::map<std::size_t, std::string> lines;
        for (const auto& s : stored) {
          auto doc = interchange_json(s.formula);
          doc["id"] = s.id;
          doc["accepted_at"] = s.accepted_at;
          doc["chosen_argument_set"] = s.chosen_argument_set;
          lines[s.id] = doc.dump();
        }
        auto key = [](const detail::ZooRow& r) { return std::isfinite(r.rank_ir) ? r.rank_ir : -HUGE_VAL; };
        std::stable_sort(rows.begin(), rows.end(),
                         [&](const detail::ZooRow& a, const detail::ZooRow& b) { return key(a) > key(b); });
        if (rows.size() > export_k) rows.resize(export_k);
        std::ofstream jsonl(export_out + ".jsonl"), csv(export_out + ".csv");
        if (!jsonl || !csv) throw Error("cannot write " + export_out + ".jsonl/.csv");
        csv << metrics_csv_header() << '\n';
        for (const auto& r : rows) {
          jsonl << lines.at(r.id) << '\n';
          csv << r.line << '\n';
        }
        out << "exported " << rows.size() << " alpha(s) to " << export_out << ".jsonl and .csv\n";
        return kOk;
      }
      std::vector<double> ic, ir, to;
      for (const auto& r : rows) {
        if (std::isfinite(r.rank_ic)) ic.push_back(r.rank_ic);
        if (std::isfinite(r.rank_ir)) ir.push_back(r.rank_ir);
        if (std::isfinite(r.turnover)) to.push_back(r.turnover);
      }
      auto line = [&](const char* name, const std::vector<double>& v) {
        out << std::left << std::setw(10) << name;
        if (v.empty()) {
          out << "-\n";
          return;
        }
        out << "mean " << detail::num(stats::mean(v)) << "  min " << detail::num(*std::min_element(v.begin(), v.end()))
            << "  max " << detail::num(*std::max_element(v.begin(), v.end())) << '\n';
      };
      out << "alphas    " << rows.size() << '\n';
      line("RankIC", ic);
      line("RankIR", ir);
      line("turnover", to);
      return kOk;
    }

    if (*fsa) {
      std::filesystem::path path(fsa_zoo);
      if (std::filesystem::is_directory(path)) path /= kZooFile;
      if (!std::filesystem::exists(path)) throw ConfigError("zoo file '" + path.string() + "' not found");
      std::vector<AlphaFormula> formulas;
      for (auto& s : read_zoo_file(path)) formulas.push_back(std::move(s.formula));
      const auto genes = mine_closed_genes(formulas, fsa_support);
      const auto avoid = update_avoidance(formulas, fsa_k, fsa_support);
      out << "formulas " << formulas.size() << ", min support " << fsa_support << ", avoid top " << fsa_k << "\n";
      out << std::left << std::setw(8) << "support" << std::setw(7) << "nodes" << std::setw(7) << "avoid"
          << "gene\n";
      for (const auto& g : genes) {
        const bool marked = std::any_of(avoid.begin(), avoid.end(), [&](const RootGene& a) { return a.key == g.gene.key; });
        out << std::left << std::setw(8) << g.support << std::setw(7) << g.nodes << std::setw(7) << (marked ? "*" : "")
            << gene_infix(g.gene) << '\n';
      }
      return kOk;
    }

    if (*synth) {
      const auto panel = synthetic_panel(spec);
      save_panel(panel, synth_out);
      out << "wrote " << panel.days() << " days x " << panel.stocks() << " stocks to " << synth_out << '\n';
      return kOk;
    }
  } catch (const GeneratorUnavailable& e) {
    err << "generator unavailable: " << e.what() << '\n';
    return kGeneratorUnavailable;
  } catch (const UndefinedMetric& e) {
    err << "undefined metrics: " << e.what() << '\n';
    return kUndefinedMetric;
  } catch (const InterchangeError& e) {
    err << "invalid formula: " << e.what() << '\n';
    return kInvalidFormula;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigOrIo;
  }
  return kOk;
}

}  // namespace alphamcts::cli
