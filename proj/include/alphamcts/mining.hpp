#pragma once

#include <chrono>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphamcts/chat.hpp"
#include "alphamcts/config.hpp"
#include "alphamcts/evaluator.hpp"
#include "alphamcts/fsa.hpp"
#include "alphamcts/generator.hpp"
#include "alphamcts/mcts.hpp"
#include "alphamcts/mock_chat.hpp"
#include "alphamcts/prompts.hpp"
#include "alphamcts/zoo.hpp"

namespace alphamcts {

// Run directory layout.
inline constexpr const char* kConfigSnapshot = "config.txt";
inline constexpr const char* kTraceFile = "trace.log";
inline constexpr const char* kStateFile = "state.json";
inline constexpr const char* kTransportStateFile = "transport_state.json";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTrafficFile = "llm_traffic.jsonl";
inline constexpr const char* kExportDir = "exports";
inline constexpr std::size_t kExportSizes[] = {10, 50, 100};

struct MiningCounters {
  std::size_t generations = 0;  ///< seed and refine calls
  std::size_t trees = 0;
  std::size_t expansions = 0;
  std::size_t skipped = 0;
  std::size_t repairs = 0;
  std::size_t accepted = 0;
};

inline nlohmann::ordered_json to_json(const MiningCounters& c) {
  return {{"generations", c.generations}, {"trees", c.trees},       {"expansions", c.expansions},
          {"skipped", c.skipped},         {"repairs", c.repairs},   {"accepted", c.accepted}};
}

inline MiningCounters counters_from_json(const nlohmann::json& j) {
  MiningCounters c;
  c.generations = j.at("generations");
  c.trees = j.at("trees");
  c.expansions = j.at("expansions");
  c.skipped = j.at("skipped");
  c.repairs = j.at("repairs");
  c.accepted = j.at("accepted");
  return c;
}

/// A generator assembled from the config, plus handles the miner needs for
/// checkpointing.
struct GeneratorBundle {
  std::unique_ptr<AlphaGenerator> generator;
  std::shared_ptr<MockChatTransport> mock_chat;  ///< set when the chat emulator is in use
};

/// mock -> MockGenerator. llm -> LlmGenerator over, in order of precedence:
/// a replay log, the offline chat emulator (endpoint mock://), or HTTP with
/// retries. Recording wraps whichever live transport was chosen.
inline GeneratorBundle make_generator(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  GeneratorBundle b;
  if (cfg.generator == "mock") {
    b.generator = std::make_unique<MockGenerator>(cfg.seed);
  } else {
    std::shared_ptr<ChatTransport> transport;
    if (!cfg.replay_file.empty()) {
      transport = std::make_shared<ReplayTransport>(cfg.replay_file);
    } else {
      if (cfg.endpoint.rfind("mock://", 0) == 0) {
        b.mock_chat = std::make_shared<MockChatTransport>(cfg.seed);
        transport = b.mock_chat;
      } else {
        auto http = std::make_shared<HttpChatTransport>(HttpSettings{cfg.endpoint, cfg.api_key_env, cfg.timeout_seconds});
        transport = std::make_shared<RetryingTransport>(
            http, RetryPolicy{cfg.retry_attempts, cfg.retry_base_ms, cfg.retry_multiplier});
      }
      if (cfg.record_traffic) transport = std::make_shared<RecordingTransport>(transport, run_dir / kTrafficFile);
    }
    auto prompts = cfg.prompt_dir.empty() ? PromptSet::builtin() : PromptSet::load(cfg.prompt_dir);
    b.generator = std::make_unique<LlmGenerator>(transport, std::move(prompts), cfg.model);
  }
  b.generator->set_max_repairs(cfg.max_repairs);
  return b;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

/// True when `dir` exists and holds anything.
inline bool directory_in_use(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir) && !std::filesystem::is_empty(dir);
}

/// Drives repeated tree searches over one panel and persists everything to a
/// run directory. All randomness derives from the config seed.
class Miner {
 public:
  Miner(RunConfig cfg, std::filesystem::path run_dir)
      : cfg_(std::move(cfg)),
        dir_(std::move(run_dir)),
        panel_(load_run_panel(cfg_)),
        evaluator_(panel_, cfg_.backtest),
        rng_(cfg_.seed ^ 0x9e3779b97f4a7c15ULL) {
    check_config(cfg_);
  }

  /// Fresh run: the directory must be absent or empty.
  void start() {
    if (directory_in_use(dir_))
      throw ConfigError("run directory '" + dir_.string() + "' is not empty; use --resume to continue it");
    std::filesystem::create_directories(dir_);
    write_file(dir_ / kConfigSnapshot, config_text(cfg_));
    write_file(dir_ / kZooFile, "");
    write_file(dir_ / kTraceFile, "");
    gen_ = make_generator(cfg_, dir_);
    started_at_ = utc_timestamp();
    run_id_ = dir_.filename().string();
  }

  /// Continues a run from its last completed tree. Accepted alphas are
  /// re-evaluated from zoo.jsonl; the search state comes from state.json.
  void resume() {
    if (!std::filesystem::exists(dir_ / kStateFile))
      throw ConfigError("run directory '" + dir_.string() + "' has no " + kStateFile + " to resume from");
    gen_ = make_generator(cfg_, dir_);
    for (const auto& s : read_zoo_file(dir_ / kZooFile)) {
      Candidate c;
      c.formula = s.formula;
      c.chosen_argument_set = s.chosen_argument_set;
      c.matrix = evaluate(s.formula, s.chosen_argument_set, panel_);
      c.metrics = evaluator_.metrics(c.matrix);
      zoo_.restore(c, s.id, s.accepted_at);
    }
    std::ifstream in(dir_ / kStateFile);
    const auto st = nlohmann::json::parse(in);
    counters_ = counters_from_json(st.at("counters"));
    rng_.load(st.at("rng").get<std::string>());
    gen_.generator->load_state(st.at("generator"));
    global_best_ = st.at("global_best").is_null() ? -std::numeric_limits<double>::infinity()
                                                  : st.at("global_best").get<double>();
    if (gen_.mock_chat && std::filesystem::exists(dir_ / kTransportStateFile)) {
      std::ifstream tin(dir_ / kTransportStateFile);
      gen_.mock_chat->load_state(nlohmann::json::parse(tin).at("state").get<std::string>());
    }
    started_at_ = utc_timestamp();
    if (std::filesystem::exists(dir_ / kManifestFile)) {
      std::ifstream min(dir_ / kManifestFile);
      started_at_ = nlohmann::json::parse(min).value("started_at", started_at_);
    }
    run_id_ = dir_.filename().string();
    // Truncate the trace to the checkpoint so a crashed tree's lines vanish.
    const auto trace_bytes = st.at("trace_bytes").get<std::uintmax_t>();
    if (std::filesystem::exists(dir_ / kTraceFile) && std::filesystem::file_size(dir_ / kTraceFile) > trace_bytes)
      std::filesystem::resize_file(dir_ / kTraceFile, trace_bytes);
  }

  /// Mines until a stop condition holds, then writes exports and the manifest.
  void run() {
    const auto wall_start = std::chrono::steady_clock::now();
    auto wall_exceeded = [&] {
      if (cfg_.max_wall_seconds <= 0) return false;
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count() >=
             cfg_.max_wall_seconds;
    };
    std::ofstream trace(dir_ / kTraceFile, std::ios::app);
    try {
      while (counters_.generations < cfg_.max_generations && !wall_exceeded() &&
             (cfg_.max_trees == 0 || counters_.trees < cfg_.max_trees)) {
        GenerationContext ctx;
        ctx.window = cfg_.window;
        ctx.avoid = update_avoidance(zoo_.formulas(), cfg_.k_avoid, cfg_.min_support);
        const auto tree_index = counters_.trees + 1;
        trace << "tree " << tree_index << " avoid " << (ctx.avoid.empty() ? "(none)" : join_genes(ctx.avoid)) << '\n';
        TreeHooks hooks;
        hooks.trace = &trace;
        hooks.may_generate = [&] {
          if (counters_.generations >= cfg_.max_generations || wall_exceeded()) return false;
          ++counters_.generations;
          return true;
        };
        const auto repairs_before = gen_.generator->stats().repairs;
        TreeSearch search(*gen_.generator, evaluator_, zoo_, cfg_.search, rng_);
        const auto out = search.run(ctx, tree_index, global_best_, hooks);
        counters_.trees += 1;
        counters_.expansions += out.expansions;
        counters_.skipped += out.skipped;
        counters_.repairs += gen_.generator->stats().repairs - repairs_before;
        for (auto id : out.accepted) append_zoo_entry(dir_, *zoo_.find(id));
        counters_.accepted += out.accepted.size();
        trace << "tree " << tree_index << " done nodes " << out.nodes.size() << " expansions " << out.expansions
              << " skipped " << out.skipped << " accepted " << out.accepted.size() << " zoo " << zoo_.size()
              << '\n';
        trace.flush();
        checkpoint();
      }
    } catch (const GeneratorUnavailable&) {
      trace.flush();
      write_manifest("generator unavailable");
      throw;
    }
    trace.flush();
    write_exports();
    write_manifest("completed");
  }

  const AlphaZoo& zoo() const { return zoo_; }
  const MiningCounters& counters() const { return counters_; }
  const MarketPanel& panel() const { return panel_; }
  const RunConfig& config() const { return cfg_; }
  AlphaGenerator& generator() { return *gen_.generator; }

 private:
  static void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
  }

  static std::string join_genes(const std::vector<RootGene>& genes) {
    std::string s;
    for (const auto& g : genes) s += (s.empty() ? "" : " ; ") + gene_infix(g);
    return s;
  }

  void checkpoint() {
    nlohmann::ordered_json st;
    st["counters"] = to_json(counters_);
    st["rng"] = rng_.save();
    st["generator"] = gen_.generator->save_state();
    st["global_best"] = std::isfinite(global_best_) ? nlohmann::ordered_json(global_best_) : nlohmann::ordered_json();
    st["trace_bytes"] = std::filesystem::file_size(dir_ / kTraceFile);
    write_file(dir_ / kStateFile, st.dump(2) + "\n");
    if (gen_.mock_chat)
      write_file(dir_ / kTransportStateFile, nlohmann::ordered_json{{"state", gen_.mock_chat->save_state()}}.dump() + "\n");
  }

  void write_exports() {
    const auto ex = dir_ / kExportDir;
    std::filesystem::create_directories(ex);
    for (auto k : kExportSizes) {
      std::string jsonl, csv = metrics_csv_header() + "\n";
      for (const auto* e : zoo_.export_topk(k)) {
        jsonl += zoo_line(*e) + "\n";
        csv += metrics_csv_row(*e) + "\n";
      }
      write_file(ex / ("top_" + std::to_string(k) + ".jsonl"), jsonl);
      write_file(ex / ("top_" + std::to_string(k) + ".csv"), csv);
    }
  }

  void write_manifest(const std::string& status) {
    nlohmann::ordered_json m;
    m["run_id"] = run_id_;
    m["status"] = status;
    m["started_at"] = started_at_;
    m["finished_at"] = utc_timestamp();
    m["config"] = kConfigSnapshot;
    m["counters"] = to_json(counters_);
    m["zoo_size"] = zoo_.size();
    write_file(dir_ / kManifestFile, m.dump(2) + "\n");
  }

  RunConfig cfg_;
  std::filesystem::path dir_;
  MarketPanel panel_;
  AlphaEvaluator evaluator_;
  AlphaZoo zoo_;
  Rng rng_;
  GeneratorBundle gen_;
  MiningCounters counters_;
  double global_best_ = -std::numeric_limits<double>::infinity();
  std::string started_at_;
  std::string run_id_;
};

}  // namespace alphamcts
