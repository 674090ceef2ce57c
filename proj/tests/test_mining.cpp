#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace alphamcts;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.synthetic.days = 200;
  cfg.synthetic.stocks = 30;
  cfg.max_generations = 40;
  return cfg;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

// Configuration.

TEST(Config, ParsesKeysSectionsAndComments) {
  std::istringstream in(
      "# run settings\n"
      "[search]\n"
      "uct_c = 0.5   # exploration\n"
      "budget_scope = global\n"
      "generator = \"llm\"\n"
      "window_lo = 5\n"
      "record_traffic = yes\n");
  const auto cfg = parse_config(in);
  EXPECT_DOUBLE_EQ(cfg.search.uct_c, 0.5);
  EXPECT_EQ(cfg.search.budget_scope, BudgetScope::global);
  EXPECT_EQ(cfg.generator, "llm");
  EXPECT_EQ(cfg.window.lo, 5);
  EXPECT_TRUE(cfg.record_traffic);
}

TEST(Config, Defaults) {
  const RunConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.search.uct_c, 1.0);
  EXPECT_EQ(cfg.search.budget_init, 3);
  EXPECT_EQ(cfg.search.budget_increment, 1);
  EXPECT_EQ(cfg.k_avoid, 3u);
  EXPECT_EQ(cfg.window.lo, 2);
  EXPECT_EQ(cfg.window.hi, 250);
  EXPECT_DOUBLE_EQ(cfg.search.gates.min_rank_ic, 0.015);
  EXPECT_DOUBLE_EQ(cfg.search.gates.max_correlation, 0.8);
  EXPECT_DOUBLE_EQ(cfg.backtest.top_fraction, 0.1);
  EXPECT_NO_THROW(check_config(cfg));
}

TEST(Config, TextRoundTrip) {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.data = "/tmp/some dir/panel.csv";
  cfg.search.temperature = 0.25;
  cfg.endpoint = "mock://";
  std::istringstream in(config_text(cfg));
  const auto back = parse_config(in);
  EXPECT_EQ(config_text(back), config_text(cfg));
  EXPECT_EQ(back.data, cfg.data);
}

TEST(Config, Errors) {
  std::istringstream unknown("nonsense = 3\n");
  try {
    parse_config(unknown);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  std::istringstream bad_value("\nuct_c = lots\n");
  try {
    parse_config(bad_value);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("uct_c"), std::string::npos);
  }
  std::istringstream no_eq("uct_c 3\n");
  EXPECT_THROW(parse_config(no_eq), ParseError);

  RunConfig cfg;
  cfg.window = {10, 5};
  EXPECT_THROW(check_config(cfg), ConfigError);
  cfg = {};
  cfg.generator = "oracle";
  EXPECT_THROW(check_config(cfg), ConfigError);
  cfg = {};
  cfg.backtest.top_fraction = 0.0;
  EXPECT_THROW(check_config(cfg), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
  cfg = {};
  cfg.data = "/nonexistent/panel.csv";
  EXPECT_THROW(load_run_panel(cfg), ConfigError);
}

// Mining runs.

TEST(Miner, WritesRunDirectory) {
  const auto dir = support::scratch_dir("miner_layout");
  Miner m(small_config(), dir);
  m.start();
  m.run();
  EXPECT_LE(m.counters().generations, 40u);
  EXPECT_GT(m.counters().trees, 0u);
  for (const char* f : {kConfigSnapshot, kZooFile, kTraceFile, kStateFile, kManifestFile})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  for (auto k : kExportSizes) {
    EXPECT_TRUE(std::filesystem::exists(dir / kExportDir / ("top_" + std::to_string(k) + ".jsonl")));
    EXPECT_TRUE(std::filesystem::exists(dir / kExportDir / ("top_" + std::to_string(k) + ".csv")));
  }
  EXPECT_EQ(read_zoo_file(dir / kZooFile).size(), m.zoo().size());
  const auto manifest = nlohmann::json::parse(support::read_file(dir / kManifestFile));
  EXPECT_EQ(manifest.value("status", ""), "completed");
  // Every stored alpha passes its gates against the entries accepted before it.
  for (const auto& e : m.zoo().entries()) {
    EXPECT_GE(e.metrics.rank_ic, 0.015);
    EXPECT_GE(e.metrics.rank_ir, 0.3);
    EXPECT_LE(e.metrics.daily_turnover, 1.6);
    EXPECT_LT(e.max_corr_at_insert, 0.8);
  }
  std::filesystem::remove_all(dir);
}

TEST(Miner, RefusesNonEmptyDirectory) {
  const auto dir = support::scratch_dir("miner_busy");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "stray.txt") << "x";
  Miner m(small_config(), dir);
  EXPECT_THROW(m.start(), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Miner, SameSeedSameRun) {
  const auto a = support::scratch_dir("miner_det_a"), b = support::scratch_dir("miner_det_b");
  for (const auto& d : {a, b}) {
    Miner m(small_config(), d);
    m.start();
    m.run();
  }
  EXPECT_EQ(support::read_file(a / kZooFile), support::read_file(b / kZooFile));
  EXPECT_EQ(support::read_file(a / kTraceFile), support::read_file(b / kTraceFile));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Miner, ResumeMatchesUninterruptedRun) {
  auto cfg = small_config();
  cfg.max_generations = 1000;
  const auto whole = support::scratch_dir("miner_whole"), split = support::scratch_dir("miner_split");
  cfg.max_trees = 6;
  {
    Miner m(cfg, whole);
    m.start();
    m.run();
  }
  cfg.max_trees = 3;
  {
    Miner m(cfg, split);
    m.start();
    m.run();
  }
  cfg.max_trees = 6;
  {
    Miner m(cfg, split);
    m.resume();
    m.run();
    EXPECT_EQ(m.counters().trees, 6u);
  }
  for (const char* f : {kZooFile, kTraceFile, kStateFile})
    EXPECT_EQ(support::read_file(whole / f), support::read_file(split / f)) << f;
  std::filesystem::remove_all(whole);
  std::filesystem::remove_all(split);
}

TEST(Miner, ResumeNeedsState) {
  const auto dir = support::scratch_dir("miner_nostate");
  std::filesystem::create_directories(dir);
  Miner m(small_config(), dir);
  EXPECT_THROW(m.resume(), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Miner, ChatEmulatorRun) {
  auto cfg = small_config();
  cfg.generator = "llm";
  cfg.endpoint = "mock://";
  cfg.record_traffic = true;
  cfg.max_generations = 12;
  const auto dir = support::scratch_dir("miner_chat");
  Miner m(cfg, dir);
  m.start();
  m.run();
  const auto traffic = support::read_file(dir / kTrafficFile);
  EXPECT_GE(std::count(traffic.begin(), traffic.end(), '\n'), 24);
  std::filesystem::remove_all(dir);
}

TEST(Miner, UnreachableEndpointIsGeneratorUnavailable) {
  auto cfg = small_config();
  cfg.generator = "llm";
  cfg.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  cfg.retry_attempts = 2;
  cfg.retry_base_ms = 1;
  cfg.timeout_seconds = 2;
  const auto dir = support::scratch_dir("miner_down");
  Miner m(cfg, dir);
  m.start();
  EXPECT_THROW(m.run(), GeneratorUnavailable);
  const auto manifest = nlohmann::json::parse(support::read_file(dir / kManifestFile));
  EXPECT_EQ(manifest.value("status", ""), "generator unavailable");
  std::filesystem::remove_all(dir);
}

// Command line.

TEST(Cli, EvalPrintsMetrics) {
  const auto r = invoke({"eval", "Zscore(Ma(close-vwap,20),30)", "--synthetic-seed", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("RankIC"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({"eval", "Zscore(Ma(close-vwap,20)"}).code, 3);
  EXPECT_EQ(invoke({"eval", "Ma(close-vwap,1)"}).code, 3);
  const auto missing = invoke({"eval", "Ma(close-vwap,5)", "--data", "/nonexistent/p.csv"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("/nonexistent/p.csv"), std::string::npos);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"mine"}).code, 2);

  const auto dir = support::scratch_dir("cli_down");
  const auto down = invoke({"mine", "--run-dir", dir.string(), "--set", "generator=llm", "--set",
                         "endpoint=http://127.0.0.1:9/v1/chat/completions", "--set", "retry_attempts=1", "--set",
                         "synthetic_days=120", "--set", "synthetic_stocks=20"});
  EXPECT_EQ(down.code, 5) << down.err;
  std::filesystem::remove_all(dir);
}

TEST(Cli, UndefinedMetricExitCode) {
  const auto dir = support::scratch_dir("cli_flat");
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "flat.csv");
    csv << "date,symbol,open,high,low,close,volume,vwap\n";
    for (int d = 1; d <= 9; ++d)
      for (const char* s : {"A", "B", "C", "D"})
        csv << "2024-01-0" << d << "," << s << ",10,10,10,10,100,10\n";
  }
  const auto r = invoke({"eval", "Ma(close-vwap,2)", "--data", (dir / "flat.csv").string()});
  EXPECT_EQ(r.code, 4) << r.out << r.err;
  std::filesystem::remove_all(dir);
}

TEST(Cli, MineThenInspect) {
  const auto dir = support::scratch_dir("cli_mine");
  const auto run = dir / "run";
  auto r = invoke({"mine", "--mock", "--run-dir", run.string(), "--max-generations", "30", "--set", "synthetic_days=200",
                "--set", "synthetic_stocks=30"});
  ASSERT_EQ(r.code, 0) << r.err;
  // A second fresh start on the same directory is refused.
  EXPECT_EQ(invoke({"mine", "--mock", "--run-dir", run.string()}).code, 2);
  r = invoke({"mine", "--resume", "--run-dir", run.string(), "--max-generations", "45"});
  EXPECT_EQ(r.code, 0) << r.err;
  r = invoke({"zoo", "stats", "--run-dir", run.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  r = invoke({"zoo", "list", "--run-dir", run.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  r = invoke({"zoo", "export", "--run-dir", run.string(), "--top", "5", "--out", (dir / "best").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "best.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir / "best.csv"));
  r = invoke({"fsa", run.string(), "--min-support", "1", "-k", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  std::filesystem::remove_all(dir);
}

TEST(Cli, SynthBacktestAndReplay) {
  const auto dir = support::scratch_dir("cli_misc");
  std::filesystem::create_directories(dir);
  const auto csv = (dir / "panel.csv").string();
  auto r = invoke({"synth", "--out", csv, "--days", "120", "--stocks", "20", "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto panel = load_panel(csv);
  EXPECT_EQ(panel.days(), 120u);
  EXPECT_EQ(panel.stocks(), 20u);

  r = invoke({"backtest", "Ma(close-vwap,10)", "--data", csv, "--out", (dir / "bt.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto bt = support::read_file(dir / "bt.csv");
  EXPECT_EQ(bt.rfind("date,net_return,cumulative_return\n", 0), 0u);

  r = invoke({"eval", "Ma(close-vwap,10)", "--data", csv, "--dump-values", (dir / "values.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "values.csv"));

  const auto live = dir / "live";
  r = invoke({"mine", "--run-dir", live.string(), "--record", "--max-generations", "10", "--set", "generator=llm",
           "--set", "endpoint=mock://", "--set", "data=" + csv});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"replay", "--from", live.string(), "--run-dir", (dir / "again").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(support::read_file(live / kZooFile), support::read_file(dir / "again" / kZooFile));
  EXPECT_EQ(support::read_file(live / kTraceFile), support::read_file(dir / "again" / kTraceFile));
  std::filesystem::remove_all(dir);
}
