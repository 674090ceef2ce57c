#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace alphamcts;

namespace {

Candidate candidate(const AlphaFormula& f, double ric, double rir, double turnover, MaskedGrid matrix) {
  Candidate c;
  c.formula = f;
  c.metrics.rank_ic = ric;
  c.metrics.rank_ir = rir;
  c.metrics.daily_turnover = turnover;
  c.matrix = std::move(matrix);
  return c;
}

bool has_failure(const GateResult& g, const std::string& gate) {
  for (const auto& f : g.failures)
    if (f.rfind(gate + ":", 0) == 0 || f.rfind(gate, 0) == 0) return true;
  return false;
}

}  // namespace

// Relative rank.

TEST(RelativeRank, MatchesCountingOracle) {
  std::mt19937_64 gen(44);
  std::uniform_int_distribution<int> small(0, 6);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> repo(gen() % 12);
    for (auto& v : repo) v = small(gen);  // many ties
    const double value = small(gen);
    EXPECT_DOUBLE_EQ(relative_rank(value, repo, Better::higher), oracle::relative_rank(value, repo, true));
    EXPECT_DOUBLE_EQ(relative_rank(value, repo, Better::lower), oracle::relative_rank(value, repo, false));
  }
}

TEST(RelativeRank, EdgeCases) {
  const std::vector<double> repo{0.1, 0.2, 0.3, 0.4};
  EXPECT_DOUBLE_EQ(relative_rank(0.25, repo), 0.5);
  EXPECT_DOUBLE_EQ(relative_rank(0.4, repo), 0.0);   // ties do not beat
  EXPECT_DOUBLE_EQ(relative_rank(0.0, repo), 1.0);
  EXPECT_DOUBLE_EQ(relative_rank(0.25, repo, Better::lower), 0.5);
  EXPECT_DOUBLE_EQ(relative_rank(0.5, {}), 0.0);
  EXPECT_DOUBLE_EQ(relative_rank(oracle::NaN, repo), 1.0);
  const std::vector<double> with_nan{0.1, oracle::NaN, 0.3};
  EXPECT_DOUBLE_EQ(relative_rank(0.2, with_nan), 0.5);
}

// Gates.

TEST(ZooGates, AbsoluteThresholds) {
  AlphaZoo zoo;
  std::mt19937_64 gen(1);
  const auto m = support::random_grid(40, 20, gen);
  const auto f = support::formula("Ma(close-vwap,5)");
  EXPECT_TRUE(zoo.check(candidate(f, 0.05, 0.5, 1.0, m), {}).pass);
  EXPECT_TRUE(has_failure(zoo.check(candidate(f, 0.01, 0.5, 1.0, m), {}), "min_rank_ic"));
  EXPECT_TRUE(has_failure(zoo.check(candidate(f, 0.05, 0.2, 1.0, m), {}), "min_rank_ir"));
  EXPECT_TRUE(has_failure(zoo.check(candidate(f, 0.05, 0.5, 1.7, m), {}), "max_turnover"));
  EXPECT_TRUE(has_failure(zoo.check(candidate(f, oracle::NaN, 0.5, 1.0, m), {}), "min_rank_ic"));
  // Boundary values pass.
  EXPECT_TRUE(zoo.check(candidate(f, 0.015, 0.3, 1.6, m), {}).pass);
}

TEST(ZooGates, CorrelationAndDuplicate) {
  AlphaZoo zoo;
  std::mt19937_64 gen(2);
  const auto m = support::random_grid(40, 20, gen);
  const auto fs = support::distinct_formulas(3);
  ASSERT_TRUE(zoo.try_insert(candidate(fs[0], 0.05, 0.5, 1.0, m), {}));
  auto near = m;
  for (std::size_t t = 0; t < near.rows(); ++t)
    for (std::size_t i = 0; i < near.cols(); ++i) near.set(t, i, 3.0 * m.values(t, i) + 0.01 * (t % 3));
  const auto g = zoo.check(candidate(fs[1], 0.05, 0.5, 1.0, near), {});
  EXPECT_FALSE(g.pass);
  EXPECT_TRUE(has_failure(g, "max_correlation"));
  EXPECT_GT(g.correlation.value, 0.99);
  EXPECT_EQ(g.correlation.id, std::optional<std::size_t>(1));

  const auto fresh = support::random_grid(40, 20, gen);
  const auto d = zoo.check(candidate(fs[0], 0.05, 0.5, 1.0, fresh), {});
  EXPECT_TRUE(has_failure(d, "duplicate"));
  EXPECT_TRUE(zoo.check(candidate(fs[2], 0.05, 0.5, 1.0, fresh), {}).pass);
}

TEST(ZooGates, RelativeRankGates) {
  AlphaZoo zoo;
  std::mt19937_64 gen(3);
  const auto fs = support::distinct_formulas(25);
  for (std::size_t k = 0; k < 20; ++k)
    ASSERT_TRUE(zoo.try_insert(candidate(fs[k], 0.02 + 0.01 * k, 0.4 + 0.05 * k, 1.0, support::random_grid(60, 30, gen)), {}))
        << k;
  // Beaten by every stored entry on RankIC: relative rank 1 > 0.95.
  const auto weak = zoo.check(candidate(fs[20], 0.016, 2.0, 1.0, support::random_grid(60, 30, gen)), {});
  EXPECT_TRUE(has_failure(weak, "max_rel_rank_ic"));
  EXPECT_FALSE(has_failure(weak, "max_rel_rank_ir"));
  // Beaten by 19 of 20 on RankIR: 0.95 passes.
  const auto edge = zoo.check(candidate(fs[21], 0.5, 0.41, 1.0, support::random_grid(60, 30, gen)), {});
  EXPECT_TRUE(edge.pass) << (edge.failures.empty() ? "" : edge.failures[0]);
  EXPECT_TRUE(has_failure(zoo.check(candidate(fs[22], 0.5, 0.39, 1.0, support::random_grid(60, 30, gen)), {}),
                          "max_rel_rank_ir"));
}

TEST(ZooGates, MaxCorrelationTracksLaterInserts) {
  AlphaZoo zoo;
  std::mt19937_64 gen(4);
  const auto fs = support::distinct_formulas(2);
  const auto a = support::random_grid(40, 20, gen);
  auto b = support::random_grid(40, 20, gen);
  for (std::size_t t = 0; t < b.rows(); ++t)
    for (std::size_t i = 0; i < b.cols(); ++i) b.set(t, i, a.values(t, i) + 1.2 * b.values(t, i));
  ASSERT_TRUE(zoo.try_insert(candidate(fs[0], 0.05, 0.5, 1.0, a), {}));
  EXPECT_EQ(zoo.entries()[0].max_corr, -HUGE_VAL);
  ASSERT_TRUE(zoo.try_insert(candidate(fs[1], 0.05, 0.5, 1.0, b), {}));
  const double c = std::abs(pairwise_alpha_correlation(a, b));
  EXPECT_DOUBLE_EQ(zoo.entries()[0].max_corr, c);
  EXPECT_DOUBLE_EQ(zoo.entries()[1].max_corr_at_insert, c);
}

// Exemplars.

class Exemplars : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 gen(5);
    current = support::random_grid(50, 25, gen);
    const auto fs = support::distinct_formulas(4);
    const double scale[] = {0.1, 0.5, 2.0, 10.0};
    const double ric[] = {0.09, 0.08, 0.03, 0.05};
    const double rir[] = {0.9, 0.2, 0.6, 0.4};
    for (std::size_t k = 0; k < 4; ++k) {
      auto noise = support::random_grid(50, 25, gen);
      for (std::size_t t = 0; t < noise.rows(); ++t)
        for (std::size_t i = 0; i < noise.cols(); ++i)
          noise.set(t, i, current.values(t, i) + scale[k] * noise.values(t, i));
      zoo.restore(candidate(fs[k], ric[k], rir[k], 1.0, noise), k + 1, k + 1);
    }
  }
  std::vector<std::size_t> ids(const std::vector<const ZooEntry*>& v) {
    std::vector<std::size_t> out;
    for (auto* e : v) out.push_back(e->id);
    return out;
  }
  AlphaZoo zoo;
  MaskedGrid current;
};

TEST_F(Exemplars, EffectivenessDropsMostCorrelatedThenTakesBestRankIc) {
  // eta 0.5 of 4 drops entries 1 and 2; of the rest, 4 has the higher RankIC.
  EXPECT_EQ(ids(zoo.select_exemplars(current, Dimension::Effectiveness, 1, 0.5)), std::vector<std::size_t>{4});
  EXPECT_EQ(ids(zoo.select_exemplars(current, Dimension::Effectiveness, 5, 0.5)), (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(ids(zoo.select_exemplars(current, Dimension::Effectiveness, 1, 0.0)), std::vector<std::size_t>{1});
}

TEST_F(Exemplars, StabilityUsesRankIr) {
  EXPECT_EQ(ids(zoo.select_exemplars(current, Dimension::Stability, 1, 0.5)), std::vector<std::size_t>{3});
  EXPECT_EQ(ids(zoo.select_exemplars(current, Dimension::Stability, 1, 0.25)), std::vector<std::size_t>{3});
}

TEST_F(Exemplars, DiversityTakesLeastCorrelated) {
  EXPECT_EQ(ids(zoo.select_exemplars(current, Dimension::Diversity, 2, 0.5)), (std::vector<std::size_t>{4, 3}));
}

TEST_F(Exemplars, OtherDimensionsGetNone) {
  EXPECT_TRUE(zoo.select_exemplars(current, Dimension::Turnover, 3, 0.5).empty());
  EXPECT_TRUE(zoo.select_exemplars(current, Dimension::OverfittingRisk, 3, 0.5).empty());
}

TEST(ExemplarsSingle, CeilingDropsTheOnlyEntry) {
  AlphaZoo zoo;
  std::mt19937_64 gen(6);
  zoo.restore(candidate(support::distinct_formulas(1)[0], 0.05, 0.5, 1.0, support::random_grid(30, 10, gen)), 1, 1);
  const auto cur = support::random_grid(30, 10, gen);
  EXPECT_TRUE(zoo.select_exemplars(cur, Dimension::Effectiveness, 1, 0.5).empty());
  EXPECT_EQ(zoo.select_exemplars(cur, Dimension::Diversity, 1, 0.5).size(), 1u);
}

// Export and persistence.

TEST(ZooExport, TopKByRankIrWithInsertionTies) {
  AlphaZoo zoo;
  std::mt19937_64 gen(7);
  const auto fs = support::distinct_formulas(5);
  const double rir[] = {0.5, 0.9, 0.5, oracle::NaN, 0.7};
  for (std::size_t k = 0; k < 5; ++k)
    zoo.restore(candidate(fs[k], 0.05, rir[k], 1.0, support::random_grid(30, 10, gen)), k + 1, k + 1);
  std::vector<std::size_t> got;
  for (auto* e : zoo.export_topk(4)) got.push_back(e->id);
  EXPECT_EQ(got, (std::vector<std::size_t>{2, 5, 1, 3}));
  EXPECT_EQ(zoo.export_topk(100).size(), 5u);
}

TEST(ZooPersistence, SaveAndRead) {
  AlphaZoo zoo;
  std::mt19937_64 gen(8);
  const auto fs = support::distinct_formulas(3);
  for (std::size_t k = 0; k < 3; ++k) {
    auto c = candidate(fs[k], 0.05 + k, 0.5, 1.0, support::random_grid(30, 10, gen));
    ASSERT_TRUE(zoo.try_insert(c, {}));
  }
  const auto dir = support::scratch_dir("zoo_persist");
  std::filesystem::create_directories(dir);
  save_zoo(dir, zoo);
  const auto back = read_zoo_file(dir / kZooFile);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back[k].id, zoo.entries()[k].id);
    EXPECT_EQ(back[k].accepted_at, zoo.entries()[k].accepted_at);
    EXPECT_TRUE(structurally_equal(back[k].formula, fs[k]));
  }
  const auto csv = support::read_file(dir / kZooMetricsFile);
  EXPECT_EQ(csv.rfind(metrics_csv_header(), 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_TRUE(read_zoo_file(dir / "absent.jsonl").empty());
  std::ofstream(dir / "bad.jsonl") << "{\"formula\": 3}\n";
  EXPECT_THROW(read_zoo_file(dir / "bad.jsonl"), ParseError);
  std::filesystem::remove_all(dir);
}

// Frequent subtree mining.

TEST(Fsa, ClosedGenesMatchOracle) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<AlphaFormula> corpus;
    const std::size_t n = 2 + gen() % 10;
    for (std::size_t k = 0; k < n; ++k) {
      AlphaFormula f;
      f.root = support::small_tree(gen, 2 + gen() % 8);
      corpus.push_back(f);
    }
    const std::size_t min_support = 1 + gen() % 3;
    std::map<std::string, std::size_t> got;
    for (const auto& p : mine_closed_genes(corpus, min_support)) got[p.gene.key] = p.support;
    EXPECT_EQ(got, oracle::closed_genes(corpus, min_support)) << "trial " << trial;
  }
}

TEST(Fsa, SupportCountsFormulasNotOccurrences) {
  const std::vector<AlphaFormula> corpus{support::formula("Ma(vwap,5)-Ma(vwap,10)"),
                                         support::formula("Std(Ma(vwap,3),5)"), support::formula("Ma(close-open,5)")};
  const auto all = mine_genes(corpus, 1);
  const auto it = std::find_if(all.begin(), all.end(), [](const GenePattern& p) { return gene_infix(p.gene) == "Ma(vwap,t)"; });
  ASSERT_NE(it, all.end());
  EXPECT_EQ(it->support, 2u);
  EXPECT_TRUE(it->closed);
  // Every vwap leaf sits under Ma(vwap,t) with the same support: not closed.
  const auto leaf_it = std::find_if(all.begin(), all.end(), [](const GenePattern& p) { return gene_infix(p.gene) == "vwap"; });
  ASSERT_NE(leaf_it, all.end());
  EXPECT_FALSE(leaf_it->closed);
}

TEST(Fsa, OrderingAndAvoidance) {
  const std::vector<AlphaFormula> corpus{
      support::formula("Std(high-low,10)/Ma(volume,5)"), support::formula("Std(high-low,20)*close"),
      support::formula("Std(high-low,5)-Ma(volume,3)"), support::formula("Ma(volume,30)/open")};
  const auto genes = mine_closed_genes(corpus, 2);
  for (std::size_t k = 1; k < genes.size(); ++k) {
    EXPECT_GE(genes[k - 1].support, genes[k].support);
    if (genes[k - 1].support == genes[k].support) EXPECT_GE(genes[k - 1].nodes, genes[k].nodes);
  }
  const auto avoid = update_avoidance(corpus, 1);
  ASSERT_EQ(avoid.size(), 1u);
  EXPECT_EQ(gene_infix(avoid[0]), "Std(high-low,t)");
  EXPECT_EQ(update_avoidance(corpus, 5).size(), 2u);
  EXPECT_EQ(render_avoidance(update_avoidance(corpus, 2)), "Std(high-low,t)\nMa(volume,t)");
  EXPECT_TRUE(update_avoidance({}, 3).empty());
  EXPECT_TRUE(update_avoidance(corpus, 0).empty());
}
