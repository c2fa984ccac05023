#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "acone/evaluation.hpp"
#include "acone/planted.hpp"

namespace {

using namespace acone;

QueryInstance query(QueryStructure s, EntitySet easy, EntitySet hard, std::vector<std::size_t> relations = {0}) {
  QueryInstance q;
  q.structure = s;
  q.relations = std::move(relations);
  q.anchors.assign(slot_counts(s).anchors, 0);
  q.easy = std::move(easy);
  q.hard = std::move(hard);
  return q;
}

// Reference: rank = 1 + #{non-answers scoring at most as well}.
std::vector<std::size_t> naive_ranks(const std::vector<double>& d, const QueryInstance& q) {
  std::vector<std::size_t> out;
  for (std::uint32_t a : q.hard) {
    std::size_t rank = 1;
    for (std::uint32_t e = 0; e < d.size(); ++e) {
      const bool known = std::binary_search(q.easy.begin(), q.easy.end(), e) ||
                         std::binary_search(q.hard.begin(), q.hard.end(), e);
      if (!known && d[e] <= d[a]) ++rank;
    }
    out.push_back(rank);
  }
  return out;
}

EntitySet random_subset(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution in(p);
  EntitySet s;
  for (std::uint32_t e = 0; e < n; ++e) {
    if (in(rng)) s.push_back(e);
  }
  return s;
}

TEST(Metrics, MrrExample) {
  const std::vector<std::size_t> ranks{1, 2, 4};
  EXPECT_NEAR(mrr(ranks), 0.583333333333, 1e-9);
  EXPECT_DOUBLE_EQ(hits_at(ranks, 1), 1.0 / 3);
  EXPECT_DOUBLE_EQ(hits_at(ranks, 3), 2.0 / 3);
  EXPECT_DOUBLE_EQ(hits_at(ranks, 10), 1.0);
  EXPECT_THROW(mrr(std::vector<std::size_t>{}), std::invalid_argument);
  EXPECT_THROW(mrr(std::vector<std::size_t>{0}), std::invalid_argument);
}

TEST(FilteredRank, OtherAnswersDoNotCount) {
  // Entities 0..4; answers 1 (easy) and 3 (hard).
  const std::vector<double> d{0.5, 0.1, 0.9, 0.3, 0.2};
  const auto ranks = filtered_ranks(d, query(QueryStructure::P1, {1}, {3}));
  ASSERT_EQ(ranks.size(), 1u);
  EXPECT_EQ(ranks[0], 2u);  // only entity 4 is closer
}

TEST(FilteredRank, TiesArePessimistic) {
  const std::vector<double> d{1.0, 1.0, 1.0};
  EXPECT_EQ(filtered_ranks(d, query(QueryStructure::P1, {}, {0}))[0], 3u);
}

TEST(FilteredRank, MatchesNaiveOnRandomTables) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coarse(0, 20);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 5 + t % 60;
    std::vector<double> d(n);
    // Coarse values force ties.
    for (double& x : d) x = t % 2 ? coarse(rng) / 4.0 : std::uniform_real_distribution<double>(0, 10)(rng);
    EntitySet hard = random_subset(rng, n, 0.2);
    if (hard.empty()) hard.push_back(0);
    EntitySet easy = set_difference(random_subset(rng, n, 0.2), hard);
    const QueryInstance q = query(QueryStructure::P1, easy, hard);
    ASSERT_EQ(filtered_ranks(d, q), naive_ranks(d, q)) << "table " << t;
  }
}

TEST(FilteredRank, MonotoneInOwnScore) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> d(30);
    for (double& x : d) x = u(rng);
    const QueryInstance q = query(QueryStructure::P1, {}, {0, 7});
    const auto before = filtered_ranks(d, q);
    d[0] -= u(rng);  // moving an answer closer never worsens its rank
    const auto after = filtered_ranks(d, q);
    ASSERT_LE(after[0], before[0]);
    ASSERT_EQ(after[1], before[1]);
  }
}

TEST(Summary, OracleScorerIsPerfect) {
  std::vector<QueryInstance> qs;
  for (QueryStructure s : {QueryStructure::P1, QueryStructure::I2, QueryStructure::IN2, QueryStructure::UP}) {
    qs.push_back(query(s, {2}, {4, 5}, std::vector<std::size_t>(slot_counts(s).relations, 0)));
  }
  const Scorer oracle = [](std::span<const QueryInstance> queries) {
    std::vector<std::vector<double>> out;
    for (const auto& q : queries) {
      std::vector<double> d(10, 1.0);
      for (auto a : set_union(q.easy, q.hard)) d[a] = 0.0;
      out.push_back(d);
    }
    return out;
  };
  const auto rep = summarize(rank_queries(qs, oracle));
  EXPECT_EQ(rep.per_structure.size(), 4u);
  for (const auto& [name, row] : rep.per_structure) {
    EXPECT_EQ(row.mrr, 1.0) << name;
    EXPECT_EQ(row.hits1, 1.0);
  }
  EXPECT_EQ(rep.average_mrr, 1.0);
  EXPECT_EQ(rep.average_negation_mrr, 1.0);
}

TEST(Summary, AveragesSeparateNegation) {
  std::vector<QueryResult> rs{
      {QueryStructure::P1, {0}, {1}},
      {QueryStructure::P1, {0}, {2, 4}},  // query mrr 0.375
      {QueryStructure::P2, {0, 0}, {2}},
      {QueryStructure::IN2, {0, 0}, {4}},
  };
  const auto rep = summarize(rs);
  EXPECT_NEAR(rep.per_structure.at("1p").mrr, 0.6875, 1e-12);
  EXPECT_NEAR(rep.average_mrr, (0.6875 + 0.5) / 2, 1e-12);
  EXPECT_NEAR(rep.average_negation_mrr, 0.25, 1e-12);
}

TEST(Baseline, AnalyticValue) {
  // 4 entities, one known answer: rank uniform on {1..4}.
  const std::vector<QueryInstance> qs{query(QueryStructure::P1, {}, {0})};
  EXPECT_NEAR(random_baseline_mrr(qs, 4), (1 + 0.5 + 1.0 / 3 + 0.25) / 4, 1e-12);
}

TEST(Baseline, RandomScoresMatchAnalyticMean) {
  std::mt19937_64 rng(3);
  std::vector<QueryInstance> qs;
  for (int i = 0; i < 4000; ++i) {
    EntitySet hard = random_subset(rng, 50, 0.05);
    if (hard.empty()) hard.push_back(1);
    qs.push_back(query(QueryStructure::P1, {}, hard));
  }
  const Scorer noise = [&](std::span<const QueryInstance> queries) {
    std::vector<std::vector<double>> out;
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      std::vector<double> d(50);
      for (double& x : d) x = u(rng);
      out.push_back(d);
    }
    return out;
  };
  double total = 0.0;
  for (const auto& r : rank_queries(qs, noise)) total += r.mrr();
  EXPECT_NEAR(total / static_cast<double>(qs.size()), random_baseline_mrr(qs, 50), 0.01);
}

TEST(Evaluate, UntrainedModelIsNearRandom) {
  const PlantedGraph g = make_planted_graph();
  GenerationConfig gc;
  gc.train_per_structure = 10;
  gc.eval_per_structure = 100;
  gc.seed = 4;
  const Dataset ds = generate_dataset(g.triples, 200, g.relations.size(), gc);
  std::vector<QueryInstance> one_hop;
  for (const auto& q : ds.test) {
    if (q.structure == QueryStructure::P1) one_hop.push_back(q);
  }
  ASSERT_GE(one_hop.size(), 50u);
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Model m(ModelConfig{200, g.relations.size(), 32, ApertureMode::Additive});
    m.initialize(seed);
    total += evaluate(m, one_hop, 0.02).per_structure.at("1p").mrr;
  }
  EXPECT_NEAR(total / 5, random_baseline_mrr(one_hop, 200), 0.05);
}

TEST(Evaluate, ModelScorerMatchesPerQueryScores) {
  const PlantedGraph g = make_planted_graph();
  GenerationConfig gc;
  gc.train_per_structure = 5;
  gc.eval_per_structure = 3;
  const Dataset ds = generate_dataset(g.triples, 200, g.relations.size(), gc);
  Model m(ModelConfig{200, g.relations.size(), 8, ApertureMode::Additive});
  m.initialize(2);
  const Scorer s = model_scorer(m, 0.02);
  const auto batched = s(ds.test);
  for (std::size_t i = 0; i < ds.test.size(); i += 7) {
    const auto single = s(std::span<const QueryInstance>(ds.test).subspan(i, 1));
    ASSERT_EQ(single[0].size(), 200u);
    for (std::size_t e = 0; e < 200; ++e) ASSERT_NEAR(single[0][e], batched[i][e], 1e-9);
  }
}

TEST(Subgroups, CountsAndShares) {
  const std::map<std::size_t, std::set<std::string>> labels{{0, {"Symmetry"}}, {1, {"Inversion"}},
                                                            {2, {"Inversion", "Composition"}}};
  const std::vector<QueryResult> rs{
      {QueryStructure::P1, {0}, {1}},
      {QueryStructure::P2, {0, 1}, {2}},
      {QueryStructure::P1, {2}, {4}},
      {QueryStructure::P1, {5}, {1}},
  };
  const auto rows = subgroup_report(rs, labels);
  EXPECT_EQ(rows.at("Symmetry").queries, 2u);
  EXPECT_NEAR(rows.at("Symmetry").mrr, 0.75, 1e-12);
  EXPECT_EQ(rows.at("Inversion").queries, 2u);
  EXPECT_NEAR(rows.at("Inversion").share, 0.5, 1e-12);
  EXPECT_EQ(rows.at("Composition").queries, 1u);
  EXPECT_EQ(rows.at(kOthers).queries, 1u);
  EXPECT_EQ(rows.at(kOthers).mrr, 1.0);
}

TEST(Output, TsvAndJsonCarryEveryStructure) {
  const std::vector<QueryResult> rs{{QueryStructure::P1, {0}, {1}}, {QueryStructure::IN2, {0, 0}, {2}}};
  const auto rep = summarize(rs);
  std::ostringstream tsv;
  write_tsv(tsv, rep);
  EXPECT_NE(tsv.str().find("1p\t1\t1.000000"), std::string::npos);
  EXPECT_NE(tsv.str().find("2in\t1\t0.500000"), std::string::npos);
  const auto j = to_json(rep);
  EXPECT_EQ(j["structures"]["2in"]["mrr"], 0.5);
  EXPECT_EQ(j["average_mrr"], 1.0);
}

}  // namespace
