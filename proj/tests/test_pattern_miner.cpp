#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "acone/pattern_miner.hpp"
#include "acone/planted.hpp"

namespace {

using namespace acone;

std::vector<Triple> translation(std::uint32_t relation, std::uint32_t offset, std::uint32_t n) {
  std::vector<Triple> out;
  for (std::uint32_t a = 0; a < n; ++a) out.push_back({a, relation, (a + offset) % n});
  return out;
}

const PatternLabel* find(const std::vector<PatternLabel>& labels, PatternKind kind, std::vector<std::size_t> rels) {
  for (const auto& l : labels) {
    if (l.kind == kind && l.relations == rels) return &l;
  }
  return nullptr;
}

TEST(Miner, SymmetricRelationHasFullCoverage) {
  std::vector<Triple> t;
  for (std::uint32_t a = 0; a < 30; ++a) {
    t.push_back({a, 0, (a + 7) % 30});
    t.push_back({(a + 7) % 30, 0, a});
  }
  const auto labels = mine_patterns(t, 1);
  const PatternLabel* s = find(labels, PatternKind::Symmetry, {0});
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->coverage, 1.0);
  EXPECT_EQ(s->support, 60u);
}

TEST(Miner, PlantedCompositionOnHundredTriples) {
  std::vector<Triple> t;
  for (auto part : {translation(0, 1, 100), translation(1, 2, 100), translation(2, 3, 100)}) {
    t.insert(t.end(), part.begin(), part.end());
  }
  const auto labels = mine_patterns(t, 3);
  for (std::vector<std::size_t> c : {std::vector<std::size_t>{0, 1, 2}, std::vector<std::size_t>{1, 0, 2}}) {
    const PatternLabel* l = find(labels, PatternKind::Composition, c);
    ASSERT_NE(l, nullptr);
    EXPECT_EQ(l->coverage, 1.0);
    EXPECT_EQ(l->support, 100u);
  }
  ASSERT_NE(find(labels, PatternKind::Composition, {0, 0, 1}), nullptr);  // +1 +1 = +2
  EXPECT_EQ(find(labels, PatternKind::Symmetry, {0}), nullptr);
  EXPECT_EQ(find(labels, PatternKind::Containment, {0, 1}), nullptr);
}

TEST(Miner, InverseAndContainment) {
  std::vector<Triple> t = translation(0, 5, 40);
  for (const Triple& x : translation(0, 5, 40)) t.push_back({x.tail, 1, x.head});
  for (std::uint32_t a = 0; a < 20; ++a) t.push_back({a, 2, (a + 5) % 40});
  const auto labels = mine_patterns(t, 3);
  ASSERT_NE(find(labels, PatternKind::Inverse, {0, 1}), nullptr);
  EXPECT_EQ(find(labels, PatternKind::Inverse, {0, 1})->coverage, 1.0);
  const PatternLabel* sub = find(labels, PatternKind::Containment, {2, 0});
  ASSERT_NE(sub, nullptr);
  EXPECT_EQ(sub->coverage, 1.0);
  // The reverse direction only covers half of relation 0.
  ASSERT_NE(find(labels, PatternKind::Containment, {0, 2}), nullptr);
  EXPECT_EQ(find(labels, PatternKind::Containment, {0, 2})->coverage, 0.5);
}

TEST(Miner, TransitiveOrder) {
  std::vector<Triple> t;
  for (std::uint32_t a = 0; a < 15; ++a) {
    for (std::uint32_t b = a + 1; b < 15; ++b) t.push_back({a, 0, b});
  }
  const auto labels = mine_patterns(t, 1);
  const PatternLabel* l = find(labels, PatternKind::Transitivity, {0});
  ASSERT_NE(l, nullptr);
  EXPECT_EQ(l->coverage, 1.0);
  EXPECT_EQ(find(labels, PatternKind::Composition, {0, 0, 0}), nullptr);
}

TEST(Miner, RandomRelationsScoreLow) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> ent(0, 499), rel(0, 3);
  std::vector<Triple> t;
  for (int i = 0; i < 1200; ++i) t.push_back({ent(rng), rel(rng), ent(rng)});
  MinerConfig all;
  all.min_coverage = 0.0;
  all.min_support = 0;
  const auto labels = mine_patterns(t, 4, all);
  EXPECT_FALSE(labels.empty());
  for (const auto& l : labels) EXPECT_LT(l.coverage, 0.2) << to_string(l.kind);
  EXPECT_TRUE(mine_patterns(t, 4).empty());
}

TEST(Miner, SupportThreshold) {
  std::vector<Triple> t{{0, 0, 1}, {1, 0, 0}};
  EXPECT_TRUE(mine_patterns(t, 1).empty());
  MinerConfig low;
  low.min_support = 1;
  EXPECT_NE(find(mine_patterns(t, 1, low), PatternKind::Symmetry, {0}), nullptr);
  EXPECT_THROW(mine_patterns(t, 0), std::out_of_range);
}

TEST(Miner, PlantedGraphPatterns) {
  const PlantedGraph g = make_planted_graph();
  const auto labels = mine_patterns(g.triples, g.relations.size());
  const auto id = [&](const char* n) { return std::size_t{g.relations.id(n)}; };
  EXPECT_NE(find(labels, PatternKind::Symmetry, {id("sym")}), nullptr);
  EXPECT_EQ(find(labels, PatternKind::Symmetry, {id("asym")}), nullptr);
  EXPECT_NE(find(labels, PatternKind::Inverse, {id("inv_a"), id("inv_b")}), nullptr);
  const PatternLabel* c = find(labels, PatternKind::Composition, {id("comp1"), id("comp2"), id("comp3")});
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->coverage, 1.0);
  for (const auto& l : labels) {
    if (l.kind == PatternKind::Symmetry) EXPECT_EQ(l.relations[0], id("sym"));
  }
}

TEST(Labels, RoundTrip) {
  const PlantedGraph g = make_planted_graph();
  const auto labels = mine_patterns(g.triples, g.relations.size());
  std::stringstream ss;
  write_labels(ss, labels, g.relations);
  const auto back = read_labels(ss, g.relations);
  ASSERT_EQ(back.size(), labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(back[i].kind, labels[i].kind);
    EXPECT_EQ(back[i].relations, labels[i].relations);
    EXPECT_EQ(back[i].support, labels[i].support);
    EXPECT_NEAR(back[i].coverage, labels[i].coverage, 1e-6);
  }
}

TEST(Subgroups, ClassifyQueries) {
  const std::vector<PatternLabel> labels{{PatternKind::Symmetry, {0}, 10, 1.0},
                                         {PatternKind::Composition, {1, 2, 3}, 10, 0.5}};
  std::vector<QueryInstance> qs(3);
  qs[0].relations = {0};
  qs[1].relations = {0, 2};
  qs[2].relations = {4};
  const auto c = classify_queries(qs, labels);
  EXPECT_EQ(c[0], (std::set<std::string>{"Symmetry"}));
  EXPECT_EQ(c[1], (std::set<std::string>{"Composition", "Symmetry"}));
  EXPECT_EQ(c[2], (std::set<std::string>{"Others"}));
  const auto pct = subgroup_percentages(c);
  EXPECT_NEAR(pct.at("Symmetry"), 200.0 / 3, 1e-9);
  EXPECT_NEAR(pct.at("Others"), 100.0 / 3, 1e-9);
}

}  // namespace
