#pragma once

// Synthetic knowledge graph with known relation patterns. Entities are the
// integers modulo n and every relation is a partial translation x -> x + c,
// so symmetry, inversion and composition follow from the offsets.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "acone/graph.hpp"

namespace acone {

struct PlantedRelation {
  std::string name;
  int offset = 0;
};

struct PlantedConfig {
  std::size_t entities = 200;
  /// Fraction of entities that act as a source of each relation.
  double density = 0.7;
  std::uint64_t seed = 1;
  /// Offsets chosen so that no unintended sum, difference or doubling of two
  /// offsets vanishes modulo 200.
  std::vector<PlantedRelation> relations = {
      {"sym", 100},  {"inv_a", 138}, {"inv_b", 62}, {"comp1", 53},
      {"comp2", 81}, {"comp3", 134}, {"asym", 89},  {"other", 93},
  };
};

struct PlantedGraph {
  PlantedConfig config;
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;

  int offset(std::size_t relation) const { return config.relations.at(relation).offset; }
};

inline int mod(long long x, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<int>(((x % m) + m) % m);
}

/// sym is closed under reversal, inv_b is exactly the reversal of inv_a, and
/// comp3 contains every comp1-then-comp2 path in addition to its own edges.
inline PlantedGraph make_planted_graph(const PlantedConfig& cfg = {}) {
  PlantedGraph g;
  g.config = cfg;
  const std::size_t n = cfg.entities;
  for (std::size_t i = 0; i < n; ++i) g.entities.intern("e" + std::to_string(i));
  for (const auto& r : cfg.relations) g.relations.intern(r.name);
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution keep(cfg.density);

  const auto id = [&](const char* name) { return g.relations.contains(name) ? g.relations.id(name) : UINT32_MAX; };
  const std::uint32_t inv_a = id("inv_a"), inv_b = id("inv_b"), sym = id("sym");
  const std::uint32_t comp1 = id("comp1"), comp2 = id("comp2"), comp3 = id("comp3");

  std::vector<Triple> out;
  const auto edge = [&](std::uint32_t r, std::size_t x) {
    out.push_back({static_cast<std::uint32_t>(x), r, static_cast<std::uint32_t>(mod(static_cast<long long>(x) + cfg.relations[r].offset, n))});
  };
  for (std::uint32_t r = 0; r < cfg.relations.size(); ++r) {
    if (r == inv_b) continue;
    for (std::size_t x = 0; x < n; ++x) {
      if (keep(rng)) edge(r, x);
    }
  }
  const std::vector<Triple> base = out;
  for (const Triple& t : base) {
    if (t.relation == inv_a && inv_b != UINT32_MAX) out.push_back({t.tail, inv_b, t.head});
    if (t.relation == sym) out.push_back({t.tail, sym, t.head});
  }
  if (comp1 != UINT32_MAX && comp2 != UINT32_MAX && comp3 != UINT32_MAX) {
    KnowledgeGraph kg(n, cfg.relations.size(), out);
    for (const Triple& t : kg.triples()) {
      if (t.relation != comp1) continue;
      for (std::uint32_t c : kg.tails(comp2, t.tail)) out.push_back({t.head, comp3, c});
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  g.triples = std::move(out);
  return g;
}

}  // namespace acone
