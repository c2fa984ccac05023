#pragma once

// Brute-force query answering straight from a triple list. Deliberately shares
// no code with the graph index so it can serve as an oracle.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "acone/graph.hpp"
#include "acone/queries.hpp"

namespace acone::testing {

inline std::vector<bool> naive_members(const QueryAst& q, std::span<const Triple> triples, std::size_t n) {
  std::vector<bool> out(n, false);
  switch (q.kind) {
    case NodeKind::Nominal:
      out.at(q.id) = true;
      break;
    case NodeKind::Projection: {
      const std::vector<bool> src = naive_members(q.children[0], triples, n);
      for (const Triple& t : triples) {
        if (t.relation == q.id && src[t.head]) out[t.tail] = true;
      }
      break;
    }
    case NodeKind::Intersection:
      out.assign(n, true);
      for (const QueryAst& c : q.children) {
        const std::vector<bool> m = naive_members(c, triples, n);
        for (std::size_t e = 0; e < n; ++e) out[e] = out[e] && m[e];
      }
      break;
    case NodeKind::Union:
      for (const QueryAst& c : q.children) {
        const std::vector<bool> m = naive_members(c, triples, n);
        for (std::size_t e = 0; e < n; ++e) out[e] = out[e] || m[e];
      }
      break;
    case NodeKind::Negation: {
      const std::vector<bool> m = naive_members(q.children[0], triples, n);
      for (std::size_t e = 0; e < n; ++e) out[e] = !m[e];
      break;
    }
  }
  return out;
}

inline EntitySet naive_answer(const QueryAst& q, std::span<const Triple> triples, std::size_t n) {
  const std::vector<bool> m = naive_members(q, triples, n);
  EntitySet out;
  for (std::uint32_t e = 0; e < n; ++e) {
    if (m[e]) out.push_back(e);
  }
  return out;
}

inline std::vector<Triple> random_triples(std::mt19937_64& rng, std::size_t entities, std::size_t relations,
                                          std::size_t count) {
  std::uniform_int_distribution<std::uint32_t> e(0, static_cast<std::uint32_t>(entities - 1));
  std::uniform_int_distribution<std::uint32_t> r(0, static_cast<std::uint32_t>(relations - 1));
  std::vector<Triple> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({e(rng), r(rng), e(rng)});
  return out;
}

/// Random ids for every slot of a structure.
inline QueryAst random_instance(std::mt19937_64& rng, QueryStructure s, std::size_t entities, std::size_t relations) {
  const SlotCounts c = slot_counts(s);
  std::vector<std::size_t> anchors(c.anchors), rels(c.relations);
  for (auto& a : anchors) a = std::uniform_int_distribution<std::size_t>(0, entities - 1)(rng);
  for (auto& r : rels) r = std::uniform_int_distribution<std::size_t>(0, relations - 1)(rng);
  return instantiate(s, anchors, rels);
}

/// Random tree with unions allowed anywhere below the root.
inline QueryAst random_query(std::mt19937_64& rng, std::size_t entities, std::size_t relations, int depth) {
  std::uniform_int_distribution<int> kind(0, depth <= 0 ? 0 : 4);
  const auto ent = [&] { return std::uniform_int_distribution<std::size_t>(0, entities - 1)(rng); };
  const auto rel = [&] { return std::uniform_int_distribution<std::size_t>(0, relations - 1)(rng); };
  switch (kind(rng)) {
    case 0:
      return QueryAst::projection(rel(), QueryAst::nominal(ent()));
    case 1:
      return QueryAst::projection(rel(), random_query(rng, entities, relations, depth - 1));
    case 2:
      return QueryAst::intersection(
          {random_query(rng, entities, relations, depth - 1), random_query(rng, entities, relations, depth - 1)});
    case 3:
      return QueryAst::union_of(
          {random_query(rng, entities, relations, depth - 1), random_query(rng, entities, relations, depth - 1)});
    default:
      return QueryAst::intersection({random_query(rng, entities, relations, depth - 1),
                                     QueryAst::negation(random_query(rng, entities, relations, depth - 1))});
  }
}

}  // namespace acone::testing
