#pragma once

// Tree-form query syntax: nominals, projections, intersections, unions and
// negations, the fourteen benchmark query shapes, and rewriting into
// disjunctive normal form.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace acone {

enum class NodeKind { Nominal, Projection, Intersection, Union, Negation };

/// A query tree. `id` is an entity id on Nominal nodes and a relation id on
/// Projection nodes; in structure templates it is the anchor or relation slot.
struct QueryAst {
  NodeKind kind = NodeKind::Nominal;
  std::size_t id = 0;
  std::vector<QueryAst> children;

  static QueryAst nominal(std::size_t entity) { return {NodeKind::Nominal, entity, {}}; }
  static QueryAst projection(std::size_t relation, QueryAst child) {
    return {NodeKind::Projection, relation, {std::move(child)}};
  }
  static QueryAst intersection(std::vector<QueryAst> children) {
    if (children.size() < 2) throw std::invalid_argument("intersection needs at least two operands");
    return {NodeKind::Intersection, 0, std::move(children)};
  }
  static QueryAst union_of(std::vector<QueryAst> children) {
    if (children.size() < 2) throw std::invalid_argument("union needs at least two operands");
    return {NodeKind::Union, 0, std::move(children)};
  }
  static QueryAst negation(QueryAst child) { return {NodeKind::Negation, 0, {std::move(child)}}; }

  friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

inline std::string to_string(const QueryAst& q) {
  switch (q.kind) {
    case NodeKind::Nominal: return "e" + std::to_string(q.id);
    case NodeKind::Projection: return "r" + std::to_string(q.id) + "(" + to_string(q.children[0]) + ")";
    case NodeKind::Negation: return "not(" + to_string(q.children[0]) + ")";
    case NodeKind::Intersection:
    case NodeKind::Union: {
      std::string s = q.kind == NodeKind::Intersection ? "and(" : "or(";
      for (std::size_t i = 0; i < q.children.size(); ++i) s += (i ? "," : "") + to_string(q.children[i]);
      return s + ")";
    }
  }
  return "?";
}

/// Checks arity of every node, and that negation does not sit at the root.
inline void validate(const QueryAst& q, bool root = true) {
  switch (q.kind) {
    case NodeKind::Nominal:
      if (!q.children.empty()) throw std::invalid_argument("nominal with children");
      break;
    case NodeKind::Projection:
    case NodeKind::Negation:
      if (q.children.size() != 1) throw std::invalid_argument("unary node needs exactly one child");
      if (root && q.kind == NodeKind::Negation) throw std::invalid_argument("negation at the query root");
      break;
    case NodeKind::Intersection:
    case NodeKind::Union:
      if (q.children.size() < 2) throw std::invalid_argument("n-ary node needs at least two children");
      break;
  }
  for (const QueryAst& c : q.children) validate(c, false);
}

inline bool contains_kind(const QueryAst& q, NodeKind kind) {
  if (q.kind == kind) return true;
  for (const QueryAst& c : q.children) {
    if (contains_kind(c, kind)) return true;
  }
  return false;
}

/// Union-free disjuncts whose union is equivalent to `q`.
inline std::vector<QueryAst> disjuncts(const QueryAst& q) {
  switch (q.kind) {
    case NodeKind::Nominal:
      return {q};
    case NodeKind::Projection: {
      std::vector<QueryAst> out;
      for (QueryAst& d : disjuncts(q.children[0])) out.push_back(QueryAst::projection(q.id, std::move(d)));
      return out;
    }
    case NodeKind::Union: {
      std::vector<QueryAst> out;
      for (const QueryAst& c : q.children) {
        for (QueryAst& d : disjuncts(c)) out.push_back(std::move(d));
      }
      return out;
    }
    case NodeKind::Intersection: {
      std::vector<std::vector<QueryAst>> parts;
      for (const QueryAst& c : q.children) parts.push_back(disjuncts(c));
      std::vector<std::vector<QueryAst>> combos{{}};
      for (const auto& options : parts) {
        std::vector<std::vector<QueryAst>> next;
        for (const auto& partial : combos) {
          for (const QueryAst& o : options) {
            next.push_back(partial);
            next.back().push_back(o);
          }
        }
        combos = std::move(next);
      }
      std::vector<QueryAst> out;
      for (auto& c : combos) out.push_back(QueryAst::intersection(std::move(c)));
      return out;
    }
    case NodeKind::Negation: {
      // De Morgan: not(d1 or d2) = not d1 and not d2.
      std::vector<QueryAst> inner = disjuncts(q.children[0]);
      if (inner.size() == 1) return {QueryAst::negation(std::move(inner[0]))};
      std::vector<QueryAst> negs;
      for (QueryAst& d : inner) negs.push_back(QueryAst::negation(std::move(d)));
      return {QueryAst::intersection(std::move(negs))};
    }
  }
  return {};
}

/// Equivalent query with Union only at the root.
inline QueryAst to_dnf(const QueryAst& q) {
  std::vector<QueryAst> parts = disjuncts(q);
  if (parts.size() == 1) return std::move(parts[0]);
  return QueryAst::union_of(std::move(parts));
}

// ---- benchmark structures ---------------------------------------------------------

enum class QueryStructure { P1, P2, P3, I2, I3, PI, IP, U2, UP, IN2, IN3, INP, PIN, PNI };

inline constexpr std::array<QueryStructure, 14> kAllStructures = {
    QueryStructure::P1,  QueryStructure::P2,  QueryStructure::P3,  QueryStructure::I2,  QueryStructure::I3,
    QueryStructure::PI,  QueryStructure::IP,  QueryStructure::U2,  QueryStructure::UP,  QueryStructure::IN2,
    QueryStructure::IN3, QueryStructure::INP, QueryStructure::PIN, QueryStructure::PNI};

inline constexpr std::array<QueryStructure, 10> kTrainingStructures = {
    QueryStructure::P1,  QueryStructure::P2,  QueryStructure::P3,  QueryStructure::I2,  QueryStructure::I3,
    QueryStructure::IN2, QueryStructure::IN3, QueryStructure::INP, QueryStructure::PIN, QueryStructure::PNI};

inline std::string_view to_string(QueryStructure s) {
  static constexpr std::array<std::string_view, 14> names = {"1p", "2p", "3p", "2i",  "3i",  "pi",  "ip",
                                                              "2u", "up", "2in", "3in", "inp", "pin", "pni"};
  return names[static_cast<std::size_t>(s)];
}

inline std::optional<QueryStructure> parse_structure(std::string_view name) {
  for (QueryStructure s : kAllStructures) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

inline QueryStructure structure_from_string(std::string_view name) {
  if (auto s = parse_structure(name)) return *s;
  throw std::invalid_argument("unknown query structure '" + std::string(name) + "'");
}

inline bool has_negation(QueryStructure s) {
  return s == QueryStructure::IN2 || s == QueryStructure::IN3 || s == QueryStructure::INP ||
         s == QueryStructure::PIN || s == QueryStructure::PNI;
}

inline bool has_union(QueryStructure s) { return s == QueryStructure::U2 || s == QueryStructure::UP; }

/// Template tree for a structure. Nominal slots count leaves left to right;
/// relation slots follow post-order, i.e. the order relations are applied
/// along each branch.
inline QueryAst structure_template(QueryStructure s) {
  using Q = QueryAst;
  const auto a = [](std::size_t i) { return Q::nominal(i); };
  const auto p = [](std::size_t r, Q c) { return Q::projection(r, std::move(c)); };
  switch (s) {
    case QueryStructure::P1: return p(0, a(0));
    case QueryStructure::P2: return p(1, p(0, a(0)));
    case QueryStructure::P3: return p(2, p(1, p(0, a(0))));
    case QueryStructure::I2: return Q::intersection({p(0, a(0)), p(1, a(1))});
    case QueryStructure::I3: return Q::intersection({p(0, a(0)), p(1, a(1)), p(2, a(2))});
    case QueryStructure::PI: return Q::intersection({p(1, p(0, a(0))), p(2, a(1))});
    case QueryStructure::IP: return p(2, Q::intersection({p(0, a(0)), p(1, a(1))}));
    case QueryStructure::U2: return Q::union_of({p(0, a(0)), p(1, a(1))});
    case QueryStructure::UP: return p(2, Q::union_of({p(0, a(0)), p(1, a(1))}));
    case QueryStructure::IN2: return Q::intersection({p(0, a(0)), Q::negation(p(1, a(1)))});
    case QueryStructure::IN3: return Q::intersection({p(0, a(0)), p(1, a(1)), Q::negation(p(2, a(2)))});
    case QueryStructure::INP: return p(2, Q::intersection({p(0, a(0)), Q::negation(p(1, a(1)))}));
    case QueryStructure::PIN: return Q::intersection({p(1, p(0, a(0))), Q::negation(p(2, a(1)))});
    case QueryStructure::PNI: return Q::intersection({Q::negation(p(1, p(0, a(0)))), p(2, a(1))});
  }
  throw std::invalid_argument("unknown structure");
}

struct SlotCounts {
  std::size_t anchors = 0;
  std::size_t relations = 0;
};

inline SlotCounts slot_counts(const QueryAst& q) {
  SlotCounts c;
  if (q.kind == NodeKind::Nominal) c.anchors = 1;
  if (q.kind == NodeKind::Projection) c.relations = 1;
  for (const QueryAst& ch : q.children) {
    const SlotCounts s = slot_counts(ch);
    c.anchors += s.anchors;
    c.relations += s.relations;
  }
  return c;
}

inline SlotCounts slot_counts(QueryStructure s) { return slot_counts(structure_template(s)); }

/// Replaces template slots by concrete entity and relation ids.
inline QueryAst instantiate(const QueryAst& tmpl, std::span<const std::size_t> anchors,
                            std::span<const std::size_t> relations) {
  QueryAst out = tmpl;
  if (out.kind == NodeKind::Nominal) {
    if (out.id >= anchors.size()) throw std::invalid_argument("missing anchor for slot " + std::to_string(out.id));
    out.id = anchors[out.id];
  } else if (out.kind == NodeKind::Projection) {
    if (out.id >= relations.size()) throw std::invalid_argument("missing relation for slot " + std::to_string(out.id));
    out.id = relations[out.id];
  }
  for (QueryAst& c : out.children) c = instantiate(c, anchors, relations);
  return out;
}

inline QueryAst instantiate(QueryStructure s, std::span<const std::size_t> anchors,
                            std::span<const std::size_t> relations) {
  const SlotCounts c = slot_counts(s);
  if (anchors.size() != c.anchors || relations.size() != c.relations) {
    throw std::invalid_argument("wrong number of anchors or relations for structure " + std::string(to_string(s)));
  }
  return instantiate(structure_template(s), anchors, relations);
}

}  // namespace acone
