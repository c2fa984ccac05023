#pragma once

// Relation-pattern statistics counted directly on a triple set: symmetry,
// inversion, containment, composition and transitivity, scored by body
// coverage. Also assigns queries to pattern subgroups.

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "acone/axiom_conditions.hpp"
#include "acone/dataset.hpp"
#include "acone/graph.hpp"

namespace acone {

struct PatternLabel {
  PatternKind kind = PatternKind::Symmetry;
  /// Symmetry/transitivity: {r}; inverse/containment: {r, s}; composition: {r1, r2, r3}.
  std::vector<std::size_t> relations;
  std::size_t support = 0;
  double coverage = 0.0;

  friend bool operator==(const PatternLabel&, const PatternLabel&) = default;
};

struct MinerConfig {
  double min_coverage = 0.2;
  std::size_t min_support = 10;
};

namespace detail {

inline std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

}  // namespace detail

/// Scores every relation, ordered pair and (pruned) triple; keeps labels with
/// coverage >= min_coverage and support >= min_support. Output is sorted by
/// kind, then relation ids.
inline std::vector<PatternLabel> mine_patterns(std::span<const Triple> triples, std::size_t num_relations,
                                               const MinerConfig& cfg = {}) {
  using detail::pair_key;
  std::vector<std::unordered_set<std::uint64_t>> pairs(num_relations);
  std::vector<std::unordered_map<std::uint32_t, std::vector<std::uint32_t>>> out(num_relations);
  for (const Triple& t : triples) {
    if (t.relation >= num_relations) throw std::out_of_range("relation id out of range");
    if (pairs[t.relation].insert(pair_key(t.head, t.tail)).second) out[t.relation][t.head].push_back(t.tail);
  }
  std::vector<PatternLabel> labels;
  const auto emit = [&](PatternKind kind, std::vector<std::size_t> rels, std::size_t support, std::size_t body) {
    if (body == 0) return;
    const double coverage = static_cast<double>(support) / static_cast<double>(body);
    if (coverage >= cfg.min_coverage && support >= cfg.min_support) labels.push_back({kind, std::move(rels), support, coverage});
  };

  for (std::size_t r = 0; r < num_relations; ++r) {
    std::size_t mirrored = 0;
    for (std::uint64_t k : pairs[r]) mirrored += pairs[r].count(pair_key(static_cast<std::uint32_t>(k), k >> 32));
    emit(PatternKind::Symmetry, {r}, mirrored, pairs[r].size());
    for (std::size_t s = 0; s < num_relations; ++s) {
      if (s == r) continue;
      std::size_t inverse = 0, shared = 0;
      for (std::uint64_t k : pairs[r]) {
        inverse += pairs[s].count(pair_key(static_cast<std::uint32_t>(k), k >> 32));
        shared += pairs[s].count(k);
      }
      emit(PatternKind::Inverse, {r, s}, inverse, pairs[r].size());
      emit(PatternKind::Containment, {r, s}, shared, pairs[r].size());
    }
  }

  // Composition: body = distinct (a, c) with r1(a, b) and r2(b, c).
  for (std::size_t r1 = 0; r1 < num_relations; ++r1) {
    for (std::size_t r2 = 0; r2 < num_relations; ++r2) {
      std::unordered_set<std::uint64_t> body;
      for (const auto& [a, bs] : out[r1]) {
        for (std::uint32_t b : bs) {
          auto it = out[r2].find(b);
          if (it == out[r2].end()) continue;
          for (std::uint32_t c : it->second) body.insert(pair_key(a, c));
        }
      }
      if (body.size() < cfg.min_support) continue;
      for (std::size_t r3 = 0; r3 < num_relations; ++r3) {
        std::size_t support = 0;
        for (std::uint64_t k : body) support += pairs[r3].count(k);
        const bool trans = r1 == r2 && r2 == r3;
        emit(trans ? PatternKind::Transitivity : PatternKind::Composition, trans ? std::vector<std::size_t>{r1}
                                                                                  : std::vector<std::size_t>{r1, r2, r3},
             support, body.size());
      }
    }
  }
  std::sort(labels.begin(), labels.end(), [](const PatternLabel& a, const PatternLabel& b) {
    return a.kind != b.kind ? a.kind < b.kind : a.relations < b.relations;
  });
  return labels;
}

inline void write_labels(std::ostream& os, std::span<const PatternLabel> labels, const Vocabulary& relations) {
  os << "kind\trelations\tsupport\tcoverage\n";
  for (const PatternLabel& l : labels) {
    os << to_string(l.kind) << '\t';
    for (std::size_t i = 0; i < l.relations.size(); ++i) os << (i ? "," : "") << relations.name(l.relations[i]);
    char buf[64];
    std::snprintf(buf, sizeof buf, "\t%zu\t%.6f\n", l.support, l.coverage);
    os << buf;
  }
}

inline PatternKind parse_pattern_kind(const std::string& s) {
  for (PatternKind k : {PatternKind::Containment, PatternKind::Composition, PatternKind::Transitivity,
                        PatternKind::Inverse, PatternKind::Symmetry, PatternKind::Asymmetry}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown pattern kind '" + s + "'");
}

inline std::vector<PatternLabel> read_labels(std::istream& is, const Vocabulary& relations) {
  std::vector<PatternLabel> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string kind, rels, support, coverage;
    std::getline(ss, kind, '\t');
    std::getline(ss, rels, '\t');
    std::getline(ss, support, '\t');
    std::getline(ss, coverage, '\t');
    PatternLabel l;
    l.kind = parse_pattern_kind(kind);
    std::stringstream rs(rels);
    for (std::string r; std::getline(rs, r, ',');) l.relations.push_back(relations.id(r));
    l.support = std::stoul(support);
    l.coverage = std::stod(coverage);
    out.push_back(std::move(l));
  }
  return out;
}

/// Subgroup name of a pattern kind, as used in subgroup tables.
inline std::string subgroup_name(PatternKind k) {
  switch (k) {
    case PatternKind::Symmetry: return "Symmetry";
    case PatternKind::Inverse: return "Inversion";
    case PatternKind::Composition: return "Composition";
    case PatternKind::Containment: return "Containment";
    case PatternKind::Transitivity: return "Transitivity";
    case PatternKind::Asymmetry: return "Asymmetry";
  }
  return "Unknown";
}

/// Relation id -> subgroup names of every label mentioning it.
inline std::map<std::size_t, std::set<std::string>> relation_classes(std::span<const PatternLabel> labels) {
  std::map<std::size_t, std::set<std::string>> out;
  for (const PatternLabel& l : labels) {
    for (std::size_t r : l.relations) out[r].insert(subgroup_name(l.kind));
  }
  return out;
}

/// Every subgroup of each query; "Others" iff none of its relations is labeled.
inline std::vector<std::set<std::string>> classify_queries(std::span<const QueryInstance> queries,
                                                           std::span<const PatternLabel> labels) {
  const auto classes = relation_classes(labels);
  std::vector<std::set<std::string>> out;
  for (const QueryInstance& q : queries) {
    std::set<std::string> c;
    for (std::size_t r : q.relations) {
      if (auto it = classes.find(r); it != classes.end()) c.insert(it->second.begin(), it->second.end());
    }
    if (c.empty()) c.insert("Others");
    out.push_back(std::move(c));
  }
  return out;
}

/// Percentage of queries in each subgroup.
inline std::map<std::string, double> subgroup_percentages(const std::vector<std::set<std::string>>& assignment) {
  std::map<std::string, double> out;
  for (const auto& c : assignment) {
    for (const auto& name : c) out[name] += 1.0;
  }
  for (auto& [name, v] : out) v = 100.0 * v / static_cast<double>(assignment.size());
  return out;
}

}  // namespace acone
