#pragma once

// Triple stores, string id maps, and exact set-based query answering under
// the domain-closure assumption.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "acone/queries.hpp"

namespace acone {

struct Triple {
  std::uint32_t head = 0;
  std::uint32_t relation = 0;
  std::uint32_t tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Sorted, duplicate-free entity ids.
using EntitySet = std::vector<std::uint32_t>;

inline EntitySet set_union(const EntitySet& a, const EntitySet& b) {
  EntitySet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline EntitySet set_intersection(const EntitySet& a, const EntitySet& b) {
  EntitySet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline EntitySet set_difference(const EntitySet& a, const EntitySet& b) {
  EntitySet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// Bidirectional map between string names and dense integer ids.
class Vocabulary {
 public:
  std::uint32_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }

  std::uint32_t id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown name '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

  /// `id<TAB>name` lines.
  void write(std::ostream& os) const {
    for (std::size_t i = 0; i < names_.size(); ++i) os << i << '\t' << names_[i] << '\n';
  }

  static Vocabulary read(std::istream& is) {
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("dict line " + std::to_string(lineno) + ": missing tab");
      const std::size_t id = std::stoul(line.substr(0, tab));
      if (id != v.size()) throw std::runtime_error("dict line " + std::to_string(lineno) + ": ids must be dense and ordered");
      v.intern(line.substr(tab + 1));
    }
    return v;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct TripleData {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
};

/// Parses `head<TAB>relation<TAB>tail` lines, interning names in order of
/// first appearance. Blank lines and lines starting with '#' are skipped.
inline TripleData parse_triples(std::istream& is) {
  TripleData out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3) throw std::runtime_error("triples line " + std::to_string(lineno) + ": expected 3 tab-separated columns");
    const std::uint32_t h = out.entities.intern(cols[0]);
    const std::uint32_t r = out.relations.intern(cols[1]);
    const std::uint32_t t = out.entities.intern(cols[2]);
    out.triples.push_back({h, r, t});
  }
  return out;
}

inline TripleData read_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open triples file " + path);
  return parse_triples(in);
}

/// Parses triples against fixed vocabularies; unknown names are an error.
inline std::vector<Triple> parse_triples(std::istream& is, const Vocabulary& entities, const Vocabulary& relations) {
  std::vector<Triple> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string h, r, t;
    std::getline(ss, h, '\t');
    std::getline(ss, r, '\t');
    std::getline(ss, t, '\t');
    out.push_back({entities.id(h), relations.id(r), entities.id(t)});
  }
  return out;
}

inline void write_triples(std::ostream& os, std::span<const Triple> triples, const Vocabulary& entities,
                          const Vocabulary& relations) {
  for (const Triple& t : triples) {
    os << entities.name(t.head) << '\t' << relations.name(t.relation) << '\t' << entities.name(t.tail) << '\n';
  }
}

class KnowledgeGraph {
 public:
  KnowledgeGraph(std::size_t num_entities, std::size_t num_relations)
      : num_entities_(num_entities), num_relations_(num_relations) {}

  KnowledgeGraph(std::size_t num_entities, std::size_t num_relations, std::span<const Triple> triples)
      : KnowledgeGraph(num_entities, num_relations) {
    for (const Triple& t : triples) add(t);
    finalize();
  }

  /// Adds an edge; duplicates are ignored. Call finalize() before querying.
  void add(const Triple& t) {
    check(t);
    if (!edges_.insert(key3(t)).second) return;
    triples_.push_back(t);
    out_[key(t.relation, t.head)].push_back(t.tail);
    in_[key(t.relation, t.tail)].push_back(t.head);
  }

  void finalize() {
    for (auto& [k, v] : out_) std::sort(v.begin(), v.end());
    for (auto& [k, v] : in_) std::sort(v.begin(), v.end());
  }

  bool contains(std::uint32_t head, std::uint32_t relation, std::uint32_t tail) const {
    return edges_.count(key3({head, relation, tail})) != 0;
  }

  std::span<const std::uint32_t> tails(std::uint32_t relation, std::uint32_t head) const {
    auto it = out_.find(key(relation, head));
    return it == out_.end() ? std::span<const std::uint32_t>() : std::span<const std::uint32_t>(it->second);
  }

  std::span<const std::uint32_t> heads(std::uint32_t relation, std::uint32_t tail) const {
    auto it = in_.find(key(relation, tail));
    return it == in_.end() ? std::span<const std::uint32_t>() : std::span<const std::uint32_t>(it->second);
  }

  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t size() const { return triples_.size(); }

 private:
  static std::uint64_t key(std::uint32_t r, std::uint32_t e) { return (static_cast<std::uint64_t>(r) << 32) | e; }

  struct Key3 {
    std::uint64_t hr;
    std::uint32_t t;
    friend bool operator==(const Key3&, const Key3&) = default;
  };
  struct Key3Hash {
    std::size_t operator()(const Key3& k) const { return std::hash<std::uint64_t>()(k.hr * 0x9E3779B97F4A7C15ull ^ k.t); }
  };
  static Key3 key3(const Triple& t) { return {key(t.relation, t.head), t.tail}; }

  void check(const Triple& t) const {
    if (t.head >= num_entities_ || t.tail >= num_entities_) throw std::out_of_range("triple entity id out of range");
    if (t.relation >= num_relations_) throw std::out_of_range("triple relation id out of range");
  }

  std::size_t num_entities_;
  std::size_t num_relations_;
  std::vector<Triple> triples_;
  std::unordered_set<Key3, Key3Hash> edges_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> out_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> in_;
};

/// Exact answers by bottom-up set evaluation; negation complements within
/// the graph's entity set.
inline EntitySet answer_symbolic(const QueryAst& q, const KnowledgeGraph& g) {
  switch (q.kind) {
    case NodeKind::Nominal:
      if (q.id >= g.num_entities()) throw std::out_of_range("unknown entity id " + std::to_string(q.id));
      return {static_cast<std::uint32_t>(q.id)};
    case NodeKind::Projection: {
      if (q.id >= g.num_relations()) throw std::out_of_range("unknown relation id " + std::to_string(q.id));
      const EntitySet src = answer_symbolic(q.children.at(0), g);
      EntitySet out;
      for (std::uint32_t e : src) {
        const auto ts = g.tails(static_cast<std::uint32_t>(q.id), e);
        out.insert(out.end(), ts.begin(), ts.end());
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
    case NodeKind::Intersection: {
      EntitySet acc = answer_symbolic(q.children.at(0), g);
      for (std::size_t i = 1; i < q.children.size() && !acc.empty(); ++i) {
        acc = set_intersection(acc, answer_symbolic(q.children[i], g));
      }
      return acc;
    }
    case NodeKind::Union: {
      EntitySet acc;
      for (const QueryAst& c : q.children) acc = set_union(acc, answer_symbolic(c, g));
      return acc;
    }
    case NodeKind::Negation: {
      const EntitySet inner = answer_symbolic(q.children.at(0), g);
      EntitySet out;
      out.reserve(g.num_entities() - inner.size());
      std::size_t j = 0;
      for (std::uint32_t e = 0; e < g.num_entities(); ++e) {
        if (j < inner.size() && inner[j] == e) {
          ++j;
        } else {
          out.push_back(e);
        }
      }
      return out;
    }
  }
  return {};
}

}  // namespace acone
