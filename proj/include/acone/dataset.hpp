#pragma once

// Query datasets: triple splits, grounding of structure templates against a
// graph, easy/hard answer labelling, and the JSON-lines file format.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "acone/graph.hpp"
#include "acone/queries.hpp"

namespace acone {

struct QueryInstance {
  QueryStructure structure = QueryStructure::P1;
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> relations;
  EntitySet easy;
  EntitySet hard;

  QueryAst ast() const { return instantiate(structure, anchors, relations); }
  friend bool operator==(const QueryInstance&, const QueryInstance&) = default;
};

inline nlohmann::ordered_json to_json(const QueryInstance& q) {
  nlohmann::ordered_json j;
  j["structure"] = std::string(to_string(q.structure));
  j["anchors"] = q.anchors;
  j["relations"] = q.relations;
  j["easy"] = q.easy;
  j["hard"] = q.hard;
  return j;
}

inline QueryInstance query_from_json(const nlohmann::json& j) {
  QueryInstance q;
  q.structure = structure_from_string(j.at("structure").get<std::string>());
  q.anchors = j.at("anchors").get<std::vector<std::size_t>>();
  q.relations = j.at("relations").get<std::vector<std::size_t>>();
  q.easy = j.at("easy").get<EntitySet>();
  q.hard = j.at("hard").get<EntitySet>();
  const SlotCounts c = slot_counts(q.structure);
  if (q.anchors.size() != c.anchors || q.relations.size() != c.relations) {
    throw std::runtime_error("query line does not match the arity of structure " + std::string(to_string(q.structure)));
  }
  return q;
}

inline void write_queries(std::ostream& os, std::span<const QueryInstance> queries) {
  for (const QueryInstance& q : queries) os << to_json(q).dump() << '\n';
}

inline std::vector<QueryInstance> read_queries(std::istream& is) {
  std::vector<QueryInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(query_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("queries line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<QueryInstance> read_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open queries file " + path);
  return read_queries(in);
}

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct GenerationConfig {
  SplitRatios ratios;
  std::size_t train_per_structure = 1000;
  std::size_t eval_per_structure = 100;
  /// Use every (anchor, relation) pair of the training graph as a 1p query.
  bool all_train_1p = true;
  /// Queries with more answers than this are rejected.
  std::size_t max_answers = 100;
  /// Grounding attempts allowed per requested query.
  std::size_t attempts_per_query = 50;
  std::uint64_t seed = 0;
};

struct StructureYield {
  std::size_t requested = 0;
  std::size_t generated = 0;
  std::size_t attempts = 0;
};

struct Dataset {
  std::vector<Triple> train_triples;
  std::vector<Triple> valid_triples;
  std::vector<Triple> test_triples;
  std::vector<QueryInstance> train;
  std::vector<QueryInstance> valid;
  std::vector<QueryInstance> test;
  /// Per split ("train", "valid", "test") and structure name.
  std::map<std::string, std::map<std::string, StructureYield>> yield;
};

/// Deduplicates and shuffles the triples, then cuts them by the ratios.
inline void split_triples(std::vector<Triple> triples, const SplitRatios& ratios, std::mt19937_64& rng,
                          std::vector<Triple>& train, std::vector<Triple>& valid, std::vector<Triple>& test) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train <= 0 || ratios.valid < 0 || ratios.test < 0) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  std::shuffle(triples.begin(), triples.end(), rng);
  const std::size_t n = triples.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n))));
  train.assign(triples.begin(), triples.begin() + static_cast<std::ptrdiff_t>(n_train));
  valid.assign(triples.begin() + static_cast<std::ptrdiff_t>(n_train),
               triples.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  test.assign(triples.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), triples.end());
}

namespace detail {

struct InEdge {
  std::uint32_t relation;
  std::uint32_t head;
};

inline std::vector<std::vector<InEdge>> incoming(std::size_t num_entities, std::span<const Triple> triples) {
  std::vector<std::vector<InEdge>> out(num_entities);
  for (const Triple& t : triples) out[t.tail].push_back({t.relation, t.head});
  for (auto& v : out) {
    std::sort(v.begin(), v.end(), [](const InEdge& a, const InEdge& b) {
      return a.relation < b.relation || (a.relation == b.relation && a.head < b.head);
    });
  }
  return out;
}

// Fills template slots by walking backwards from `target` along incoming
// edges, so that the positive part of the query reaches the target.
class Grounder {
 public:
  Grounder(const std::vector<std::vector<InEdge>>& in, const std::vector<std::vector<InEdge>>* fresh,
           std::mt19937_64& rng)
      : in_(in), fresh_(fresh), rng_(rng) {
    for (std::uint32_t e = 0; e < in_.size(); ++e) {
      if (!in_[e].empty()) reachable_.push_back(e);
    }
  }

  bool ground(const QueryAst& node, std::uint32_t target, bool use_fresh, std::vector<std::size_t>& anchors,
              std::vector<std::size_t>& relations) {
    switch (node.kind) {
      case NodeKind::Nominal:
        anchors[node.id] = target;
        return true;
      case NodeKind::Projection: {
        const std::vector<InEdge>* cand = &in_[target];
        if (use_fresh && fresh_ && !(*fresh_)[target].empty()) cand = &(*fresh_)[target];
        if (cand->empty()) return false;
        const InEdge e = (*cand)[pick(cand->size())];
        relations[node.id] = e.relation;
        return ground(node.children[0], e.head, use_fresh, anchors, relations);
      }
      case NodeKind::Intersection:
      case NodeKind::Union:
        for (std::size_t i = 0; i < node.children.size(); ++i) {
          if (!ground(node.children[i], target, use_fresh && i == 0, anchors, relations)) return false;
        }
        return true;
      case NodeKind::Negation: {
        if (reachable_.empty()) return false;
        const std::uint32_t other = reachable_[pick(reachable_.size())];
        return ground(node.children[0], other, false, anchors, relations);
      }
    }
    return false;
  }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

 private:
  const std::vector<std::vector<InEdge>>& in_;
  const std::vector<std::vector<InEdge>>* fresh_;
  std::mt19937_64& rng_;
  std::vector<std::uint32_t> reachable_;
};

inline bool has_duplicate_branches(const QueryAst& q) {
  if (q.kind == NodeKind::Intersection || q.kind == NodeKind::Union) {
    for (std::size_t i = 0; i < q.children.size(); ++i) {
      for (std::size_t j = i + 1; j < q.children.size(); ++j) {
        if (q.children[i] == q.children[j]) return true;
      }
    }
  }
  for (const QueryAst& c : q.children) {
    if (has_duplicate_branches(c)) return true;
  }
  return false;
}

using QueryKey = std::tuple<QueryStructure, std::vector<std::size_t>, std::vector<std::size_t>>;

}  // namespace detail

/// Grounds `count` queries of structure `s`. Answers are taken on `big`; when
/// `small` is given, answers on it become easy and the rest hard, and only
/// queries with hard answers are kept. `big_triples` and `small_triples`
/// drive the backward walk (edges of big not in small are preferred on the
/// first branch).
inline std::vector<QueryInstance> ground_queries(QueryStructure s, std::size_t count, const KnowledgeGraph& big,
                                                 const KnowledgeGraph* small, const GenerationConfig& cfg,
                                                 std::mt19937_64& rng, StructureYield& yield) {
  const QueryAst tmpl = structure_template(s);
  const SlotCounts slots = slot_counts(tmpl);
  const auto in = detail::incoming(big.num_entities(), big.triples());
  std::vector<std::vector<detail::InEdge>> fresh;
  std::vector<Triple> fresh_triples;
  if (small) {
    for (const Triple& t : big.triples()) {
      if (!small->contains(t.head, t.relation, t.tail)) fresh_triples.push_back(t);
    }
    fresh = detail::incoming(big.num_entities(), fresh_triples);
  }
  detail::Grounder grounder(in, small ? &fresh : nullptr, rng);

  std::vector<std::uint32_t> targets;
  if (small) {
    for (const Triple& t : fresh_triples) targets.push_back(t.tail);
  } else {
    for (std::uint32_t e = 0; e < in.size(); ++e) {
      if (!in[e].empty()) targets.push_back(e);
    }
  }
  yield.requested += count;
  std::vector<QueryInstance> out;
  if (targets.empty()) return out;

  std::set<detail::QueryKey> seen;
  const std::size_t max_attempts = count * cfg.attempts_per_query;
  std::size_t attempts = 0;
  while (out.size() < count && attempts < max_attempts) {
    ++attempts;
    QueryInstance q;
    q.structure = s;
    q.anchors.assign(slots.anchors, 0);
    q.relations.assign(slots.relations, 0);
    const std::uint32_t target = targets[grounder.pick(targets.size())];
    if (!grounder.ground(tmpl, target, small != nullptr, q.anchors, q.relations)) continue;
    const QueryAst ast = q.ast();
    if (detail::has_duplicate_branches(ast)) continue;
    if (!seen.insert({s, q.anchors, q.relations}).second) continue;
    const EntitySet answers = answer_symbolic(ast, big);
    if (answers.empty() || answers.size() > cfg.max_answers) continue;
    if (small) {
      q.easy = answer_symbolic(ast, *small);
      q.hard = set_difference(answers, q.easy);
      if (q.hard.empty()) continue;
    } else {
      q.hard = answers;
    }
    out.push_back(std::move(q));
  }
  yield.generated += out.size();
  yield.attempts += attempts;
  return out;
}

/// Splits the triples and builds train/valid/test query sets. Train queries
/// are answered on the training graph (answers stored as hard, easy empty);
/// valid and test queries label answers on the next-smaller graph as easy.
inline Dataset generate_dataset(std::span<const Triple> triples, std::size_t num_entities, std::size_t num_relations,
                                const GenerationConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  Dataset ds;
  split_triples({triples.begin(), triples.end()}, cfg.ratios, rng, ds.train_triples, ds.valid_triples, ds.test_triples);

  KnowledgeGraph train_g(num_entities, num_relations, ds.train_triples);
  KnowledgeGraph valid_g(num_entities, num_relations);
  for (const Triple& t : ds.train_triples) valid_g.add(t);
  for (const Triple& t : ds.valid_triples) valid_g.add(t);
  valid_g.finalize();
  KnowledgeGraph full_g(num_entities, num_relations);
  for (const Triple& t : valid_g.triples()) full_g.add(t);
  for (const Triple& t : ds.test_triples) full_g.add(t);
  full_g.finalize();

  for (QueryStructure s : kTrainingStructures) {
    StructureYield& y = ds.yield["train"][std::string(to_string(s))];
    if (s == QueryStructure::P1 && cfg.all_train_1p) {
      std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
      for (const Triple& t : train_g.triples()) pairs.insert({t.head, t.relation});
      for (const auto& [h, r] : pairs) {
        QueryInstance q;
        q.structure = s;
        q.anchors = {h};
        q.relations = {r};
        const auto ts = train_g.tails(r, h);
        q.hard.assign(ts.begin(), ts.end());
        ds.train.push_back(std::move(q));
      }
      y.requested += pairs.size();
      y.generated += pairs.size();
      y.attempts += pairs.size();
      continue;
    }
    auto qs = ground_queries(s, cfg.train_per_structure, train_g, nullptr, cfg, rng, y);
    ds.train.insert(ds.train.end(), std::make_move_iterator(qs.begin()), std::make_move_iterator(qs.end()));
  }
  for (QueryStructure s : kAllStructures) {
    StructureYield& yv = ds.yield["valid"][std::string(to_string(s))];
    auto v = ground_queries(s, cfg.eval_per_structure, valid_g, &train_g, cfg, rng, yv);
    ds.valid.insert(ds.valid.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    StructureYield& yt = ds.yield["test"][std::string(to_string(s))];
    auto t = ground_queries(s, cfg.eval_per_structure, full_g, &valid_g, cfg, rng, yt);
    ds.test.insert(ds.test.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return ds;
}

/// Writes entities.dict, relations.dict, {train,valid,test}.tsv and
/// {train,valid,test}.jsonl into `dir`. Returns the written paths.
inline std::vector<std::filesystem::path> write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                                                        const Vocabulary& entities, const Vocabulary& relations) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  const auto open = [&](const std::string& name) {
    paths.push_back(dir / name);
    std::ofstream os(paths.back(), std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + paths.back().string());
    return os;
  };
  {
    auto os = open("entities.dict");
    entities.write(os);
  }
  {
    auto os = open("relations.dict");
    relations.write(os);
  }
  const std::pair<const char*, const std::vector<Triple>*> tsv[] = {
      {"train.tsv", &ds.train_triples}, {"valid.tsv", &ds.valid_triples}, {"test.tsv", &ds.test_triples}};
  for (const auto& [name, triples] : tsv) {
    auto os = open(name);
    write_triples(os, *triples, entities, relations);
  }
  const std::pair<const char*, const std::vector<QueryInstance>*> jsonl[] = {
      {"train.jsonl", &ds.train}, {"valid.jsonl", &ds.valid}, {"test.jsonl", &ds.test}};
  for (const auto& [name, queries] : jsonl) {
    auto os = open(name);
    write_queries(os, *queries);
  }
  return paths;
}

inline Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Vocabulary::read(in);
}

}  // namespace acone
