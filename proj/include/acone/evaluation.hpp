#pragma once

// Filtered ranking metrics per query structure, the analytic random-ranking
// baseline, and averages over relation-pattern subgroups.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "acone/dataset.hpp"
#include "acone/model.hpp"

namespace acone {

/// Mean of 1/rank.
inline double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("mrr of no ranks");
  double s = 0.0;
  for (std::size_t r : ranks) {
    if (r == 0) throw std::invalid_argument("ranks start at 1");
    s += 1.0 / static_cast<double>(r);
  }
  return s / static_cast<double>(ranks.size());
}

inline double hits_at(std::span<const std::size_t> ranks, std::size_t k) {
  std::size_t n = 0;
  for (std::size_t r : ranks) n += r <= k;
  return static_cast<double>(n) / static_cast<double>(ranks.size());
}

/// Rank of every hard answer among the non-answers: 1 + the number of
/// entities outside easy ∪ hard whose distance is at most the answer's own.
inline std::vector<std::size_t> filtered_ranks(std::span<const double> distances, const QueryInstance& q) {
  const EntitySet known = set_union(q.easy, q.hard);
  std::vector<double> others;
  others.reserve(distances.size());
  std::size_t j = 0;
  for (std::uint32_t e = 0; e < distances.size(); ++e) {
    if (j < known.size() && known[j] == e) {
      ++j;
      continue;
    }
    others.push_back(distances[e]);
  }
  std::sort(others.begin(), others.end());
  std::vector<std::size_t> ranks;
  for (std::uint32_t a : q.hard) {
    const auto beaten = std::upper_bound(others.begin(), others.end(), distances[a]) - others.begin();
    ranks.push_back(1 + static_cast<std::size_t>(beaten));
  }
  return ranks;
}

struct QueryResult {
  QueryStructure structure = QueryStructure::P1;
  std::vector<std::size_t> relations;
  std::vector<std::size_t> ranks;

  /// Answers are averaged within the query first.
  double mrr() const { return acone::mrr(ranks); }
};

struct MetricRow {
  std::size_t queries = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

struct EvaluationReport {
  std::map<std::string, MetricRow> per_structure;
  /// Macro-average of MRR over the non-negation structures present.
  double average_mrr = 0.0;
  /// Macro-average over the negation structures present, if any.
  double average_negation_mrr = 0.0;
};

/// Distances from each query to every entity, one vector per query.
using Scorer = std::function<std::vector<std::vector<double>>(std::span<const QueryInstance>)>;

inline std::vector<QueryResult> rank_queries(std::span<const QueryInstance> queries, const Scorer& score) {
  const auto dist = score(queries);
  if (dist.size() != queries.size()) throw std::runtime_error("scorer returned the wrong number of rows");
  std::vector<QueryResult> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.push_back({queries[i].structure, queries[i].relations, filtered_ranks(dist[i], queries[i])});
  }
  return out;
}

inline EvaluationReport summarize(std::span<const QueryResult> results) {
  std::map<std::string, std::vector<const QueryResult*>> by;
  for (const QueryResult& r : results) by[std::string(to_string(r.structure))].push_back(&r);
  EvaluationReport rep;
  double pos = 0, neg = 0;
  std::size_t npos = 0, nneg = 0;
  for (const auto& [name, rs] : by) {
    MetricRow row;
    row.queries = rs.size();
    for (const QueryResult* r : rs) {
      row.mrr += r->mrr();
      row.hits1 += hits_at(r->ranks, 1);
      row.hits3 += hits_at(r->ranks, 3);
      row.hits10 += hits_at(r->ranks, 10);
    }
    const double n = static_cast<double>(rs.size());
    row.mrr /= n;
    row.hits1 /= n;
    row.hits3 /= n;
    row.hits10 /= n;
    rep.per_structure[name] = row;
    if (has_negation(structure_from_string(name))) {
      neg += row.mrr;
      ++nneg;
    } else {
      pos += row.mrr;
      ++npos;
    }
  }
  rep.average_mrr = npos ? pos / static_cast<double>(npos) : 0.0;
  rep.average_negation_mrr = nneg ? neg / static_cast<double>(nneg) : 0.0;
  return rep;
}

/// Scores queries with a model, embedding each structure as one batch.
inline Scorer model_scorer(const Model& m, double lambda) {
  return [&m, lambda](std::span<const QueryInstance> queries) {
    std::vector<std::vector<double>> out(queries.size());
    std::map<QueryStructure, std::vector<std::size_t>> by;
    for (std::size_t i = 0; i < queries.size(); ++i) by[queries[i].structure].push_back(i);
    for (const auto& [s, idx] : by) {
      const SlotCounts c = slot_counts(s);
      SlotColumns slots;
      slots.anchors.assign(c.anchors, {});
      slots.relations.assign(c.relations, {});
      for (std::size_t i : idx) {
        for (std::size_t k = 0; k < c.anchors; ++k) slots.anchors[k].push_back(queries[i].anchors[k]);
        for (std::size_t k = 0; k < c.relations; ++k) slots.relations[k].push_back(queries[i].relations[k]);
      }
      ad::Tape tape;
      Forward f(tape, m);
      const auto disjuncts = f.embed(structure_template(s), slots);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        std::vector<ConeRow> rows;
        for (const auto& d : disjuncts) rows.push_back(cone_row(d, r));
        out[idx[r]] = distances_to_all(m, rows, lambda);
      }
    }
    return out;
  };
}

inline EvaluationReport evaluate(const Model& m, std::span<const QueryInstance> queries, double lambda) {
  const auto results = rank_queries(queries, model_scorer(m, lambda));
  return summarize(results);
}

/// Expected MRR when every answer's rank is uniform over its filtered pool:
/// for a query with A known answers the pool has N = |E| - A + 1 entries and
/// E[1/rank] = H_N / N.
inline double random_baseline_mrr(std::span<const QueryInstance> queries, std::size_t num_entities) {
  if (queries.empty()) throw std::invalid_argument("random baseline of no queries");
  double total = 0.0;
  for (const QueryInstance& q : queries) {
    const std::size_t n = num_entities - set_union(q.easy, q.hard).size() + 1;
    double h = 0.0;
    for (std::size_t i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
    total += h / static_cast<double>(n);
  }
  return total / static_cast<double>(queries.size());
}

// ---- subgroups ------------------------------------------------------------------------

inline constexpr const char* kOthers = "Others";

struct SubgroupRow {
  std::size_t queries = 0;
  double share = 0.0;  // fraction of all queries
  double mrr = 0.0;
};

/// Pattern classes of a query: the union of its relations' labels, or Others.
inline std::set<std::string> query_classes(std::span<const std::size_t> relations,
                                           const std::map<std::size_t, std::set<std::string>>& labels) {
  std::set<std::string> out;
  for (std::size_t r : relations) {
    if (auto it = labels.find(r); it != labels.end()) out.insert(it->second.begin(), it->second.end());
  }
  if (out.empty()) out.insert(kOthers);
  return out;
}

/// Average query MRR over the queries touching each pattern class.
inline std::map<std::string, SubgroupRow> subgroup_report(std::span<const QueryResult> results,
                                                          const std::map<std::size_t, std::set<std::string>>& labels) {
  std::map<std::string, SubgroupRow> out;
  for (const QueryResult& r : results) {
    for (const std::string& c : query_classes(r.relations, labels)) {
      SubgroupRow& row = out[c];
      ++row.queries;
      row.mrr += r.mrr();
    }
  }
  for (auto& [c, row] : out) {
    row.mrr /= static_cast<double>(row.queries);
    row.share = static_cast<double>(row.queries) / static_cast<double>(results.size());
  }
  return out;
}

// ---- output -------------------------------------------------------------------------

inline void write_tsv(std::ostream& os, const EvaluationReport& rep) {
  os << "structure\tqueries\tmrr\thits1\thits3\thits10\n";
  for (const auto& [name, r] : rep.per_structure) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6f\t%.6f\t%.6f\t%.6f\n", name.c_str(), r.queries, r.mrr, r.hits1, r.hits3,
                  r.hits10);
    os << buf;
  }
  char buf[100];
  std::snprintf(buf, sizeof buf, "avg\t-\t%.6f\t-\t-\t-\navg_neg\t-\t%.6f\t-\t-\t-\n", rep.average_mrr,
                rep.average_negation_mrr);
  os << buf;
}

inline void write_table(std::ostream& os, const EvaluationReport& rep) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-9s %7s %8s %8s %8s %8s\n", "structure", "queries", "MRR", "H@1", "H@3", "H@10");
  os << buf;
  for (const auto& [name, r] : rep.per_structure) {
    std::snprintf(buf, sizeof buf, "%-9s %7zu %8.4f %8.4f %8.4f %8.4f\n", name.c_str(), r.queries, r.mrr, r.hits1,
                  r.hits3, r.hits10);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-9s %7s %8.4f\n%-9s %7s %8.4f\n", "avg", "", rep.average_mrr, "avg_neg", "",
                rep.average_negation_mrr);
  os << buf;
}

inline nlohmann::ordered_json to_json(const EvaluationReport& rep) {
  nlohmann::ordered_json j;
  for (const auto& [name, r] : rep.per_structure) {
    j["structures"][name] = {
        {"queries", r.queries}, {"mrr", r.mrr}, {"hits1", r.hits1}, {"hits3", r.hits3}, {"hits10", r.hits10}};
  }
  j["average_mrr"] = rep.average_mrr;
  j["average_negation_mrr"] = rep.average_negation_mrr;
  return j;
}

inline void write_subgroups(std::ostream& os, const std::map<std::string, SubgroupRow>& rows) {
  os << "pattern\tqueries\tshare\tmrr\n";
  for (const auto& [c, r] : rows) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s\t%zu\t%.4f\t%.6f\n", c.c_str(), r.queries, r.share, r.mrr);
    os << buf;
  }
}

}  // namespace acone
