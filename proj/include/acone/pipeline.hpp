#pragma once

// Dataset-directory training and evaluation shared by the command line tool
// and the acceptance checks.

#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include "acone/dataset.hpp"
#include "acone/evaluation.hpp"
#include "acone/manifest.hpp"
#include "acone/training.hpp"

namespace acone {

struct DatasetFiles {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<QueryInstance> train;
  std::vector<QueryInstance> valid;
  std::vector<QueryInstance> test;
};

/// Reads a directory written by write_dataset. Missing splits are left empty
/// unless `require_train` is set.
inline DatasetFiles load_dataset(const std::filesystem::path& dir, bool require_train = true) {
  DatasetFiles d;
  d.entities = read_vocabulary(dir / "entities.dict");
  d.relations = read_vocabulary(dir / "relations.dict");
  const auto split = [&](const char* name, std::vector<QueryInstance>& out, bool required) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) {
      out = read_queries(p.string());
    } else if (required) {
      throw std::runtime_error("missing " + p.string());
    }
  };
  split("train.jsonl", d.train, require_train);
  split("valid.jsonl", d.valid, false);
  split("test.jsonl", d.test, false);
  return d;
}

/// Evaluates in `threads` contiguous chunks; results do not depend on the count.
inline std::vector<QueryResult> rank_queries_parallel(const Model& m, std::span<const QueryInstance> queries,
                                                      double lambda, std::size_t threads) {
  threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
  std::vector<std::vector<QueryResult>> parts(threads);
  const std::size_t chunk = (queries.size() + threads - 1) / threads;
  const auto work = [&](std::size_t t) {
    const std::size_t begin = std::min(queries.size(), t * chunk);
    const std::size_t end = std::min(queries.size(), begin + chunk);
    parts[t] = rank_queries(queries.subspan(begin, end - begin), model_scorer(m, lambda));
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  std::vector<QueryResult> out;
  for (auto& p : parts) out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  return out;
}

struct TrainOutcome {
  TrainState last;
  std::optional<TrainState> best;  // set when a validation split exists
  std::vector<std::string> outputs;
};

/// Trains on `data.train`, validating on `data.valid` (average non-negation
/// MRR) every eval_every steps. With a non-empty `out`, writes last.ckpt,
/// best.ckpt and metrics.tsv there.
inline TrainOutcome train_dataset(const DatasetFiles& data, const TrainingConfig& cfg, const std::filesystem::path& out,
                                  const std::function<void(const std::string&)>& log = nullptr) {
  Trainer tr(data.train, data.entities.size(), data.relations.size(), cfg);
  TrainOutcome result{tr.state(), std::nullopt, {}};
  std::ostringstream metrics;
  metrics << "step\tkind\tloss\tvalid_avg_mrr\tvalid_neg_mrr\n";
  const bool write = !out.empty();
  if (write) std::filesystem::create_directories(out);
  const auto path = [&](const char* name) { return (out / name).string(); };
  char buf[160];

  EvaluationReport latest;
  const auto evaluate_valid = [&](const Model& m) {
    latest = summarize(rank_queries_parallel(m, data.valid, cfg.lambda, cfg.threads));
    return latest.average_mrr;
  };
  const auto on_eval = [&](bool improved) {
    std::snprintf(buf, sizeof buf, "%llu\teval\t%.6f\t%.6f\t%.6f\n", static_cast<unsigned long long>(tr.state().step),
                  tr.state().running_loss, latest.average_mrr, latest.average_negation_mrr);
    metrics << buf;
    if (log) {
      std::snprintf(buf, sizeof buf, "step %llu valid avg MRR %.4f neg %.4f%s",
                    static_cast<unsigned long long>(tr.state().step), latest.average_mrr, latest.average_negation_mrr,
                    improved ? " (best)" : "");
      log(buf);
    }
    if (improved) result.best = tr.state();
    if (write) {
      save_checkpoint(path("last.ckpt"), cfg, data.entities, data.relations, tr.state());
      if (improved) save_checkpoint(path("best.ckpt"), cfg, data.entities, data.relations, tr.state());
    }
  };
  const auto on_log = [&](const StepLog& s) {
    std::snprintf(buf, sizeof buf, "%llu\ttrain\t%.6f\t\t\n", static_cast<unsigned long long>(s.step), s.loss);
    metrics << buf;
    if (log) {
      std::snprintf(buf, sizeof buf, "step %llu loss %.4f", static_cast<unsigned long long>(s.step), s.loss);
      log(buf);
    }
  };
  tr.run(data.valid.empty() ? std::function<double(const Model&)>() : evaluate_valid, on_eval, on_log);

  result.last = tr.state();
  if (write) {
    save_checkpoint(path("last.ckpt"), cfg, data.entities, data.relations, tr.state());
    result.outputs.push_back(path("last.ckpt"));
    if (result.best) result.outputs.push_back(path("best.ckpt"));
    write_atomically(out / "metrics.tsv", metrics.str());
    result.outputs.push_back(path("metrics.tsv"));
  }
  return result;
}

}  // namespace acone
