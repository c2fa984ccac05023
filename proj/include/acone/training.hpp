#pragma once

// Negative-sampling training: hyperparameters and config files, batching,
// Adam, checkpoints, and multi-seed summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "acone/dataset.hpp"
#include "acone/graph.hpp"
#include "acone/model.hpp"

namespace acone {

struct TrainingConfig {
  std::size_t dim = 800;         // d
  std::size_t batch = 512;       // b
  std::size_t negatives = 128;   // n
  double gamma = 20.0;           // margin
  double lr = 1e-4;              // l
  double lambda = 0.02;          // inside-distance weight
  std::uint64_t seed = 0;
  std::size_t steps = 100000;
  ApertureMode mode = ApertureMode::Additive;
  std::size_t eval_every = 1000;  // also the checkpoint cadence
  std::size_t patience = 5;       // evaluations without improvement
  std::size_t log_every = 100;
  std::size_t threads = 1;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Desk-scale settings for graphs of a few hundred entities.
inline TrainingConfig toy_profile() {
  TrainingConfig c;
  c.dim = 32;
  c.batch = 64;
  c.negatives = 16;
  c.gamma = 12.0;
  c.lr = 2e-2;
  // Ranking saturates early on small graphs; the relation geometry keeps
  // settling, so the toy profile runs the whole budget.
  c.steps = 5000;
  c.eval_every = 500;
  c.patience = 10;
  c.log_every = 100;
  return c;
}

inline TrainingConfig profile(const std::string& name) {
  if (name.empty() || name == "default") return {};
  if (name == "toy") return toy_profile();
  throw std::invalid_argument("unknown profile '" + name + "'");
}

/// Sets one hyperparameter from its config-file spelling.
inline void apply_setting(TrainingConfig& c, const std::string& key, const std::string& value) {
  const auto whole = [&](const std::string& v) {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an integer: " + v);
    return static_cast<std::size_t>(x);
  };
  const auto real = [&](const std::string& v) {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a number: " + v);
    return x;
  };
  try {
    if (key == "d" || key == "dim") c.dim = whole(value);
    else if (key == "b" || key == "batch") c.batch = whole(value);
    else if (key == "n" || key == "negatives") c.negatives = whole(value);
    else if (key == "gamma") c.gamma = real(value);
    else if (key == "lr" || key == "l") c.lr = real(value);
    else if (key == "lambda") c.lambda = real(value);
    else if (key == "seed") c.seed = whole(value);
    else if (key == "steps") c.steps = whole(value);
    else if (key == "mode") c.mode = parse_aperture_mode(value);
    else if (key == "eval_every") c.eval_every = whole(value);
    else if (key == "patience") c.patience = whole(value);
    else if (key == "log_every") c.log_every = whole(value);
    else if (key == "threads") c.threads = whole(value);
    else throw std::invalid_argument("unknown setting '" + key + "'");
  } catch (const std::logic_error& e) {
    if (std::string(e.what()).starts_with("unknown setting")) throw;
    throw std::invalid_argument("bad value for '" + key + "': " + value);
  }
}

inline void validate(const TrainingConfig& c) {
  if (c.dim == 0 || c.batch == 0) throw std::invalid_argument("d and b must be positive");
  if (c.negatives == 0) throw std::invalid_argument("n (negatives) must be at least 1");
  if (!(c.lambda > 0.0 && c.lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0, 1)");
  if (!(c.lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (c.threads == 0) throw std::invalid_argument("threads must be at least 1");
}

/// `key = value` lines; '#' starts a comment, [section] headers are ignored,
/// values may be double-quoted.
inline std::vector<std::pair<std::string, std::string>> parse_settings(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

/// Profile defaults, then the file, then explicit overrides (e.g. CLI flags).
inline TrainingConfig resolve_config(const std::string& profile_name, const std::string& file,
                                     const std::vector<std::pair<std::string, std::string>>& overrides) {
  TrainingConfig c = profile(profile_name);
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config " + file);
    for (const auto& [k, v] : parse_settings(in)) apply_setting(c, k, v);
  }
  for (const auto& [k, v] : overrides) apply_setting(c, k, v);
  validate(c);
  return c;
}

inline nlohmann::ordered_json to_json(const TrainingConfig& c) {
  return {{"d", c.dim},           {"b", c.batch},          {"n", c.negatives},
          {"gamma", c.gamma},     {"lr", c.lr},            {"lambda", c.lambda},
          {"seed", c.seed},       {"steps", c.steps},      {"mode", std::string(to_string(c.mode))},
          {"eval_every", c.eval_every}, {"patience", c.patience}, {"log_every", c.log_every},
          {"threads", c.threads}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.dim = j.at("d");
  c.batch = j.at("b");
  c.negatives = j.at("n");
  c.gamma = j.at("gamma");
  c.lr = j.at("lr");
  c.lambda = j.at("lambda");
  c.seed = j.at("seed");
  c.steps = j.at("steps");
  c.mode = parse_aperture_mode(j.at("mode").get<std::string>());
  c.eval_every = j.at("eval_every");
  c.patience = j.at("patience");
  c.log_every = j.at("log_every");
  c.threads = j.at("threads");
  return c;
}

// ---- optimizer ----------------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline void adam_step(std::span<double> params, std::span<const double> grad, AdamState& s, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * grad[i];
    s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps);
  }
}

// ---- sampling -------------------------------------------------------------------------

/// k entities outside easy ∪ hard; distinct unless fewer than k remain.
inline std::vector<std::size_t> sample_negatives(const QueryInstance& q, std::size_t num_entities, std::size_t k,
                                                 std::mt19937_64& rng) {
  if (k == 0) throw std::invalid_argument("sample_negatives: k must be at least 1");
  const EntitySet answers = set_union(q.easy, q.hard);
  const std::size_t free = num_entities - answers.size();
  if (free == 0) throw std::runtime_error("sample_negatives: every entity is an answer");
  const auto is_answer = [&](std::size_t e) {
    return std::binary_search(answers.begin(), answers.end(), static_cast<std::uint32_t>(e));
  };
  std::vector<std::size_t> out;
  out.reserve(k);
  if (free < k) {
    std::vector<std::size_t> pool;
    for (std::size_t e = 0; e < num_entities; ++e) {
      if (!is_answer(e)) pool.push_back(e);
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < k; ++i) out.push_back(pool[pick(rng)]);
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, num_entities - 1);
  std::unordered_set<std::size_t> taken;
  while (out.size() < k) {
    const std::size_t e = pick(rng);
    if (is_answer(e) || !taken.insert(e).second) continue;
    out.push_back(e);
  }
  return out;
}

// ---- training state -------------------------------------------------------------------

struct TrainState {
  Model model;
  AdamState adam;
  std::uint64_t step = 0;
  std::mt19937_64 rng;
  double running_loss = 0.0;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::uint64_t best_step = 0;
  std::size_t stale_evals = 0;

  explicit TrainState(Model m) : model(std::move(m)) {}
};

struct StepLog {
  std::uint64_t step = 0;
  double loss = 0.0;
  std::map<std::string, double> per_structure;
};

/// Draws batches from a fixed query pool and applies Adam updates.
class Trainer {
 public:
  Trainer(std::vector<QueryInstance> pool, std::size_t num_entities, std::size_t num_relations, TrainingConfig cfg)
      : pool_(std::move(pool)),
        num_entities_(num_entities),
        cfg_(cfg),
        state_(Model(ModelConfig{num_entities, num_relations, cfg.dim, cfg.mode})) {
    validate(cfg_);
    if (pool_.empty()) throw std::invalid_argument("training needs at least one query");
    for (const auto& q : pool_) {
      if (q.hard.empty()) throw std::invalid_argument("training query without answers");
    }
    state_.model.initialize(cfg_.seed);
    state_.rng.seed(cfg_.seed ^ 0x5DEECE66Dull);
  }

  const TrainingConfig& config() const { return cfg_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }

  /// One optimizer step; returns the batch loss and the per-structure means.
  StepLog step() {
    std::vector<QueryGroup> groups = sample_batch();
    std::vector<double> grad(state_.model.params().size(), 0.0);
    std::vector<double> group_losses(groups.size(), 0.0);
    const std::size_t shards = std::min(cfg_.threads, groups.size());
    if (shards <= 1) {
      run_shard(groups, 0, 1, grad, group_losses);
    } else {
      std::vector<std::vector<double>> grads(shards, std::vector<double>(grad.size(), 0.0));
      std::vector<std::thread> workers;
      for (std::size_t s = 0; s < shards; ++s) {
        workers.emplace_back([&, s] { run_shard(groups, s, shards, grads[s], group_losses); });
      }
      for (auto& w : workers) w.join();
      for (const auto& g : grads) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
      }
    }
    StepLog log;
    log.step = state_.step + 1;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      log.loss += group_losses[i];
      const double share = static_cast<double>(groups[i].positives.size()) / static_cast<double>(cfg_.batch);
      log.per_structure[structure_names_[i]] = group_losses[i] / share;
    }
    if (!std::isfinite(log.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << log.step << ";";
      for (const auto& [s, l] : log.per_structure) msg << ' ' << s << '=' << l;
      throw std::runtime_error(msg.str());
    }
    adam_step(state_.model.params(), grad, state_.adam, cfg_.lr);
    ++state_.step;
    state_.running_loss = state_.step == 1 ? log.loss : 0.99 * state_.running_loss + 0.01 * log.loss;
    return log;
  }

  /// Loss of the given queries at the current parameters, without updating.
  double loss_of(const std::vector<QueryGroup>& groups) const {
    std::size_t batch = 0;
    for (const auto& g : groups) batch += g.positives.size();
    ad::Tape tape;
    Forward f(tape, state_.model);
    double total = 0.0;
    for (const auto& g : groups) total += group_loss(f, g, cfg_.gamma, cfg_.lambda, batch).item();
    return total;
  }

  /// Groups `queries` by structure, drawing one positive and k negatives each.
  std::vector<QueryGroup> make_groups(const std::vector<const QueryInstance*>& queries, std::mt19937_64& rng,
                                      std::vector<std::string>* names = nullptr) const {
    std::map<QueryStructure, std::vector<const QueryInstance*>> by;
    for (const QueryInstance* q : queries) by[q->structure].push_back(q);
    std::vector<QueryGroup> out;
    if (names) names->clear();
    for (const auto& [s, qs] : by) {
      QueryGroup g;
      g.tmpl = structure_template(s);
      const SlotCounts c = slot_counts(s);
      g.slots.anchors.assign(c.anchors, {});
      g.slots.relations.assign(c.relations, {});
      for (const QueryInstance* q : qs) {
        for (std::size_t i = 0; i < c.anchors; ++i) g.slots.anchors[i].push_back(q->anchors[i]);
        for (std::size_t i = 0; i < c.relations; ++i) g.slots.relations[i].push_back(q->relations[i]);
        g.positives.push_back(q->hard[std::uniform_int_distribution<std::size_t>(0, q->hard.size() - 1)(rng)]);
        for (std::size_t e : sample_negatives(*q, num_entities_, cfg_.negatives, rng)) g.negatives.push_back(e);
      }
      if (names) names->emplace_back(to_string(s));
      out.push_back(std::move(g));
    }
    return out;
  }

  /// Trains until cfg.steps, calling `evaluate` (higher is better) every
  /// eval_every steps and `on_eval(improved)` afterwards, e.g. to write
  /// checkpoints. Stops early after `patience` evaluations without gain.
  void run(const std::function<double(const Model&)>& evaluate, const std::function<void(bool)>& on_eval,
           const std::function<void(const StepLog&)>& on_log) {
    while (state_.step < cfg_.steps) {
      const StepLog log = step();
      if (on_log && (state_.step % cfg_.log_every == 0 || state_.step == cfg_.steps)) on_log(log);
      if (evaluate && (state_.step % cfg_.eval_every == 0 || state_.step == cfg_.steps)) {
        const double metric = evaluate(state_.model);
        const bool improved = metric > state_.best_metric;
        if (improved) {
          state_.best_metric = metric;
          state_.best_step = state_.step;
          state_.stale_evals = 0;
        } else {
          ++state_.stale_evals;
        }
        if (on_eval) on_eval(improved);
        if (state_.stale_evals >= cfg_.patience) break;
      }
    }
  }

 private:
  std::vector<QueryGroup> sample_batch() {
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    std::vector<const QueryInstance*> chosen;
    for (std::size_t i = 0; i < cfg_.batch; ++i) chosen.push_back(&pool_[pick(state_.rng)]);
    return make_groups(chosen, state_.rng, &structure_names_);
  }

  void run_shard(const std::vector<QueryGroup>& groups, std::size_t shard, std::size_t shards, std::vector<double>& grad,
                 std::vector<double>& losses) const {
    ad::Tape tape;
    Forward f(tape, state_.model, grad);
    std::optional<ad::Var> total;
    for (std::size_t i = shard; i < groups.size(); i += shards) {
      const ad::Var l = group_loss(f, groups[i], cfg_.gamma, cfg_.lambda, cfg_.batch);
      losses[i] = l.item();
      total = total ? *total + l : l;
    }
    if (total) tape.backward(*total);
  }

  std::vector<QueryInstance> pool_;
  std::size_t num_entities_;
  TrainingConfig cfg_;
  TrainState state_;
  std::vector<std::string> structure_names_;
};

// ---- checkpoints ----------------------------------------------------------------------

inline constexpr const char* kCheckpointFormat = "acone-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainingConfig config;
  Vocabulary entities;
  Vocabulary relations;
  TrainState state;
};

inline nlohmann::ordered_json checkpoint_json(const TrainingConfig& cfg, const Vocabulary& entities,
                                              const Vocabulary& relations, const TrainState& s) {
  std::ostringstream rng;
  rng << s.rng;
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(cfg);
  j["entities"] = entities.names();
  j["relations"] = relations.names();
  j["step"] = s.step;
  j["rng"] = rng.str();
  j["running_loss"] = s.running_loss;
  j["best_metric"] = std::isfinite(s.best_metric) ? nlohmann::ordered_json(s.best_metric) : nlohmann::ordered_json();
  j["best_step"] = s.best_step;
  j["stale_evals"] = s.stale_evals;
  j["params"] = s.model.params();
  j["adam"] = {{"t", s.adam.t}, {"m", s.adam.m}, {"v", s.adam.v}};
  return j;
}

inline void save_checkpoint(const std::string& path, const TrainingConfig& cfg, const Vocabulary& entities,
                            const Vocabulary& relations, const TrainState& s) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp);
    os << checkpoint_json(cfg, entities, relations, s).dump() << '\n';
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != kCheckpointFormat) throw std::runtime_error(path + " is not a checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
  }
  const TrainingConfig cfg = training_config_from_json(j.at("config"));
  Vocabulary entities, relations;
  for (const auto& n : j.at("entities")) entities.intern(n.get<std::string>());
  for (const auto& n : j.at("relations")) relations.intern(n.get<std::string>());
  Model model(ModelConfig{entities.size(), relations.size(), cfg.dim, cfg.mode});
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != model.params().size()) throw std::runtime_error("checkpoint parameter count mismatch");
  model.params() = std::move(params);
  Checkpoint c{cfg, std::move(entities), std::move(relations), TrainState(std::move(model))};
  c.state.step = j.at("step");
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> c.state.rng;
  c.state.running_loss = j.at("running_loss");
  c.state.best_metric =
      j.at("best_metric").is_null() ? -std::numeric_limits<double>::infinity() : j.at("best_metric").get<double>();
  c.state.best_step = j.at("best_step");
  c.state.stale_evals = j.at("stale_evals");
  c.state.adam.t = j.at("adam").at("t");
  c.state.adam.m = j.at("adam").at("m").get<std::vector<double>>();
  c.state.adam.v = j.at("adam").at("v").get<std::vector<double>>();
  return c;
}

// ---- multi-seed summaries ---------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("mean_std needs at least two values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// Runs `run(seed)` for each seed and summarizes every reported metric.
inline std::map<std::string, MeanStd> multi_seed(std::span<const std::uint64_t> seeds,
                                                 const std::function<std::map<std::string, double>(std::uint64_t)>& run) {
  if (seeds.size() < 2) throw std::invalid_argument("multi_seed needs at least two seeds");
  std::map<std::string, std::vector<double>> values;
  for (std::uint64_t s : seeds) {
    for (const auto& [k, v] : run(s)) values[k].push_back(v);
  }
  std::map<std::string, MeanStd> out;
  for (const auto& [k, v] : values) {
    if (v.size() != seeds.size()) throw std::runtime_error("metric '" + k + "' missing for some seeds");
    out[k] = mean_std(v);
  }
  return out;
}

}  // namespace acone
