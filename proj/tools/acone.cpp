// acone: query generation, training, evaluation, pattern mining and axiom
// extraction for cone query embeddings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "acone/axiom_extract.hpp"
#include "acone/cone_algebra.hpp"
#include "acone/grad_check.hpp"
#include "acone/manifest.hpp"
#include "acone/pattern_miner.hpp"
#include "acone/pipeline.hpp"
#include "acone/planted.hpp"

namespace fs = std::filesystem;
using namespace acone;

namespace {

std::vector<std::string> g_argv;

void log_line(const std::string& s) { std::cerr << "[acone] " << s << '\n'; }

RunManifest start_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.argv = g_argv;
  m.started = utc_timestamp();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& path) {
  m.finished = utc_timestamp();
  write_manifest(path, m);
}

/// Manifest path for an output file: `<file>.manifest.json`.
fs::path manifest_for(const fs::path& output) { return output.string() + ".manifest.json"; }

// ---- training flags ---------------------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::string profile;
  std::string data;
  std::string out;
  bool deterministic = false;
  // key -> value as given on the command line; only keys actually passed are applied.
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app, bool with_out = true) {
    app->add_option("--config", config, "Settings file (key = value lines; [sections] ignored)")->check(CLI::ExistingFile);
    app->add_option("--profile", profile, "Built-in defaults: 'default' or 'toy' (d=32, b=64, n=16)");
    app->add_option("--data", data, "Dataset directory written by gen-queries");
    if (with_out) app->add_option("--out", out, "Output directory");
    struct Key {
      const char* name;
      const char* type;
      const char* help;
    };
    const Key keys[] = {
        {"d", "INT", "Embedding dimension"},
        {"b", "INT", "Batch size"},
        {"n", "INT", "Negative samples per query"},
        {"gamma", "FLOAT", "Loss margin"},
        {"lr", "FLOAT", "Adam learning rate"},
        {"lambda", "FLOAT", "Weight of the inside distance, in (0, 1)"},
        {"seed", "INT", "Random seed"},
        {"steps", "INT", "Maximum optimizer steps"},
        {"mode", "MODE", "Aperture mode: additive or multiplicative"},
        {"eval-every", "INT", "Validation interval in steps"},
        {"patience", "INT", "Evaluations without improvement before stopping"},
        {"log-every", "INT", "Loss logging interval in steps"},
        {"threads", "INT", "Gradient and evaluation shards"},
    };
    for (const Key& k : keys) {
      options[k.name] = app->add_option("--" + std::string(k.name), values[k.name], k.help)->type_name(k.type);
    }
    app->add_flag("--deterministic", deterministic, "Force single-shard reduction (overrides --threads)");
  }

  struct Resolved {
    TrainingConfig cfg;
    fs::path data;
    fs::path out;
  };

  /// Profile < config file < command line.
  Resolved resolve() const {
    std::vector<std::pair<std::string, std::string>> file;
    std::string file_profile, file_data, file_out;
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw std::runtime_error("cannot open config " + config);
      for (auto& [k, v] : parse_settings(in)) {
        if (k == "profile") {
          file_profile = v;
        } else if (k == "data") {
          file_data = v;
        } else if (k == "out") {
          file_out = v;
        } else {
          file.emplace_back(k, v);
        }
      }
    }
    Resolved r;
    r.cfg = profile_settings(profile.empty() ? file_profile : profile);
    for (const auto& [k, v] : file) apply_setting(r.cfg, k, v);
    for (const auto& [k, opt] : options) {
      if (opt->count()) apply_setting(r.cfg, underscore(k), values.at(k));
    }
    if (deterministic) r.cfg.threads = 1;
    validate(r.cfg);
    r.data = data.empty() ? file_data : data;
    r.out = out.empty() ? file_out : out;
    // Relative paths in a config file are taken relative to the file.
    if (data.empty() && !r.data.empty() && r.data.is_relative()) r.data = fs::path(config).parent_path() / r.data;
    if (out.empty() && !r.out.empty() && r.out.is_relative()) r.out = fs::path(config).parent_path() / r.out;
    if (r.data.empty()) throw std::runtime_error("no dataset: pass --data or set data in the config");
    return r;
  }

  static TrainingConfig profile_settings(const std::string& name) { return acone::profile(name); }
  static std::string underscore(std::string k) {
    for (char& c : k) c = c == '-' ? '_' : c;
    return k;
  }
};

// ---- subcommands ------------------------------------------------------------------------

int cmd_gen_planted(const std::string& out, std::size_t entities, double density, std::uint64_t seed) {
  RunManifest man = start_manifest("gen-planted");
  PlantedConfig pc;
  pc.entities = entities;
  pc.density = density;
  pc.seed = seed;
  const PlantedGraph g = make_planted_graph(pc);
  std::ostringstream tsv;
  write_triples(tsv, g.triples, g.entities, g.relations);
  const fs::path path = fs::path(out) / "kg.tsv";
  write_atomically(path, tsv.str());
  std::ostringstream truth;
  truth << "relation\toffset\n";
  for (const auto& r : pc.relations) truth << r.name << '\t' << r.offset << '\n';
  write_atomically(fs::path(out) / "offsets.tsv", truth.str());
  man.seed = seed;
  man.config = {{"entities", entities}, {"density", density}};
  man.outputs = {path.string(), (fs::path(out) / "offsets.tsv").string()};
  finish_manifest(man, fs::path(out) / "manifest.json");
  log_line("wrote " + std::to_string(g.triples.size()) + " triples to " + path.string());
  return 0;
}

int cmd_gen_queries(const std::string& triples, const std::string& out, GenerationConfig gc) {
  RunManifest man = start_manifest("gen-queries");
  man.add_input(triples);
  const TripleData td = read_triples(triples);
  const Dataset ds = generate_dataset(td.triples, td.entities.size(), td.relations.size(), gc);
  for (const auto& p : write_dataset(out, ds, td.entities, td.relations)) man.outputs.push_back(p.string());
  man.seed = gc.seed;
  man.config = {{"train_per_structure", gc.train_per_structure},
                {"eval_per_structure", gc.eval_per_structure},
                {"max_answers", gc.max_answers},
                {"all_train_1p", gc.all_train_1p},
                {"ratios", {gc.ratios.train, gc.ratios.valid, gc.ratios.test}}};
  finish_manifest(man, fs::path(out) / "manifest.json");
  for (const auto& [split, by] : ds.yield) {
    for (const auto& [s, y] : by) {
      if (y.generated < y.requested) {
        log_line(split + " " + s + ": generated " + std::to_string(y.generated) + " of " + std::to_string(y.requested));
      }
    }
  }
  log_line("train " + std::to_string(ds.train.size()) + ", valid " + std::to_string(ds.valid.size()) + ", test " +
           std::to_string(ds.test.size()) + " queries in " + out);
  return 0;
}

int cmd_train(const TrainFlags& flags) {
  const auto r = flags.resolve();
  if (r.out.empty()) throw std::runtime_error("no output directory: pass --out or set out in the config");
  RunManifest man = start_manifest("train");
  const DatasetFiles data = load_dataset(r.data);
  for (const char* f : {"entities.dict", "relations.dict", "train.jsonl", "valid.jsonl"}) {
    if (fs::exists(r.data / f)) man.add_input(r.data / f);
  }
  man.config = to_json(r.cfg);
  man.seed = r.cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainOutcome res = train_dataset(data, r.cfg, r.out, log_line);
  man.outputs = res.outputs;
  finish_manifest(man, r.out / "manifest.json");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof buf, "trained %llu steps in %.1f s; checkpoints in %s",
                static_cast<unsigned long long>(res.last.step), secs, r.out.string().c_str());
  log_line(buf);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& test, const std::string& out, const std::string& json,
             const std::string& labels, std::size_t threads) {
  RunManifest man = start_manifest("eval");
  man.add_input(ckpt);
  man.add_input(test);
  const Checkpoint c = load_checkpoint(ckpt);
  const auto queries = read_queries(test);
  if (queries.empty()) throw std::runtime_error(test + " holds no queries");
  const auto results = rank_queries_parallel(c.state.model, queries, c.config.lambda, threads);
  const EvaluationReport rep = summarize(results);
  write_table(std::cout, rep);
  std::printf("random baseline MRR %.4f\n", random_baseline_mrr(queries, c.entities.size()));
  man.config = to_json(c.config);
  man.seed = c.config.seed;
  if (!labels.empty()) {
    man.add_input(labels);
    std::ifstream in(labels);
    if (!in) throw std::runtime_error("cannot open " + labels);
    const auto classes = relation_classes(read_labels(in, c.relations));
    std::cout << '\n';
    write_subgroups(std::cout, subgroup_report(results, classes));
  }
  fs::path manifest_path;
  if (!out.empty()) {
    std::ostringstream os;
    write_tsv(os, rep);
    write_atomically(out, os.str());
    man.outputs.push_back(out);
    manifest_path = manifest_for(out);
  }
  if (!json.empty()) {
    write_atomically(json, to_json(rep).dump(2) + "\n");
    man.outputs.push_back(json);
    if (manifest_path.empty()) manifest_path = manifest_for(json);
  }
  if (!manifest_path.empty()) finish_manifest(man, manifest_path);
  return 0;
}

int cmd_mine(const std::string& triples, const std::string& out, MinerConfig mc) {
  RunManifest man = start_manifest("mine-patterns");
  man.add_input(triples);
  const TripleData td = read_triples(triples);
  const auto labels = mine_patterns(td.triples, td.relations.size(), mc);
  std::ostringstream os;
  write_labels(os, labels, td.relations);
  if (out.empty()) {
    std::cout << os.str();
    return 0;
  }
  write_atomically(out, os.str());
  man.config = {{"min_coverage", mc.min_coverage}, {"min_support", mc.min_support}};
  man.outputs = {out};
  finish_manifest(man, manifest_for(out));
  log_line(std::to_string(labels.size()) + " pattern labels written to " + out);
  return 0;
}

int cmd_extract(const std::string& ckpt, const std::string& out, ExtractConfig ec, const std::string& labels,
                bool dump) {
  RunManifest man = start_manifest("extract-axioms");
  man.add_input(ckpt);
  const Checkpoint c = load_checkpoint(ckpt);
  if (!labels.empty()) {
    man.add_input(labels);
    std::ifstream in(labels);
    if (!in) throw std::runtime_error("cannot open " + labels);
    ec.mined = read_labels(in, c.relations);
  }
  const RelationEmbeddings e = relation_embeddings(c.state.model);
  if (dump) {
    for (std::size_t r = 0; r < e.size(); ++r) {
      for (std::size_t k = 0; k < e.dim; ++k) {
        std::cerr << c.relations.name(r) << '[' << k << "] "
                  << format_multicone(Multicone{Cone::from_axis(e.axis[r][k], e.aperture[r][k])}) << '\n';
      }
    }
  }
  const auto axioms = extract_axioms(e, ec);
  std::ostringstream os;
  write_ontology(os, axioms, c.relations);
  std::cout << os.str();
  if (!out.empty()) {
    write_atomically(out, os.str());
    man.config = {{"tol", ec.tol}, {"frac", ec.frac}, {"top_n", ec.top_n}};
    man.outputs = {out};
    finish_manifest(man, manifest_for(out));
  }
  return 0;
}

int cmd_grad_check(std::size_t samples, std::size_t dim, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const GradCheckSummary s = run_grad_check(samples, dim, seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("instances %zu (d=%zu), skipped near kinks %zu\nmax relative error %.3e (seed %llu)\ntime %.1f s\n",
              s.instances, dim, s.rejected, s.max_relative_error, static_cast<unsigned long long>(s.worst_seed), secs);
  return s.max_relative_error < 1e-4 ? 0 : 1;
}

struct DatasetSize {
  const char* name;
  std::uint64_t entities;
  std::uint64_t relations;
};

// Query benchmark graphs; relation counts include inverse relations.
constexpr DatasetSize kDatasetSizes[] = {
    {"nell", 63361, 400},
    {"fb15k-237", 14505, 474},
    {"fb15k", 14951, 2690},
};

int cmd_param_count(std::string dataset, std::uint64_t entities, std::uint64_t relations, std::uint64_t dim,
                    bool no_net) {
  if (!dataset.empty()) {
    for (char& ch : dataset) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const DatasetSize* found = nullptr;
    for (const auto& d : kDatasetSizes) {
      if (dataset == d.name) found = &d;
    }
    if (!found) throw std::invalid_argument("unknown dataset '" + dataset + "' (nell, fb15k-237, fb15k)");
    entities = found->entities;
    relations = found->relations;
  }
  if (entities == 0 || relations == 0) throw std::invalid_argument("pass --dataset or both --entities and --relations");
  const ParamCount c = param_count(entities, relations, dim, !no_net);
  std::printf("entities   %14llu\nrelations  %14llu\nattention  %14llu\ndeepsets   %14llu\ntotal      %14llu\n",
              static_cast<unsigned long long>(c.entities), static_cast<unsigned long long>(c.relations),
              static_cast<unsigned long long>(c.attention), static_cast<unsigned long long>(c.deepsets),
              static_cast<unsigned long long>(c.total));
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    std::size_t used = 0;
    const auto v = std::stoull(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("bad seed '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

int cmd_multi_seed(const TrainFlags& flags, const std::string& seeds_arg) {
  const auto r = flags.resolve();
  const auto seeds = parse_seeds(seeds_arg);
  RunManifest man = start_manifest("multi-seed");
  const DatasetFiles data = load_dataset(r.data);
  if (data.test.empty()) throw std::runtime_error("multi-seed needs test.jsonl in " + r.data.string());
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl"}) {
    if (fs::exists(r.data / f)) man.add_input(r.data / f);
  }
  const auto stats = multi_seed(seeds, [&](std::uint64_t seed) {
    TrainingConfig cfg = r.cfg;
    cfg.seed = seed;
    log_line("seed " + std::to_string(seed));
    const TrainOutcome res = train_dataset(data, cfg, r.out.empty() ? fs::path() : r.out / ("seed" + std::to_string(seed)));
    const Model& m = res.best ? res.best->model : res.last.model;
    const EvaluationReport rep = summarize(rank_queries_parallel(m, data.test, cfg.lambda, cfg.threads));
    std::map<std::string, double> metrics{{"avg", rep.average_mrr}, {"avg_neg", rep.average_negation_mrr}};
    for (const auto& [s, row] : rep.per_structure) metrics[s] = row.mrr;
    return metrics;
  });
  std::ostringstream os;
  os << "metric\tmean\tstd\n";
  for (const auto& [k, v] : stats) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\n", k.c_str(), v.mean, v.std);
    os << buf;
  }
  std::cout << os.str();
  if (!r.out.empty()) {
    write_atomically(r.out / "multi_seed.tsv", os.str());
    man.config = to_json(r.cfg);
    man.config["seeds"] = seeds;
    man.outputs = {(r.out / "multi_seed.tsv").string()};
    finish_manifest(man, r.out / "manifest.json");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"Cone query embeddings: generate query datasets, train, evaluate and extract relation axioms."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::string planted_out;
  std::size_t planted_entities = 200;
  double planted_density = 0.7;
  std::uint64_t planted_seed = 1;
  auto* planted = app.add_subcommand("gen-planted", "Write the synthetic graph with planted relation patterns");
  planted->add_option("--out", planted_out, "Output directory")->required();
  planted->add_option("--entities", planted_entities, "Number of entities")->capture_default_str();
  planted->add_option("--density", planted_density, "Share of entities that source each relation")->capture_default_str();
  planted->add_option("--seed", planted_seed, "Random seed")->capture_default_str();

  std::string gq_triples, gq_out;
  GenerationConfig gc;
  auto* gq = app.add_subcommand("gen-queries", "Split a triple file and ground all query structures");
  gq->add_option("--triples", gq_triples, "Tab-separated head, relation, tail file")->required()->check(CLI::ExistingFile);
  gq->add_option("--out", gq_out, "Output directory")->required();
  gq->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gq->add_option("--train-per-structure", gc.train_per_structure, "Training queries per structure")->capture_default_str();
  gq->add_option("--eval-per-structure", gc.eval_per_structure, "Validation/test queries per structure")
      ->capture_default_str();
  gq->add_option("--max-answers", gc.max_answers, "Reject queries with more answers")->capture_default_str();
  gq->add_option("--train-ratio", gc.ratios.train, "Share of triples for training")->capture_default_str();
  gq->add_option("--valid-ratio", gc.ratios.valid, "Share of triples for validation")->capture_default_str();
  gq->add_option("--test-ratio", gc.ratios.test, "Share of triples for testing")->capture_default_str();

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train a model; writes last.ckpt, best.ckpt and metrics.tsv");
  train_flags.add(train);

  std::string ev_ckpt, ev_test, ev_out, ev_json, ev_labels;
  std::size_t ev_threads = 1;
  auto* ev = app.add_subcommand("eval", "Filtered MRR and Hits@k per query structure");
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--test", ev_test, "Query file (JSON lines)")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Also write the table as TSV");
  ev->add_option("--json", ev_json, "Also write the report as JSON");
  ev->add_option("--labels", ev_labels, "Pattern labels from mine-patterns; adds a subgroup table")
      ->check(CLI::ExistingFile);
  ev->add_option("--threads", ev_threads, "Evaluation shards")->capture_default_str()->check(CLI::PositiveNumber);

  std::string mine_triples, mine_out;
  MinerConfig mc;
  auto* mine = app.add_subcommand("mine-patterns", "Count relation patterns in a triple file");
  mine->add_option("--triples", mine_triples, "Tab-separated triple file")->required()->check(CLI::ExistingFile);
  mine->add_option("--out", mine_out, "Label file (TSV); stdout if omitted");
  mine->add_option("--min-coverage", mc.min_coverage, "Minimum coverage of a label")->capture_default_str();
  mine->add_option("--min-support", mc.min_support, "Minimum supporting pairs")->capture_default_str();

  std::string ex_ckpt, ex_out, ex_labels;
  ExtractConfig ec;
  bool ex_dump = false;
  auto* ex = app.add_subcommand("extract-axioms", "Read relation axioms off a checkpoint");
  ex->add_option("--ckpt", ex_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", ex_out, "Ontology file; printed to stdout either way");
  ex->add_option("--tol", ec.tol, "Angular tolerance in radians")->capture_default_str();
  ex->add_option("--frac", ec.frac, "Share of dimensions that must satisfy a condition")->capture_default_str();
  ex->add_option("--top-n", ec.top_n, "Composition candidates per relation pair")->capture_default_str();
  ex->add_option("--labels", ex_labels, "Mined labels whose composition triples are always tested")
      ->check(CLI::ExistingFile);
  ex->add_flag("--dump", ex_dump, "Print every relation dimension as a canonical multicone on stderr");

  std::size_t gc_samples = 20, gc_dim = 8;
  std::uint64_t gc_seed = 1;
  auto* gch = app.add_subcommand("grad-check", "Compare loss gradients with central differences");
  gch->add_option("--samples", gc_samples, "Random instances")->capture_default_str()->check(CLI::PositiveNumber);
  gch->add_option("--dim", gc_dim, "Embedding dimension")->capture_default_str()->check(CLI::PositiveNumber);
  gch->add_option("--seed", gc_seed, "First instance seed")->capture_default_str();

  std::string pc_dataset;
  std::uint64_t pc_entities = 0, pc_relations = 0, pc_dim = 800;
  bool pc_no_net = false;
  auto* pc = app.add_subcommand("param-count", "Trainable parameter count");
  pc->add_option("--dataset", pc_dataset, "Preset sizes: nell, fb15k-237, fb15k");
  pc->add_option("--entities", pc_entities, "Number of entities");
  pc->add_option("--relations", pc_relations, "Number of relations");
  pc->add_option("--dim", pc_dim, "Embedding dimension")->capture_default_str();
  pc->add_flag("--no-net", pc_no_net, "Exclude the intersection networks");

  TrainFlags ms_flags;
  std::string ms_seeds = "1,2,3";
  auto* ms = app.add_subcommand("multi-seed", "Train and test once per seed; report mean and std per metric");
  ms_flags.add(ms);
  ms->add_option("--seeds", ms_seeds, "Comma-separated seeds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*planted) return cmd_gen_planted(planted_out, planted_entities, planted_density, planted_seed);
    if (*gq) return cmd_gen_queries(gq_triples, gq_out, gc);
    if (*train) return cmd_train(train_flags);
    if (*ev) return cmd_eval(ev_ckpt, ev_test, ev_out, ev_json, ev_labels, ev_threads);
    if (*mine) return cmd_mine(mine_triples, mine_out, mc);
    if (*ex) return cmd_extract(ex_ckpt, ex_out, ec, ex_labels, ex_dump);
    if (*gch) return cmd_grad_check(gc_samples, gc_dim, gc_seed);
    if (*pc) return cmd_param_count(pc_dataset, pc_entities, pc_relations, pc_dim, pc_no_net);
    if (*ms) return cmd_multi_seed(ms_flags, ms_seeds);
  } catch (const std::exception& e) {
    std::cerr << "acone: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
