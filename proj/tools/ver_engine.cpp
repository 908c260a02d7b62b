// Copyright 2026 The ver-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ver-engine: generate, train, embed, index, query, evaluate, benchmark and
// verify from one binary.
//
// Exit codes: 0 ok, 1 usage, 2 validation failure, 3 runtime error. Errors go
// to stderr as one line of JSON.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ver/checkpoint.hpp"
#include "ver/eval.hpp"
#include "ver/gradcheck.hpp"
#include "ver/kb_store.hpp"
#include "ver/parallel.hpp"
#include "ver/retrieval.hpp"
#include "ver/synth.hpp"
#include "ver/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Raised for usage problems detected after CLI parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(json j, std::uint64_t seed) {
  j["seed"] = seed;
  std::cout << j.dump() << std::endl;
}

int fail(const std::string& kind, const std::string& message, int code) {
  json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << std::endl;
  return code;
}

std::vector<float> parse_floats(const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == ',' || c == '[' || c == ']' || c == ';') c = ' ';
  std::istringstream in(s);
  std::vector<float> out;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const float v = std::strtof(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw ver::FormatError("query vector: cannot parse \"" + tok + "\"");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ver::FormatError("query vector is empty");
  return out;
}

// Inline list, a file of numbers, or a QuerySet JSONL file.
ver::QuerySet load_query_arg(const std::string& arg) {
  if (fs::is_regular_file(arg)) {
    const std::string text = ver::read_text_file(arg);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return ver::read_query_set(arg);
    return {{"q0", parse_floats(text), "", ver::Split::kSeen}};
  }
  return {{"q0", parse_floats(arg), "", ver::Split::kSeen}};
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool dump_config = false;

  void add(CLI::App* app, bool with_config = true) {
    app->add_option("--seed", seed, "Random seed (echoed in every output)")->capture_default_str();
    app->add_option("--threads", threads,
                    "Worker threads (0: VER_ENGINE_THREADS, else all cores)")
        ->capture_default_str();
    if (with_config) {
      app->add_flag("--dump-config", dump_config, "Print the effective config and exit")
          ->configurable(false);
    }
  }
  std::size_t thread_count() const { return threads ? threads : ver::default_thread_count(); }
};

bool maybe_dump(const Common& c, const CLI::App* app) {
  if (!c.dump_config) return false;
  // Sectioned so the output loads back through the top-level --config.
  std::cout << "[" << app->get_name() << "]\n" << app->config_to_str(true, false);
  return true;
}

// ---------------------------------------------------------------- gen-synth

struct GenSynthArgs {
  Common common;
  std::string spec_path;
  std::string out;
  bool confusable = false;
};

int run_gen_synth(const GenSynthArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  ver::SynthSpec spec;
  if (!a.spec_path.empty()) {
    if (!fs::exists(a.spec_path)) throw ver::NotFoundError("spec not found: " + a.spec_path);
    spec = ver::SynthSpec::from_json(ver::read_text_file(a.spec_path));
  }
  if (app->count("--seed")) spec.seed = a.common.seed;
  if (a.confusable) spec.confusable_pairs = true;
  const ver::SyntheticKb kb = ver::gen_synthetic_kb(spec);
  fs::create_directories(a.out);
  const std::string store = (fs::path(a.out) / "store.wcft").string();
  ver::write_store(store, kb.dims, kb.bundles);
  ver::write_query_set((fs::path(a.out) / "train.jsonl").string(), kb.train);
  ver::write_query_set((fs::path(a.out) / "eval.jsonl").string(), kb.eval);
  ver::write_text_file((fs::path(a.out) / "spec.json").string(), spec.to_json());
  emit({{"command", "gen-synth"},
        {"store", store},
        {"entities", kb.bundles.size()},
        {"train_queries", kb.train.size()},
        {"eval_queries", kb.eval.size()}},
       spec.seed);
  return kExitOk;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string store, queries, out, log, val_queries;
  ver::TrainConfig tc;
  std::size_t layers = 2, heads = 16, ffn_dim = 0, max_tokens = 256;
  std::string mode = "full";
  bool no_cluster = false, fixed_temperature = false;
};

int run_train(TrainArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  if (a.store.empty() || a.queries.empty() || a.out.empty()) {
    throw UsageError("train needs --store, --queries and --out");
  }
  const ver::FeatureStore store = ver::FeatureStore::open(a.store);
  const ver::QuerySet queries = ver::read_query_set(a.queries);

  ver::AdaptorConfig ac;
  ac.dim = store.dims().dim;
  ac.text_dim = store.dims().text_dim;
  ac.layers = a.layers;
  ac.heads = a.heads;
  ac.ffn_dim = a.ffn_dim;
  ac.max_tokens = a.max_tokens;
  ac.mode = ver::adaptor_mode_from_string(a.mode);
  ac.validate();

  ver::TrainConfig tc = a.tc;
  tc.seed = a.common.seed;
  tc.threads = a.common.thread_count();
  tc.cluster_batches = !a.no_cluster;
  tc.learn_temperature = !a.fixed_temperature;
  tc.validate();

  const ver::TrainingCorpus<float> corpus =
      ver::build_training_corpus(store, queries, ac.max_tokens);
  ver::TrainState<float> state = ver::TrainState<float>::initial(ac, tc);

  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw ver::IngestionError("cannot open training log " + log_path);

  ver::TrainCallbacks cb;
  cb.on_step = [&](const ver::StepStats& s) {
    log << json{{"step", s.step},
                {"loss", s.loss},
                {"loss_without_substitution", s.loss_without_substitution},
                {"lr", s.lr},
                {"tau", s.temperature},
                {"replacement_rate", s.replacement_rate},
                {"replaced", s.replaced},
                {"intra_batch_similarity", s.intra_batch_similarity},
                {"batch_size", s.batch_size},
                {"seed", tc.seed}}
               .dump()
        << '\n';
  };
  if (!a.val_queries.empty()) {
    const ver::QuerySet val = ver::read_query_set(a.val_queries);
    cb.validate = [&, val](const ver::AdaptorParams<float>& p) {
      ver::EmbedOptions eo;
      eo.threads = tc.threads;
      const ver::EmbedReport emb = ver::embed_kb(store, p, eo);
      const double metric = ver::eval_retrieval(emb.index, val, {1}, tc.threads).top1_overall;
      log << json{{"eval_top1", metric}, {"step", state.optimizer.step}, {"seed", tc.seed}}.dump()
          << '\n';
      return metric;
    };
  }
  const ver::TrainReport report = ver::train(corpus, state, tc, cb);

  ver::save_checkpoint(a.out, ver::Checkpoint<float>{state.params, state.log_scale,
                                                    state.optimizer});
  json meta{{"batch_size", tc.batch_size},
            {"n_sync", tc.n_sync},
            {"lr", tc.lr},
            {"epochs", tc.epochs},
            {"cluster_batches", tc.cluster_batches},
            {"detach_synthetics", tc.detach_synthetics},
            {"learn_temperature", tc.learn_temperature},
            {"threads", tc.threads},
            {"steps", report.steps.size()},
            {"final_loss", report.steps.empty() ? 0.0 : report.steps.back().loss},
            {"tau", std::exp(-double(state.log_scale))},
            {"store", a.store},
            {"queries", a.queries}};
  if (report.best_step) meta["best_step"] = *report.best_step;
  ver::write_checkpoint_manifest(a.out + ".json", ac, tc.seed, meta.dump());
  json out{{"command", "train"},
           {"checkpoint", a.out},
           {"log", log_path},
           {"steps", report.steps.size()},
           {"skipped_samples", report.skipped_samples},
           {"final_loss", meta["final_loss"]},
           {"stopped_early", report.stopped_early}};
  if (report.best_step) out["best_step"] = *report.best_step;
  emit(out, tc.seed);
  return kExitOk;
}

// ----------------------------------------------------------------- embed-kb

struct EmbedArgs {
  Common common;
  std::string store, ckpt, out, resume;
  bool primary_only = false;
};

int run_embed(const EmbedArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  const ver::FeatureStore store = ver::FeatureStore::open(a.store);
  if (!fs::exists(a.ckpt)) throw ver::NotFoundError("checkpoint not found: " + a.ckpt);
  const auto ckpt = ver::load_checkpoint<float>(a.ckpt);

  ver::EntityIndex index(ckpt.params.config.dim);
  ver::EmbedOptions eo;
  eo.threads = a.common.thread_count();
  eo.all_images = !a.primary_only;
  if (!a.resume.empty() && fs::exists(a.resume)) {
    // Continue after the last complete entity of a partial shard.
    index = ver::load_index(a.resume);
    index.set_ivf(std::nullopt);
    std::size_t next = 0;
    while (next < store.size() && index.entity_ordinal(store.entity_id(next))) ++next;
    eo.begin = next;
  }
  eo.progress = [](std::size_t done, std::size_t total) {
    if (done == total || done % 1000 == 0) {
      std::cerr << json{{"progress", done}, {"total", total}}.dump() << std::endl;
    }
  };
  const ver::EmbedReport rep = ver::embed_kb(store, ckpt.params, eo);
  index.append(rep.index);
  ver::save_index(a.out, index);
  for (const auto& id : rep.skipped) {
    std::cerr << json{{"warning", "degenerate entity skipped"}, {"entity_id", id}}.dump()
              << std::endl;
  }
  emit({{"command", "embed-kb"},
        {"index", a.out},
        {"rows", index.rows()},
        {"entities", index.entity_count()},
        {"embedded", rep.embedded},
        {"skipped", rep.skipped},
        {"resumed_from", eo.begin}},
       a.common.seed);
  return kExitOk;
}

// -------------------------------------------------------------------- index

struct IndexArgs {
  Common common;
  std::string in, out, mode = "exact";
  std::size_t n_lists = 0, n_probe = 0;
};

int run_index(const IndexArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  ver::EntityIndex index = ver::load_index(a.in);
  if (a.mode == "exact") {
    index.set_ivf(std::nullopt);
  } else if (a.mode == "ivf") {
    const std::size_t lists =
        a.n_lists ? a.n_lists
                  : std::max<std::size_t>(1, std::size_t(std::sqrt(double(index.rows()))));
    const std::size_t probe = a.n_probe ? a.n_probe : std::max<std::size_t>(1, lists / 8);
    ver::build_ivf(index, lists, a.common.seed, probe, a.common.thread_count());
  } else {
    throw UsageError("--mode must be exact or ivf");
  }
  ver::save_index(a.out, index);
  json j{{"command", "index"}, {"index", a.out}, {"mode", a.mode}, {"rows", index.rows()}};
  if (index.ivf()) {
    j["n_lists"] = index.ivf()->n_lists();
    j["n_probe"] = index.ivf()->n_probe;
  }
  emit(j, a.common.seed);
  return kExitOk;
}

// -------------------------------------------------------------------- query

struct QueryArgs {
  Common common;
  std::string index, query_vec;
  std::size_t k = 10, n_probe = 0;
  bool exact = false;
};

int run_query(const QueryArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  const ver::EntityIndex index = ver::load_index(a.index);
  ver::QueryOptions qo;
  qo.k = a.k;
  qo.force_exact = a.exact;
  qo.threads = a.common.thread_count();
  if (a.n_probe) qo.n_probe = a.n_probe;
  for (const auto& q : load_query_arg(a.query_vec)) {
    const ver::RetrievalResult r = ver::query(index, q.vector, qo);
    json j = json::parse(r.to_json());
    j["command"] = "query";
    j["query_id"] = q.query_id;
    emit(j, a.common.seed);
  }
  return kExitOk;
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string index, queries;
  std::vector<std::size_t> ks = ver::kDefaultRecallKs;
};

int run_eval(const EvalArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  const ver::EntityIndex index = ver::load_index(a.index);
  const ver::QuerySet queries = ver::read_query_set(a.queries);
  const ver::EvalReport rep = ver::eval_retrieval(index, queries, a.ks, a.common.thread_count());
  json j = json::parse(rep.to_json());
  j["command"] = "eval";
  emit(j, a.common.seed);
  return kExitOk;
}

// -------------------------------------------------------------------- bench

struct BenchArgs {
  Common common;
  std::string index, queries;
  std::size_t reps = 10, k = 10, n_probe = 0;
};

int run_bench(const BenchArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  const ver::EntityIndex index = ver::load_index(a.index);
  std::vector<ver::Vector<float>> vecs;
  for (const auto& q : load_query_arg(a.queries)) vecs.push_back(q.vector);
  ver::QueryOptions qo;
  qo.k = a.k;
  qo.threads = a.common.thread_count();
  if (a.n_probe) qo.n_probe = a.n_probe;
  const ver::LatencyStats s = ver::bench_query(index, vecs, a.reps, qo);
  json j = json::parse(s.to_json());
  j["command"] = "bench";
  j["rows"] = index.rows();
  emit(j, a.common.seed);
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  Common common;
  std::string dims = "small";
  double tolerance = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  if (a.dims != "small") throw UsageError("--dims supports only \"small\"");
  ver::GradcheckConfig gc;
  gc.seed = a.common.seed;
  gc.tolerance = a.tolerance;
  const ver::GradcheckReport rep = ver::run_gradcheck(gc);
  json j = json::parse(rep.to_json());
  j["command"] = "gradcheck";
  emit(j, a.common.seed);
  return rep.passed ? kExitOk : kExitValidation;
}

// ----------------------------------------------------------------- validate

struct ValidateArgs {
  Common common;
  std::string store, index;
};

int run_validate(const ValidateArgs& a) {
  if (a.store.empty() == a.index.empty()) throw UsageError("give exactly one of --store, --index");
  const ver::ValidationReport rep =
      a.store.empty() ? ver::validate_index(a.index) : ver::validate_store(a.store);
  json j = json::parse(rep.to_json());
  j["command"] = "validate";
  emit(j, a.common.seed);
  return rep.ok() ? kExitOk : kExitValidation;
}

// ------------------------------------------------------------------- ablate

struct AblateArgs {
  Common common;
  std::string spec_path;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  ver::TrainConfig tc;
  std::size_t heads = 4, layers = 2, max_tokens = 256;
  bool confusable = false;
};

int run_ablate(AblateArgs& a, CLI::App* app) {
  if (maybe_dump(a.common, app)) return kExitOk;
  ver::SynthSpec spec;
  if (!a.spec_path.empty()) spec = ver::SynthSpec::from_json(ver::read_text_file(a.spec_path));
  if (a.confusable) spec.confusable_pairs = true;
  for (std::uint64_t seed : a.seeds) {
    spec.seed = seed;
    const ver::SyntheticKb kb = ver::gen_synthetic_kb(spec);
    ver::AblationSettings st;
    st.adaptor.dim = spec.dim;
    st.adaptor.text_dim = spec.text_dim;
    st.adaptor.heads = a.heads;
    st.adaptor.layers = a.layers;
    st.adaptor.max_tokens = a.max_tokens;
    st.train = a.tc;
    st.train.seed = seed;
    st.train.threads = a.common.thread_count();
    st.train.validate();
    const auto rows = ver::ablation_run(kb, st, ver::default_ablation_configs());
    std::cerr << "seed " << seed << "\n" << ver::format_ablation_table(rows);
    emit({{"command", "ablate"}, {"rows", json::parse(ver::ablation_to_json(rows))}}, seed);
  }
  return kExitOk;
}

void add_train_options(CLI::App* app, ver::TrainConfig& tc) {
  app->add_option("--batch-size", tc.batch_size, "Minibatch size B")->capture_default_str();
  app->add_option("--n-sync", tc.n_sync, "Synthetic negatives per query")->capture_default_str();
  app->add_option("--lr", tc.lr, "Peak learning rate (cosine decay)")->capture_default_str();
  app->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
  app->add_flag("--detach-synthetics", tc.detach_synthetics,
                "Stop gradients through synthetic negatives");
  app->add_option("--init-temperature", tc.init_temperature)->capture_default_str();
  app->add_option("--min-temperature", tc.min_temperature)->capture_default_str();
}

int dispatch(int argc, char** argv) {
  CLI::App app{"ver-engine: knowledge-aware visual entity retrieval"};
  app.require_subcommand(1);
  // Read by the top-level app; fallthrough lets it follow the subcommand.
  app.set_config("--config", "", "TOML/INI config file with a [<subcommand>] section; flags override it");
  app.allow_config_extras(false);
  app.fallthrough();
  app.set_version_flag("--version", "ver-engine 0.1.0");

  GenSynthArgs gs;
  auto* c_gen = app.add_subcommand("gen-synth", "Generate a synthetic planted-signal KB");
  gs.common.add(c_gen);
  c_gen->add_option("--spec", gs.spec_path, "SynthSpec JSON file");
  c_gen->add_option("--out", gs.out, "Output directory")->required();
  c_gen->add_flag("--confusable", gs.confusable, "Confusable-pairs mode");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the adaptor");
  tr.common.add(c_train);
  c_train->add_option("--store", tr.store, "Feature store (file or directory)");
  c_train->add_option("--queries", tr.queries, "Training QuerySet (JSONL)");
  c_train->add_option("--out", tr.out, "Output checkpoint path");
  c_train->add_option("--log", tr.log, "Training log (default <out>.log.jsonl)");
  c_train->add_option("--val-queries", tr.val_queries, "Held-out QuerySet for early stopping");
  c_train->add_option("--eval-every", tr.tc.eval_every, "Evaluate every N steps (0 = off)")
      ->capture_default_str();
  c_train->add_option("--patience", tr.tc.patience, "Evaluations without improvement before stopping")
      ->capture_default_str();
  add_train_options(c_train, tr.tc);
  c_train->add_flag("--no-cluster", tr.no_cluster, "Uniform random batches");
  c_train->add_flag("--fixed-temperature", tr.fixed_temperature, "Do not learn the temperature");
  c_train->add_option("--layers", tr.layers)->capture_default_str();
  c_train->add_option("--heads", tr.heads)->capture_default_str();
  c_train->add_option("--ffn-dim", tr.ffn_dim, "FFN width (0 = 4D)")->capture_default_str();
  c_train->add_option("--max-tokens", tr.max_tokens, "Description truncation N_t")
      ->capture_default_str();
  c_train->add_option("--mode", tr.mode, "full | image_only | text_only")
      ->check(CLI::IsMember({"full", "image_only", "text_only"}))
      ->capture_default_str();

  EmbedArgs em;
  auto* c_embed = app.add_subcommand("embed-kb", "Embed every entity image into a WCIX shard");
  em.common.add(c_embed);
  c_embed->add_option("--store", em.store, "Feature store")->required();
  c_embed->add_option("--ckpt", em.ckpt, "Checkpoint")->required();
  c_embed->add_option("--out", em.out, "Output WCIX path")->required();
  c_embed->add_option("--resume", em.resume, "Partial shard to continue from");
  c_embed->add_flag("--primary-only", em.primary_only, "Embed only image 0 of each entity");

  IndexArgs ix;
  auto* c_index = app.add_subcommand("index", "Rebuild an index as exact or IVF");
  ix.common.add(c_index);
  c_index->add_option("--in", ix.in, "Input WCIX")->required();
  c_index->add_option("--out", ix.out, "Output WCIX")->required();
  c_index->add_option("--mode", ix.mode, "exact | ivf")
      ->check(CLI::IsMember({"exact", "ivf"}))
      ->capture_default_str();
  c_index->add_option("--n-lists", ix.n_lists, "IVF lists (default sqrt(rows))");
  c_index->add_option("--n-probe", ix.n_probe, "Lists probed per query (default n_lists/8)");

  QueryArgs qa;
  auto* c_query = app.add_subcommand("query", "Top-k entities for query vectors");
  qa.common.add(c_query);
  c_query->add_option("--index", qa.index, "WCIX index")->required();
  c_query->add_option("--query-vec", qa.query_vec,
                      "Inline numbers, a file of numbers, or a QuerySet JSONL")
      ->required();
  c_query->add_option("--k", qa.k, "Results per query")->capture_default_str();
  c_query->add_option("--n-probe", qa.n_probe, "Override IVF probes");
  c_query->add_flag("--exact", qa.exact, "Scan all rows even on an IVF index");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Seen/unseen top-1, HM and recall@K");
  ev.common.add(c_eval);
  c_eval->add_option("--index", ev.index, "WCIX index")->required();
  c_eval->add_option("--queries", ev.queries, "QuerySet JSONL")->required();
  c_eval->add_option("--ks", ev.ks, "Recall cut-offs")->delimiter(',')->capture_default_str();

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Query latency and throughput");
  be.common.add(c_bench);
  c_bench->add_option("--index", be.index, "WCIX index")->required();
  c_bench->add_option("--queries", be.queries, "QuerySet JSONL or vector file")->required();
  c_bench->add_option("--reps", be.reps, "Passes over the query set")->capture_default_str();
  c_bench->add_option("--k", be.k)->capture_default_str();
  c_bench->add_option("--n-probe", be.n_probe, "Override IVF probes");

  GradcheckArgs gc;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc.common.add(c_grad);
  c_grad->add_option("--dims", gc.dims, "Problem size (small)")->capture_default_str();
  c_grad->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();

  ValidateArgs va;
  auto* c_val = app.add_subcommand("validate", "Check a WCFT store or WCIX index");
  va.common.add(c_val, false);
  c_val->add_option("--store", va.store, "Feature store");
  c_val->add_option("--index", va.index, "WCIX index");

  AblateArgs ab;
  auto* c_abl = app.add_subcommand("ablate", "Modality and training-strategy ablation table");
  ab.common.add(c_abl);
  c_abl->add_option("--spec", ab.spec_path, "SynthSpec JSON file");
  c_abl->add_option("--seeds", ab.seeds, "Seeds")->delimiter(',')->capture_default_str();
  c_abl->add_flag("--confusable", ab.confusable, "Confusable-pairs mode");
  add_train_options(c_abl, ab.tc);
  c_abl->add_option("--heads", ab.heads)->capture_default_str();
  c_abl->add_option("--layers", ab.layers)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  if (c_gen->parsed()) return run_gen_synth(gs, c_gen);
  if (c_train->parsed()) return run_train(tr, c_train);
  if (c_embed->parsed()) return run_embed(em, c_embed);
  if (c_index->parsed()) return run_index(ix, c_index);
  if (c_query->parsed()) return run_query(qa, c_query);
  if (c_eval->parsed()) return run_eval(ev, c_eval);
  if (c_bench->parsed()) return run_bench(be, c_bench);
  if (c_grad->parsed()) return run_gradcheck(gc, c_grad);
  if (c_val->parsed()) return run_validate(va);
  if (c_abl->parsed()) return run_ablate(ab, c_abl);
  return fail("usage", "no subcommand", kExitUsage);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    return fail("usage", e.what(), kExitUsage);
  } catch (const ver::ConfigError& e) {
    return fail(e.kind(), e.what(), kExitUsage);
  } catch (const ver::InternalError& e) {
    return fail(e.kind(), e.what(), kExitRuntime);
  } catch (const ver::NumericalError& e) {
    return fail(e.kind(), e.what(), kExitRuntime);
  } catch (const ver::Error& e) {
    return fail(e.kind(), e.what(), kExitValidation);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), kExitRuntime);
  }
}
