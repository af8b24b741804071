#include "medlink/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "medlink/chat_client.hpp"
#include "medlink/config.hpp"
#include "medlink/corpus.hpp"
#include "medlink/distillgen.hpp"
#include "medlink/embedstore.hpp"
#include "medlink/errors.hpp"
#include "medlink/evalharness.hpp"
#include "medlink/promptkit.hpp"
#include "medlink/response_cache.hpp"
#include "medlink/retriever.hpp"
#include "medlink/teacher.hpp"
#include "medlink/text_util.hpp"

namespace medlink::cli {

namespace {

namespace fs = std::filesystem;

// Values given on the command line; each one, when set, wins over the config file.
struct Overrides {
  std::optional<fs::path> config;
  std::optional<fs::path> kb, mentions, entity_embeddings, mention_embeddings, cache_dir, teacher_template,
      student_template, price_table;
  std::optional<std::string> format, split, metric, teacher, endpoint, filter, backend, model;
  std::optional<std::size_t> k, negatives, limit, parallelism, rate_limit, max_context, fewshot_from_train;
  std::optional<double> hard_ratio, temperature;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::size_t>> acc_ks;
  bool strict_gold = false;
  bool no_context = false;
  bool serial = false;

  // Outputs.
  std::optional<fs::path> out, report, audit, ledger, trace, text_input, dataset;
  std::vector<fs::path> ledgers;
};

PipelineConfig merged_config(const Overrides& o) {
  PipelineConfig c = o.config ? load_config(*o.config) : PipelineConfig{};
  auto set = [](auto& target, const auto& value) {
    if (value) target = *value;
  };
  set(c.paths.kb, o.kb);
  set(c.paths.mentions, o.mentions);
  set(c.paths.entity_embeddings, o.entity_embeddings);
  set(c.paths.mention_embeddings, o.mention_embeddings);
  set(c.paths.cache_dir, o.cache_dir);
  set(c.paths.teacher_template, o.teacher_template);
  set(c.paths.student_template, o.student_template);
  set(c.paths.price_table, o.price_table);
  set(c.mentions_format, o.format);
  set(c.retrieval.k, o.k);
  if (o.metric) c.retrieval.metric = parse_metric(*o.metric);
  set(c.retrieval.negatives, o.negatives);
  set(c.retrieval.hard_ratio, o.hard_ratio);
  set(c.retrieval.seed, o.seed);
  set(c.generation.teacher_model, o.teacher);
  set(c.generation.temperature, o.temperature);
  set(c.generation.limit, o.limit);
  if (o.filter) c.generation.filter = parse_filter_policy(*o.filter);
  set(c.generation.parallelism, o.parallelism);
  set(c.generation.rate_limit, o.rate_limit);
  set(c.generation.max_context_chars, o.max_context);
  set(c.generation.fewshot_from_train, o.fewshot_from_train);
  if (o.no_context) c.generation.include_context = false;
  set(c.eval.acc_ks, o.acc_ks);
  if (o.strict_gold) c.eval.strict_gold = true;

  if (c.retrieval.k == 0) throw Error(ErrorKind::config, "retrieval.k must be >= 1");
  if (c.generation.temperature < 0) throw Error(ErrorKind::config, "generation.temperature must be >= 0");
  if (!(c.retrieval.hard_ratio >= 0.0 && c.retrieval.hard_ratio <= 1.0)) {
    throw Error(ErrorKind::config, "retrieval.hard_ratio must be within [0, 1]");
  }
  if (c.generation.parallelism == 0) throw Error(ErrorKind::config, "generation.parallelism must be >= 1");
  for (auto k : c.eval.acc_ks) {
    if (k == 0) throw Error(ErrorKind::config, "eval.acc_ks entries must be >= 1");
  }
  return c;
}

// --- option registration -------------------------------------------------

const PipelineConfig kDefaults{};

void add_config(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON pipeline config; flags override its values");
}

void add_corpus(CLI::App* cmd, Overrides& o, const char* default_split) {
  cmd->add_option("--kb", o.kb, "Knowledge base TSV (id<TAB>name)  [paths.kb]");
  cmd->add_option("--mentions", o.mentions, "Mention file  [paths.mentions]");
  cmd->add_option("--format", o.format, "Mention format: normalized-tsv | ask-a-patient")
      ->default_str(kDefaults.mentions_format);
  cmd->add_option("--split", o.split, "Split tag: train | val | test")->default_str(default_split);
}

void add_embeddings(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--entity-embeddings", o.entity_embeddings, "Entity store manifest  [paths.entity_embeddings]");
  cmd->add_option("--mention-embeddings", o.mention_embeddings,
                  "Mention store manifest, rows keyed by mention uid  [paths.mention_embeddings]");
}

void add_retrieval(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--k", o.k, "Candidates retrieved per mention")->default_str(std::to_string(kDefaults.retrieval.k));
  cmd->add_option("--metric", o.metric, "Scoring: dot | cosine")->default_str(to_string(kDefaults.retrieval.metric));
}

void add_completion(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory  [paths.cache_dir]");
  cmd->add_option("--endpoint", o.endpoint, "Chat-completion base URL (remote/student backends)");
  cmd->add_option("--temperature", o.temperature, "Sampling temperature")
      ->default_str(std::to_string(static_cast<int>(kDefaults.generation.temperature)));
  cmd->add_option("--parallelism", o.parallelism, "Maximum in-flight requests")
      ->default_str(std::to_string(kDefaults.generation.parallelism));
  cmd->add_option("--rate-limit", o.rate_limit, "Requests per second, 0 = unlimited")
      ->default_str(std::to_string(kDefaults.generation.rate_limit));
  cmd->add_option("--max-context", o.max_context, "Context window in characters")
      ->default_str(std::to_string(kDefaults.generation.max_context_chars));
  cmd->add_flag("--no-context", o.no_context, "Leave mention context out of prompts");
  cmd->add_option("--ledger", o.ledger, "Write the usage ledger (JSON) here");
}

// --- shared loading ------------------------------------------------------

struct Loaded {
  std::unique_ptr<KnowledgeBase> kb;
  std::vector<Mention> mentions;
  std::unique_ptr<EmbeddingStore> entity_store;
  std::unique_ptr<EmbeddingStore> mention_store;
  std::unique_ptr<EntityIndex> index;

  LinkingContext context() const { return {*kb, *index, *mention_store}; }
};

Split split_of(const Overrides& o, Split fallback) { return o.split ? parse_split(*o.split) : fallback; }

std::vector<Mention> load_mentions_cfg(const PipelineConfig& c, Split split) {
  const auto path = require_path(c.paths.mentions, "paths.mentions (--mentions)");
  return load_mentions(path, parse_mention_format(c.mentions_format), split);
}

Loaded load_linking(const PipelineConfig& c, Split split, std::ostream& err) {
  // Check every path before reading anything so config errors surface first.
  const auto kb_path = require_path(c.paths.kb, "paths.kb (--kb)");
  const auto mentions_path = require_path(c.paths.mentions, "paths.mentions (--mentions)");
  const auto entity_path = require_path(c.paths.entity_embeddings, "paths.entity_embeddings (--entity-embeddings)");
  const auto mention_path =
      require_path(c.paths.mention_embeddings, "paths.mention_embeddings (--mention-embeddings)");
  (void)mentions_path;

  Loaded l;
  l.kb = std::make_unique<KnowledgeBase>(load_kb(kb_path));
  l.mentions = load_mentions_cfg(c, split);
  l.entity_store = std::make_unique<EmbeddingStore>(load_store(entity_path));
  l.mention_store = std::make_unique<EmbeddingStore>(load_store(mention_path));
  const auto alignment = validate_alignment(*l.entity_store, *l.kb);
  if (!alignment.orphans.empty()) {
    err << "warning: " << alignment.orphans.size() << " entity vectors have no KB entry\n";
  }
  l.index = std::make_unique<EntityIndex>(*l.kb, *l.entity_store);
  return l;
}

std::unique_ptr<CompletionBackend> make_backend(const std::string& spec, const std::string& endpoint,
                                                bool needs_key, RateLimiter* limiter) {
  if (spec.starts_with("mock:")) return std::make_unique<MockBackend>(parse_mock_kind(spec.substr(5)));
  if (spec != "remote" && spec != "student") {
    throw Error(ErrorKind::config, "unknown backend '" + spec + "' (expected mock:identity|mock:oracle|mock:reverse|remote|student)");
  }
  RemoteConfig rc;
  rc.base_url = endpoint;
  if (const char* key = std::getenv(kApiKeyEnv); key && *key) rc.api_key = key;
  if (needs_key && !rc.api_key) {
    throw Error(ErrorKind::config, std::string("remote backend needs an API key in $") + kApiKeyEnv);
  }
  return std::make_unique<RemoteChatBackend>(rc, SteadyClock::instance(), limiter);
}

// --- subcommands ---------------------------------------------------------

int run_ingest(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto c = merged_config(o);
  const auto kb = load_kb(require_path(c.paths.kb, "paths.kb (--kb)"));
  std::vector<Mention> mentions;
  if (c.paths.mentions) mentions = load_mentions_cfg(c, split_of(o, Split::train));

  auto report = check_mentions(mentions, kb);
  report.max_context_chars = c.generation.max_context_chars;
  for (const auto& m : mentions) {
    if (m.context && text::codepoint_length(*m.context) > c.generation.max_context_chars) ++report.contexts_windowed;
  }

  err << "ingest: " << report.kb_entities << " entities, " << report.mention_lines << " mention lines, "
      << report.accepted << " accepted, " << report.rejected.size() << " with unresolved gold ids\n";
  err << "ingest: contexts are windowed to " << report.max_context_chars << " characters ("
      << report.contexts_windowed << " affected)\n";
  for (const auto& r : report.rejected) err << "  line " << r.line << " (" << r.uid << "): " << r.reason << '\n';

  if (o.report) {
    nlohmann::ordered_json j;
    j["kb_entities"] = report.kb_entities;
    j["mention_lines"] = report.mention_lines;
    j["accepted"] = report.accepted;
    j["rejected"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rejected) j["rejected"].push_back({{"line", r.line}, {"uid", r.uid}, {"reason", r.reason}});
    j["context_unit"] = "characters";
    j["max_context_chars"] = report.max_context_chars;
    j["contexts_windowed"] = report.contexts_windowed;
    j["strict_gold"] = c.eval.strict_gold;
    text::write_file_atomic(*o.report, j.dump(2) + "\n");
  }
  if (o.out) {
    std::vector<Mention> windowed;
    windowed.reserve(mentions.size());
    for (const auto& m : mentions) windowed.push_back(prepare_mention(m, c.generation.max_context_chars, true));
    std::ostringstream buf;
    write_mentions(buf, windowed);
    text::write_file_atomic(*o.out, buf.str());
  }
  out << "accepted " << report.accepted << " of " << report.mention_lines << " mentions\n";
  if (!report.rejected.empty() && !c.eval.strict_gold) return kExitValidation;
  return kExitOk;
}

int run_import_embeddings(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto c = merged_config(o);
  const auto input = require_path(o.text_input, "--text");
  const auto manifest = require_path(o.out, "--out", false);
  const auto store = import_text(input);
  save_store(store, manifest);
  out << "wrote " << store.size() << " x " << store.dim() << " vectors to " << manifest.string() << '\n';
  if (c.paths.kb) {
    const auto kb = load_kb(require_path(c.paths.kb, "paths.kb (--kb)"));
    const auto alignment = validate_alignment(store, kb);
    for (const auto& id : alignment.orphans) err << "orphan vector (not in KB): " << id << '\n';
    for (const auto& id : alignment.missing) err << "KB entity without vector: " << id << '\n';
    if (!alignment.covers_kb()) return kExitValidation;
  }
  return kExitOk;
}

int run_retrieve(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto c = merged_config(o);
  const auto output = require_path(o.out, "--out", false);
  const auto l = load_linking(c, split_of(o, Split::test), err);
  require_mention_vectors(l.mentions, *l.mention_store);

  std::string buf;
  std::size_t labelled = 0;
  std::size_t retrieved = 0;
  for (const auto& m : l.mentions) {
    auto cs = l.index->top_k(l.mention_store->lookup(m.uid), c.retrieval.k, c.retrieval.metric, !o.serial);
    nlohmann::ordered_json j;
    j["uid"] = m.uid;
    j["gold_id"] = m.gold_id ? nlohmann::ordered_json(*m.gold_id) : nlohmann::ordered_json(nullptr);
    j["candidates"] = nlohmann::ordered_json::array();
    for (const auto& cand : cs.candidates) j["candidates"].push_back({{"id", cand.entity_id}, {"score", cand.score}});
    std::optional<std::size_t> rank;
    if (m.gold_id) {
      ++labelled;
      rank = cs.rank_of(*m.gold_id);
      if (rank) ++retrieved;
    }
    j["gold_rank"] = rank ? nlohmann::ordered_json(*rank) : nlohmann::ordered_json(nullptr);
    buf += j.dump() + "\n";
  }
  text::write_file_atomic(output, buf);
  out << "retrieved top-" << c.retrieval.k << " (" << to_string(c.retrieval.metric) << ") for " << l.mentions.size()
      << " mentions";
  if (labelled > 0) {
    out << "; recall@" << c.retrieval.k << " = " << retrieved << "/" << labelled;
  }
  out << '\n';
  return kExitOk;
}

int run_mine_negatives(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto c = merged_config(o);
  const auto output = require_path(o.out, "--out", false);
  const auto l = load_linking(c, split_of(o, Split::train), err);

  std::vector<TrainingPairInput> inputs;
  std::size_t skipped = 0;
  for (const auto& m : l.mentions) {
    if (!m.gold_id || !l.kb->contains(*m.gold_id)) {
      ++skipped;
      continue;
    }
    TrainingPairInput in;
    in.mention = &m;
    in.negatives = mine_negatives(*l.index, l.mention_store->lookup(m.uid), m.uid, *m.gold_id, c.retrieval.negatives,
                                  c.retrieval.hard_ratio, mention_seed(c.retrieval.seed, m.uid), c.retrieval.metric);
    inputs.push_back(std::move(in));
  }
  export_training_pairs(inputs, output);
  if (skipped) err << "skipped " << skipped << " mentions without a resolvable gold id\n";
  out << "wrote " << inputs.size() * (c.retrieval.negatives + 1) << " training pairs for " << inputs.size()
      << " mentions (" << hard_negative_count(c.retrieval.negatives, c.retrieval.hard_ratio) << " hard negatives each)\n";
  return kExitOk;
}

int run_generate(const Overrides& o, std::ostream& out, std::ostream& err) {
  auto c = merged_config(o);
  if (o.limit && *o.limit == 0) throw Error(ErrorKind::config, "--limit must be >= 1");
  if (c.generation.limit == 0) throw Error(ErrorKind::config, "generation.limit must be >= 1");
  if (o.endpoint) c.generation.endpoint = *o.endpoint;
  const auto dataset_path = require_path(o.out, "--out", false);
  const auto teacher_path = require_path(c.paths.teacher_template, "paths.teacher_template (--teacher-template)");
  const auto student_path = require_path(c.paths.student_template, "paths.student_template (--student-template)");
  const std::string backend_spec = o.backend.value_or("remote");

  auto teacher_template = load_template(teacher_path);
  const auto student_template = load_template(student_path);
  const auto l = load_linking(c, split_of(o, Split::train), err);
  if (c.generation.limit > l.mentions.size()) {
    throw Error(ErrorKind::config, "generation.limit " + std::to_string(c.generation.limit) + " exceeds the " +
                                       std::to_string(l.mentions.size()) + " mentions in the split");
  }

  if (c.generation.fewshot_from_train > 0) {
    // Examples come from mentions after the generation slice so no record
    // sees its own answer in the prompt.
    std::vector<Mention> pool;
    for (std::size_t i = c.generation.limit; i < l.mentions.size(); ++i) {
      const auto& m = l.mentions[i];
      if (!m.gold_id || !l.mention_store->contains(m.uid)) continue;
      pool.push_back(prepare_mention(m, c.generation.max_context_chars, c.generation.include_context));
    }
    std::vector<ExampleSource> sources;
    for (const auto& m : pool) {
      sources.push_back({&m, l.index->top_k(l.mention_store->lookup(m.uid), c.retrieval.k, c.retrieval.metric)});
    }
    teacher_template.examples =
        examples_from_train(teacher_template, sources, *l.kb, c.generation.fewshot_from_train, c.retrieval.seed);
    if (teacher_template.examples.size() < c.generation.fewshot_from_train) {
      err << "warning: only " << teacher_template.examples.size() << " few-shot examples available\n";
    }
  }

  std::unique_ptr<RateLimiter> limiter;
  if (c.generation.rate_limit > 0) limiter = std::make_unique<RateLimiter>(c.generation.rate_limit, SteadyClock::instance());
  auto backend = make_backend(backend_spec, c.generation.endpoint, backend_spec == "remote", limiter.get());
  std::unique_ptr<ResponseCache> cache;
  if (c.paths.cache_dir) cache = std::make_unique<ResponseCache>(*c.paths.cache_dir);
  UsageLedger ledger;

  GenerateOptions opts;
  opts.k = c.retrieval.k;
  opts.metric = c.retrieval.metric;
  opts.limit = c.generation.limit;
  opts.filter = c.generation.filter;
  opts.teacher_model = c.generation.teacher_model;
  opts.temperature = c.generation.temperature;
  opts.max_output = c.generation.max_output;
  opts.parallelism = c.generation.parallelism;
  opts.max_context_chars = c.generation.max_context_chars;
  opts.include_context = c.generation.include_context;

  const auto result = generate_dataset(l.mentions, l.context(), teacher_template, student_template, opts,
                                       CompletionServices{*backend, cache.get(), ledger});
  write_dataset(result.records, dataset_path);
  const auto audit_path = o.audit.value_or(fs::path(dataset_path.string() + ".audit.jsonl"));
  write_audit(result.audit, audit_path);
  if (o.ledger) ledger.save(*o.ledger);

  out << "processed " << result.processed << " mentions, emitted " << result.records.size() << " records, "
      << result.backend_failures << " backend failures\n";
  out << "gold in candidates: " << result.gold_in_candidates << "/" << result.processed << '\n';
  out << "backend calls: " << ledger.backend_calls() << ", cache hits: " << ledger.cache_hits() << '\n';
  out << "config sha256: " << config_digest(c) << '\n';
  if (cache && cache->conflicts() > 0) err << "warning: " << cache->conflicts() << " cache conflicts\n";
  return result.backend_failures > 0 ? kExitBackend : kExitOk;
}

int run_validate_dataset(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto path = require_path(o.dataset, "--dataset");
  const auto report = validate_dataset(path);
  for (const auto& d : report.diagnostics) {
    err << path.string() << ":" << d.line << ": " << (d.error ? "error" : "warning")
        << (d.uid.empty() ? "" : " [" + d.uid + "]") << ": " << d.message << '\n';
  }
  out << (report.pass() ? "PASS" : "FAIL") << ": " << report.records << " records, " << report.errors() << " errors, "
      << report.warnings() << " warnings\n";
  return report.pass() ? kExitOk : kExitValidation;
}

int run_evaluate(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto c = merged_config(o);
  const std::string backend_spec = o.backend.value_or("student");
  const auto template_path = require_path(c.paths.student_template, "paths.student_template (--template)");
  const auto student_template = load_template(template_path);
  const auto l = load_linking(c, split_of(o, Split::test), err);

  std::string endpoint = backend_spec == "student" ? c.eval.student_endpoint : c.generation.endpoint;
  if (o.endpoint) endpoint = *o.endpoint;
  std::string model = backend_spec == "student" ? c.eval.student_model : c.generation.teacher_model;
  if (o.model) model = *o.model;
  if (backend_spec.starts_with("mock:")) model = backend_spec;

  std::unique_ptr<RateLimiter> limiter;
  if (c.generation.rate_limit > 0) limiter = std::make_unique<RateLimiter>(c.generation.rate_limit, SteadyClock::instance());
  auto backend = make_backend(backend_spec, endpoint, backend_spec == "remote", limiter.get());
  std::unique_ptr<ResponseCache> cache;
  if (c.paths.cache_dir) cache = std::make_unique<ResponseCache>(*c.paths.cache_dir);
  UsageLedger ledger;

  EvalOptions opts;
  opts.k = c.retrieval.k;
  opts.metric = c.retrieval.metric;
  opts.acc_ks = c.eval.acc_ks;
  opts.strict_gold = c.eval.strict_gold;
  opts.model = model;
  opts.backend_label = backend->describe();
  opts.temperature = c.generation.temperature;
  opts.max_output = c.generation.max_output;
  opts.parallelism = c.generation.parallelism;
  opts.max_context_chars = c.generation.max_context_chars;
  opts.include_context = c.generation.include_context;
  opts.template_digest = template_digest(student_template);

  auto run = run_eval(l.mentions, l.context(), student_template, opts,
                      CompletionServices{*backend, cache.get(), ledger});
  run.report.config["config_sha256"] = config_digest(c);
  if (o.trace) {
    write_traces(run.traces, *o.trace);
    run.report.trace_path = o.trace->string();
  }
  if (o.report) text::write_file_atomic(*o.report, run.report.to_json());
  if (o.ledger) ledger.save(*o.ledger);
  out << run.report.to_table();
  if (run.report.n_failed > 0) {
    err << "error: " << run.report.n_failed << " mentions failed at the backend (scored as misses)\n";
    return kExitBackend;
  }
  return kExitOk;
}

int run_cost_report(const Overrides& o, std::ostream& out, std::ostream&) {
  const auto c = merged_config(o);
  if (o.ledgers.empty()) throw Error(ErrorKind::config, "missing required setting --ledger");
  std::map<std::string, ModelUsage> totals;
  for (const auto& path : o.ledgers) {
    if (!fs::exists(path)) throw Error(ErrorKind::config, "--ledger: no such file: " + path.string());
    for (const auto& [model, u] : UsageLedger::load_totals(path)) {
      auto& t = totals[model];
      t.calls += u.calls;
      t.backend_calls += u.backend_calls;
      t.remote_calls += u.remote_calls;
      t.mock_calls += u.mock_calls;
      t.cache_hits += u.cache_hits;
      t.prompt_tokens += u.prompt_tokens;
      t.completion_tokens += u.completion_tokens;
      t.seconds += u.seconds;
      if (u.reported_cost_usd) t.reported_cost_usd = t.reported_cost_usd.value_or(0.0) + *u.reported_cost_usd;
    }
  }
  PriceTable prices;
  if (c.paths.price_table) prices = load_price_table(require_path(c.paths.price_table, "paths.price_table (--prices)"));
  const auto report = cost_report(totals, prices);
  out << report.to_table();
  if (o.out) text::write_file_atomic(*o.out, report.to_json());
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::precondition:
      return kExitConfig;
    case ErrorKind::backend:
    case ErrorKind::auth:
      return kExitBackend;
    default:
      return kExitValidation;
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Biomedical entity linking: dense retrieval, teacher re-ranking, distillation data, evaluation",
               "medlink"};
  app.require_subcommand(1);
  Overrides o;
  int code = kExitOk;
  std::function<int()> action;

  auto* ingest = app.add_subcommand("ingest", "Load a knowledge base and mentions, report unresolved gold ids");
  add_config(ingest, o);
  add_corpus(ingest, o, "train");
  ingest->add_option("--max-context", o.max_context, "Context window in characters")
      ->default_str(std::to_string(kDefaults.generation.max_context_chars));
  ingest->add_option("--report", o.report, "Write the machine-readable ingest summary (JSON)");
  ingest->add_option("--out", o.out, "Write mentions as normalized TSV with windowed contexts");
  ingest->add_flag("--strict-gold", o.strict_gold, "Unresolved gold ids are excluded from metrics instead of failing");
  ingest->callback([&] { action = [&] { return run_ingest(o, out, err); }; });

  auto* import_cmd = app.add_subcommand("import-embeddings", "Convert id<TAB>f1 f2 ... text vectors to an EMB1 store");
  add_config(import_cmd, o);
  import_cmd->add_option("--text", o.text_input, "Text vectors")->required();
  import_cmd->add_option("--out", o.out, "Manifest path to write")->required();
  import_cmd->add_option("--kb", o.kb, "Check alignment against this knowledge base");
  import_cmd->callback([&] { action = [&] { return run_import_embeddings(o, out, err); }; });

  auto* retrieve = app.add_subcommand("retrieve", "Top-k candidates per mention (JSON lines)");
  add_config(retrieve, o);
  add_corpus(retrieve, o, "test");
  add_embeddings(retrieve, o);
  add_retrieval(retrieve, o);
  retrieve->add_option("--out", o.out, "Candidate sets output (JSON lines)")->required();
  retrieve->add_flag("--serial", o.serial, "Use the serial reference kernel");
  retrieve->callback([&] { action = [&] { return run_retrieve(o, out, err); }; });

  auto* mine = app.add_subcommand("mine-negatives", "Export positive / hard / random training pairs (TSV)");
  add_config(mine, o);
  add_corpus(mine, o, "train");
  add_embeddings(mine, o);
  mine->add_option("--metric", o.metric, "Scoring: dot | cosine")->default_str(to_string(kDefaults.retrieval.metric));
  mine->add_option("--negatives", o.negatives, "Negatives per mention")
      ->default_str(std::to_string(kDefaults.retrieval.negatives));
  mine->add_option("--hard-ratio", o.hard_ratio, "Fraction of negatives that are hard (rounded up)")->default_str("0.10");
  mine->add_option("--seed", o.seed, "Sampling seed")->default_str(std::to_string(kDefaults.retrieval.seed));
  mine->add_option("--out", o.out, "Training-pair TSV")->required();
  mine->callback([&] { action = [&] { return run_mine_negatives(o, out, err); }; });

  auto* generate = app.add_subcommand("generate", "Teacher re-ranking to an instruction-tuning dataset");
  add_config(generate, o);
  add_corpus(generate, o, "train");
  add_embeddings(generate, o);
  add_retrieval(generate, o);
  add_completion(generate, o);
  generate->add_option("--limit", o.limit, "Mentions to process, in file order")
      ->default_str(std::to_string(kDefaults.generation.limit));
  generate->add_option("--teacher", o.teacher, "Teacher model name")->default_str(kDefaults.generation.teacher_model);
  generate->add_option("--filter", o.filter, "keep-all | strict-clean | drop-unparseable-only")
      ->default_str(to_string(kDefaults.generation.filter));
  generate->add_option("--backend", o.backend, "remote | mock:identity | mock:oracle | mock:reverse")
      ->default_str("remote");
  generate->add_option("--teacher-template", o.teacher_template, "Teacher prompt template  [paths.teacher_template]");
  generate->add_option("--student-template", o.student_template, "Student instruction template  [paths.student_template]");
  generate->add_option("--fewshot-from-train", o.fewshot_from_train,
                       "Replace template examples with N examples sampled from the split")
      ->default_str("0");
  generate->add_option("--seed", o.seed, "Few-shot sampling seed")->default_str(std::to_string(kDefaults.retrieval.seed));
  generate->add_option("--out", o.out, "Dataset output (JSON lines)")->required();
  generate->add_option("--audit", o.audit, "Audit log (default: <out>.audit.jsonl)");
  generate->callback([&] { action = [&] { return run_generate(o, out, err); }; });

  auto* validate = app.add_subcommand("validate-dataset", "Check a generated dataset's records");
  validate->add_option("--dataset", o.dataset, "Dataset (JSON lines)")->required();
  validate->callback([&] { action = [&] { return run_validate_dataset(o, out, err); }; });

  auto* evaluate = app.add_subcommand("evaluate", "End-to-end linking with Acc@k and retrieval recall");
  add_config(evaluate, o);
  add_corpus(evaluate, o, "test");
  add_embeddings(evaluate, o);
  add_retrieval(evaluate, o);
  add_completion(evaluate, o);
  evaluate->add_option("--backend", o.backend, "student | remote | mock:identity | mock:oracle | mock:reverse")
      ->default_str("student");
  evaluate->add_option("--model", o.model, "Model name sent to the backend");
  evaluate->add_option("--template", o.student_template, "Student instruction template  [paths.student_template]");
  evaluate->add_option("--acc-k", o.acc_ks, "Acc@k cut-offs")->delimiter(',')->default_str("1,5");
  evaluate->add_flag("--strict-gold", o.strict_gold, "Skip mentions whose gold id is missing from the KB");
  evaluate->add_option("--report", o.report, "Machine-readable report (JSON)");
  evaluate->add_option("--trace", o.trace, "Per-mention trace (JSON lines)");
  evaluate->callback([&] { action = [&] { return run_evaluate(o, out, err); }; });

  auto* cost = app.add_subcommand("cost-report", "Cost per model from one or more usage ledgers");
  add_config(cost, o);
  cost->add_option("--ledger", o.ledgers, "Ledger JSON (repeatable)");
  cost->add_option("--prices", o.price_table, "Price table JSON  [paths.price_table]");
  cost->add_option("--out", o.out, "Machine-readable report (JSON)");
  cost->callback([&] { action = [&] { return run_cost_report(o, out, err); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    code = action ? action() : kExitConfig;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return code;
}

}  // namespace medlink::cli
