#include "medlink/distillgen.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"
#include "medlink/worker_pool.hpp"

namespace medlink {

CompletionResponse CompletionServices::complete(const CompletionRequest& request) const {
  if (cache) return cached_complete(*cache, backend, request, ledger);
  return medlink::complete(backend, request, ledger);
}

Mention prepare_mention(const Mention& m, std::size_t max_context_chars, bool include_context) {
  Mention out = m;
  if (!include_context) {
    out.context.reset();
  } else if (out.context) {
    out.context = window_context(*out.context, out.surface, max_context_chars);
  }
  return out;
}

void require_mention_vectors(const std::vector<Mention>& mentions, const EmbeddingStore& store) {
  std::vector<std::string> missing;
  for (const auto& m : mentions) {
    if (!store.contains(m.uid)) missing.push_back(m.uid);
  }
  if (missing.empty()) return;
  std::string listed;
  for (std::size_t i = 0; i < missing.size() && i < 5; ++i) listed += (i ? ", " : "") + missing[i];
  if (missing.size() > 5) listed += ", ...";
  throw Error(ErrorKind::validation,
              std::to_string(missing.size()) + " mentions lack embeddings: " + listed);
}

FilterPolicy parse_filter_policy(std::string_view s) {
  if (s == "keep-all") return FilterPolicy::keep_all;
  if (s == "strict-clean") return FilterPolicy::strict_clean;
  if (s == "drop-unparseable-only") return FilterPolicy::drop_unparseable_only;
  throw Error(ErrorKind::config, "unknown filter policy '" + std::string(s) +
                                     "' (expected keep-all|strict-clean|drop-unparseable-only)");
}

const char* to_string(FilterPolicy policy) {
  switch (policy) {
    case FilterPolicy::keep_all: return "keep-all";
    case FilterPolicy::strict_clean: return "strict-clean";
    case FilterPolicy::drop_unparseable_only: return "drop-unparseable-only";
  }
  return "drop-unparseable-only";
}

std::string DistillRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["instruction"] = instruction;
  j["output"] = output;
  j["meta"] = {{"mention_uid", meta.mention_uid},     {"candidate_ids", meta.candidate_ids},
               {"ranked_ids", meta.ranked_ids},       {"clean", meta.clean},
               {"gold_in_candidates", meta.gold_in_candidates}, {"teacher_model", meta.teacher_model}};
  return j.dump();
}

std::string AuditEntry::to_json_line() const {
  nlohmann::ordered_json j;
  j["uid"] = uid;
  j["outcome"] = outcome;
  j["repairs"] = nlohmann::ordered_json::array();
  for (auto r : repairs) j["repairs"].push_back(to_string(r));
  j["gold_in_candidates"] = gold_in_candidates;
  if (!note.empty()) j["note"] = note;
  return j.dump();
}

namespace {

struct MentionOutcome {
  std::optional<DistillRecord> record;
  AuditEntry audit;
  bool backend_failed = false;
};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

MentionOutcome process_mention(const Mention& raw, const LinkingContext& ctx,
                               const PromptTemplate& teacher_template,
                               const PromptTemplate& student_template, const GenerateOptions& options,
                               const CompletionServices& services) {
  MentionOutcome out;
  out.audit.uid = raw.uid;
  const Mention mention = prepare_mention(raw, options.max_context_chars, options.include_context);

  auto candidates = ctx.index.top_k(ctx.mention_vectors.lookup(mention.uid), options.k, options.metric);
  candidates.mention_uid = mention.uid;
  const auto candidate_ids = candidates.ids();
  const bool gold_in = mention.gold_id && candidates.contains(*mention.gold_id);
  out.audit.gold_in_candidates = gold_in;

  const auto teacher_prompt = render_teacher(teacher_template, mention, candidates, ctx.kb);
  const auto student_prompt = render_student(student_template, mention, candidates, ctx.kb);

  CompletionRequest request;
  request.model = options.teacher_model;
  request.prompt_text = teacher_prompt.text;
  request.temperature = options.temperature;
  request.max_output = options.max_output;
  if (gold_in) request.gold_label = teacher_prompt.candidate_labels[*candidates.rank_of(*mention.gold_id) - 1];

  CompletionResponse response;
  try {
    response = services.complete(request);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::backend && e.kind() != ErrorKind::auth) throw;
    out.audit.outcome = "failed:backend";
    out.audit.note = e.what();
    out.backend_failed = true;
    return out;
  }

  RankedList ranked;
  try {
    ranked = parse_ranked(response.text, teacher_prompt.candidate_labels, candidate_ids, mention.uid);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::unparseable) throw;
    if (options.filter != FilterPolicy::keep_all) {
      out.audit.outcome = "filtered:unparseable";
      return out;
    }
    ranked.mention_uid = mention.uid;
    ranked.order = candidate_ids;
    ranked.clean = false;
    out.audit.note = "unparseable output; retrieval order kept";
  }
  out.audit.repairs = ranked.repairs;
  if (options.filter == FilterPolicy::strict_clean && !ranked.clean) {
    out.audit.outcome = "filtered:not_clean";
    return out;
  }

  std::map<std::string, std::string> label_of;
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) label_of[candidate_ids[i]] = teacher_prompt.candidate_labels[i];
  std::vector<std::string> ranked_labels;
  for (const auto& id : ranked.order) ranked_labels.push_back(label_of.at(id));

  DistillRecord record;
  record.instruction = student_prompt.text;
  record.output = join_lines(ranked_labels);
  record.meta = {mention.uid, candidate_ids, ranked.order, ranked.clean, gold_in, options.teacher_model};
  out.record = std::move(record);
  out.audit.outcome = "emitted";
  return out;
}

}  // namespace

GenerateResult generate_dataset(const std::vector<Mention>& mentions, const LinkingContext& ctx,
                                const PromptTemplate& teacher_template,
                                const PromptTemplate& student_template, const GenerateOptions& options,
                                const CompletionServices& services) {
  if (options.limit == 0) throw Error(ErrorKind::precondition, "limit must be >= 1");
  if (options.limit > mentions.size()) {
    throw Error(ErrorKind::precondition, "limit " + std::to_string(options.limit) + " exceeds the " +
                                             std::to_string(mentions.size()) + " available mentions");
  }
  const std::vector<Mention> selected(mentions.begin(),
                                      mentions.begin() + static_cast<std::ptrdiff_t>(options.limit));
  require_mention_vectors(selected, ctx.mention_vectors);

  std::vector<MentionOutcome> outcomes(selected.size());
  parallel_for_each_index(selected.size(), options.parallelism, [&](std::size_t i) {
    outcomes[i] = process_mention(selected[i], ctx, teacher_template, student_template, options, services);
  });

  GenerateResult result;
  result.processed = outcomes.size();
  for (auto& o : outcomes) {
    if (o.backend_failed) ++result.backend_failures;
    if (o.audit.gold_in_candidates) ++result.gold_in_candidates;
    if (o.record) result.records.push_back(std::move(*o.record));
    result.audit.push_back(std::move(o.audit));
  }
  return result;
}

void write_dataset(const std::vector<DistillRecord>& records, const std::filesystem::path& path) {
  std::string buf;
  for (const auto& r : records) buf += r.to_json_line() + "\n";
  text::write_file_atomic(path, buf);
}

void write_audit(const std::vector<AuditEntry>& audit, const std::filesystem::path& path) {
  std::string buf;
  for (const auto& a : audit) buf += a.to_json_line() + "\n";
  text::write_file_atomic(path, buf);
}

bool DatasetReport::pass() const { return errors() == 0; }

std::size_t DatasetReport::errors() const {
  return static_cast<std::size_t>(
      std::count_if(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) { return d.error; }));
}

std::size_t DatasetReport::warnings() const { return diagnostics.size() - errors(); }

namespace {

bool is_permutation_of(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b && std::adjacent_find(a.begin(), a.end()) == a.end();
}

}  // namespace

DatasetReport validate_dataset_text(std::string_view contents) {
  DatasetReport report;
  std::map<std::string, std::size_t> first_line_of;
  std::size_t line_no = 0;
  for (auto line : text::split(contents, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    ++report.records;
    auto fail = [&](const std::string& uid, const std::string& msg) {
      report.diagnostics.push_back({line_no, uid, true, msg});
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("", std::string("not a JSON object: ") + e.what());
      continue;
    }
    std::string uid;
    std::string instruction;
    std::string output;
    std::vector<std::string> candidate_ids;
    std::vector<std::string> ranked_ids;
    try {
      instruction = j.at("instruction").get<std::string>();
      output = j.at("output").get<std::string>();
      const auto& meta = j.at("meta");
      uid = meta.at("mention_uid").get<std::string>();
      candidate_ids = meta.at("candidate_ids").get<std::vector<std::string>>();
      ranked_ids = meta.at("ranked_ids").get<std::vector<std::string>>();
      (void)meta.at("clean").get<bool>();
      (void)meta.at("gold_in_candidates").get<bool>();
      (void)meta.at("teacher_model").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(uid, std::string("schema: ") + e.what());
      continue;
    }

    const auto [it, inserted] = first_line_of.emplace(uid, line_no);
    if (!inserted) {
      report.diagnostics.push_back({line_no, uid, false,
                                    "duplicate mention_uid (first at line " + std::to_string(it->second) + ")"});
    }

    const auto labels = last_numbered_list(instruction);
    std::vector<std::string> output_lines;
    for (auto l : text::split(output, '\n')) output_lines.emplace_back(l);
    if (labels.size() != candidate_ids.size()) {
      fail(uid, "instruction lists " + std::to_string(labels.size()) + " candidates, meta has " +
                    std::to_string(candidate_ids.size()));
      continue;
    }
    if (output_lines.size() != candidate_ids.size()) {
      fail(uid, "output has " + std::to_string(output_lines.size()) + " lines for " +
                    std::to_string(candidate_ids.size()) + " candidates");
      continue;
    }
    if (!is_permutation_of(output_lines, labels)) {
      fail(uid, "output lines are not a permutation of the instruction's candidates");
      continue;
    }
    if (!is_permutation_of(ranked_ids, candidate_ids)) {
      fail(uid, "ranked_ids is not a permutation of candidate_ids");
      continue;
    }
    for (std::size_t i = 0; i < output_lines.size(); ++i) {
      const auto pos = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), output_lines[i]) - labels.begin());
      if (candidate_ids[pos] != ranked_ids[i]) {
        fail(uid, "output line " + std::to_string(i + 1) + " disagrees with ranked_ids");
        break;
      }
    }
  }
  return report;
}

DatasetReport validate_dataset(const std::filesystem::path& path) {
  return validate_dataset_text(text::read_file(path));
}

}  // namespace medlink
