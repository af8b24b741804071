#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medlink/corpus.hpp"
#include "medlink/embedstore.hpp"
#include "medlink/promptkit.hpp"
#include "medlink/rankparse.hpp"
#include "medlink/response_cache.hpp"
#include "medlink/retriever.hpp"
#include "medlink/teacher.hpp"

namespace medlink {

// Read-only retrieval state shared by generation and evaluation.
struct LinkingContext {
  const KnowledgeBase& kb;
  const EntityIndex& index;
  const EmbeddingStore& mention_vectors;  // keyed by mention uid
};

// The backend, optional cache and ledger used for every completion.
struct CompletionServices {
  CompletionBackend& backend;
  ResponseCache* cache = nullptr;
  UsageLedger& ledger;

  CompletionResponse complete(const CompletionRequest& request) const;
};

// Copy of the mention with its context windowed (or dropped when
// include_context is false).
Mention prepare_mention(const Mention& m, std::size_t max_context_chars, bool include_context);

// Throws Error(validation) listing mentions without a vector.
void require_mention_vectors(const std::vector<Mention>& mentions, const EmbeddingStore& store);

enum class FilterPolicy { keep_all, strict_clean, drop_unparseable_only };

FilterPolicy parse_filter_policy(std::string_view s);
const char* to_string(FilterPolicy policy);

struct DistillMeta {
  std::string mention_uid;
  std::vector<std::string> candidate_ids;  // retrieval order
  std::vector<std::string> ranked_ids;     // teacher order
  bool clean = false;
  bool gold_in_candidates = false;
  std::string teacher_model;
};

struct DistillRecord {
  std::string instruction;
  std::string output;  // ranked candidate labels, one per line
  DistillMeta meta;

  std::string to_json_line() const;
};

struct AuditEntry {
  std::string uid;
  std::string outcome;  // emitted | filtered:unparseable | filtered:not_clean | failed:backend
  std::vector<Repair> repairs;
  bool gold_in_candidates = false;
  std::string note;

  std::string to_json_line() const;
};

struct GenerateOptions {
  std::size_t k = kDefaultCandidates;
  Metric metric = Metric::dot;
  std::size_t limit = 0;
  FilterPolicy filter = FilterPolicy::drop_unparseable_only;
  std::string teacher_model;
  double temperature = kDefaultTemperature;
  int max_output = kDefaultMaxOutput;
  std::size_t parallelism = 1;
  std::size_t max_context_chars = kDefaultMaxContextChars;
  bool include_context = true;
};

struct GenerateResult {
  std::vector<DistillRecord> records;
  std::vector<AuditEntry> audit;  // one per processed mention, in mention order
  std::size_t processed = 0;
  std::size_t backend_failures = 0;
  std::size_t gold_in_candidates = 0;  // over processed mentions
};

// Processes the first `limit` mentions in order: retrieve, prompt the
// teacher, parse, filter. Backend failures are recorded and skipped.
GenerateResult generate_dataset(const std::vector<Mention>& mentions, const LinkingContext& ctx,
                                const PromptTemplate& teacher_template,
                                const PromptTemplate& student_template, const GenerateOptions& options,
                                const CompletionServices& services);

void write_dataset(const std::vector<DistillRecord>& records, const std::filesystem::path& path);
void write_audit(const std::vector<AuditEntry>& audit, const std::filesystem::path& path);

struct Diagnostic {
  std::size_t line = 0;
  std::string uid;
  bool error = true;  // false = warning
  std::string message;
};

struct DatasetReport {
  std::size_t records = 0;
  std::vector<Diagnostic> diagnostics;

  bool pass() const;
  std::size_t errors() const;
  std::size_t warnings() const;
};

DatasetReport validate_dataset_text(std::string_view contents);
DatasetReport validate_dataset(const std::filesystem::path& path);

}  // namespace medlink
