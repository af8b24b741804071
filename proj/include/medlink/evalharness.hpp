#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medlink/distillgen.hpp"

namespace medlink {

// Number of lists whose gold appears within the first min(k, |list|) entries.
std::size_t hits_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& golds,
                      std::size_t k);

// Throws Error(undefined_metric) on empty input and Error(precondition) on
// k == 0 or mismatched lengths.
double acc_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& golds,
                std::size_t k);

double recall_at_k(const std::vector<CandidateSet>& candidate_sets, const std::vector<std::string>& golds);

struct MentionTrace {
  std::string uid;
  std::string surface;
  std::optional<std::string> gold_id;
  bool evaluated = false;
  std::vector<std::string> candidate_ids;
  std::string raw_output;
  std::vector<std::string> ranked_ids;  // empty on failure
  std::vector<Repair> repairs;
  std::string error;

  std::string to_json_line() const;
};

struct EvalOptions {
  std::size_t k = kDefaultCandidates;
  Metric metric = Metric::dot;
  std::vector<std::size_t> acc_ks{1, 5};
  bool strict_gold = false;  // gold ids missing from the KB are skipped instead of scored as misses
  std::string model;
  std::string backend_label;
  double temperature = kDefaultTemperature;
  int max_output = kDefaultMaxOutput;
  std::size_t parallelism = 1;
  std::size_t max_context_chars = kDefaultMaxContextChars;
  bool include_context = true;
  std::string template_digest;
};

struct EvalReport {
  std::map<std::size_t, double> acc_at;
  std::map<std::size_t, std::size_t> hits_at;
  std::map<std::size_t, double> retrieval_acc_at;  // gold's rank in the retrieval order
  double recall_at_k_candidates = 0.0;
  std::size_t recall_hits = 0;
  std::size_t n_evaluated = 0;
  std::size_t n_skipped = 0;
  std::size_t n_failed = 0;       // backend failures (scored as misses)
  std::size_t n_unparseable = 0;  // outputs naming no candidate (scored as misses)
  std::string trace_path;
  std::map<std::string, std::string> config;

  std::string to_json() const;
  std::string to_table() const;
};

// Builds the report from integer counts and checks the sandwich
// acc@k1 <= acc@k2 <= recall for k1 < k2; a violation throws std::logic_error.
EvalReport build_report(const std::vector<MentionTrace>& traces, const EvalOptions& options);

struct EvalRun {
  EvalReport report;
  std::vector<MentionTrace> traces;
};

// Retrieve, render with the student template, complete, parse; one trace per
// mention. The student template keeps the teacher out of the loop.
EvalRun run_eval(const std::vector<Mention>& mentions, const LinkingContext& ctx,
                 const PromptTemplate& student_template, const EvalOptions& options,
                 const CompletionServices& services);

void write_traces(const std::vector<MentionTrace>& traces, const std::filesystem::path& path);

}  // namespace medlink
