#include "medlink/evalharness.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"
#include "medlink/worker_pool.hpp"

namespace medlink {

namespace {

void check_inputs(std::size_t lists, std::size_t golds) {
  if (lists != golds) throw Error(ErrorKind::precondition, "one gold per ranked list required");
  if (lists == 0) throw Error(ErrorKind::undefined_metric, "metric undefined over zero mentions");
}

std::optional<std::size_t> rank_in(const std::vector<std::string>& order, const std::string& gold) {
  const auto it = std::find(order.begin(), order.end(), gold);
  if (it == order.end()) return std::nullopt;
  return static_cast<std::size_t>(it - order.begin()) + 1;
}

}  // namespace

std::size_t hits_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& golds,
                      std::size_t k) {
  if (k == 0) throw Error(ErrorKind::precondition, "k must be >= 1");
  if (ranked.size() != golds.size()) throw Error(ErrorKind::precondition, "one gold per ranked list required");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto r = rank_in(ranked[i], golds[i]);
    if (r && *r <= k) ++hits;
  }
  return hits;
}

double acc_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& golds,
                std::size_t k) {
  check_inputs(ranked.size(), golds.size());
  return static_cast<double>(hits_at_k(ranked, golds, k)) / static_cast<double>(ranked.size());
}

double recall_at_k(const std::vector<CandidateSet>& candidate_sets, const std::vector<std::string>& golds) {
  check_inputs(candidate_sets.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < candidate_sets.size(); ++i) {
    if (candidate_sets[i].contains(golds[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(candidate_sets.size());
}

std::string MentionTrace::to_json_line() const {
  nlohmann::ordered_json j;
  j["uid"] = uid;
  j["mention"] = surface;
  j["gold_id"] = gold_id ? nlohmann::ordered_json(*gold_id) : nlohmann::ordered_json(nullptr);
  j["evaluated"] = evaluated;
  j["candidates"] = candidate_ids;
  j["raw_output"] = raw_output;
  j["ranked"] = ranked_ids;
  j["repairs"] = nlohmann::ordered_json::array();
  for (auto r : repairs) j["repairs"].push_back(to_string(r));
  if (!error.empty()) j["error"] = error;
  return j.dump();
}

EvalReport build_report(const std::vector<MentionTrace>& traces, const EvalOptions& options) {
  EvalReport report;
  std::vector<std::vector<std::string>> reranked;
  std::vector<std::vector<std::string>> retrieved;
  std::vector<std::string> golds;
  for (const auto& t : traces) {
    if (!t.evaluated) {
      ++report.n_skipped;
      continue;
    }
    reranked.push_back(t.ranked_ids);
    retrieved.push_back(t.candidate_ids);
    golds.push_back(*t.gold_id);
    if (std::find(t.candidate_ids.begin(), t.candidate_ids.end(), *t.gold_id) != t.candidate_ids.end()) {
      ++report.recall_hits;
    }
  }
  report.n_evaluated = golds.size();
  if (report.n_evaluated == 0) throw Error(ErrorKind::undefined_metric, "no mention with a gold id to evaluate");

  const auto n = static_cast<double>(report.n_evaluated);
  report.recall_at_k_candidates = static_cast<double>(report.recall_hits) / n;
  auto ks = options.acc_ks;
  std::sort(ks.begin(), ks.end());
  std::size_t previous = 0;
  for (auto k : ks) {
    const auto hits = hits_at_k(reranked, golds, k);
    report.hits_at[k] = hits;
    report.acc_at[k] = static_cast<double>(hits) / n;
    report.retrieval_acc_at[k] = static_cast<double>(hits_at_k(retrieved, golds, k)) / n;
    if (hits < previous || hits > report.recall_hits) {
      throw std::logic_error("accuracy sandwich violated at k=" + std::to_string(k));
    }
    previous = hits;
  }

  report.config["k"] = std::to_string(options.k);
  report.config["metric"] = to_string(options.metric);
  report.config["backend"] = options.backend_label;
  report.config["model"] = options.model;
  report.config["strict_gold"] = options.strict_gold ? "true" : "false";
  report.config["max_context_chars"] = std::to_string(options.max_context_chars);
  report.config["template_sha256"] = options.template_digest;
  std::string ks_text;
  for (auto k : ks) ks_text += (ks_text.empty() ? "" : ",") + std::to_string(k);
  report.config["acc_ks"] = ks_text;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["acc_at"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : acc_at) j["acc_at"][std::to_string(k)] = v;
  j["hits_at"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : hits_at) j["hits_at"][std::to_string(k)] = v;
  j["retrieval_acc_at"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : retrieval_acc_at) j["retrieval_acc_at"][std::to_string(k)] = v;
  j["recall_at_k_candidates"] = recall_at_k_candidates;
  j["recall_hits"] = recall_hits;
  j["n_evaluated"] = n_evaluated;
  j["n_skipped"] = n_skipped;
  j["n_failed"] = n_failed;
  j["n_unparseable"] = n_unparseable;
  j["trace_path"] = trace_path;
  j["config"] = config;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "metric                 reranked   retrieval\n";
  for (const auto& [k, v] : acc_at) {
    out << "Acc@" << std::left << std::setw(19) << k << std::right << std::setw(8) << v << std::setw(12)
        << retrieval_acc_at.at(k) << '\n';
  }
  out << "recall@" << config.at("k") << " (candidates)" << std::setw(std::max(1, 16 - static_cast<int>(config.at("k").size())))
      << " " << recall_at_k_candidates << '\n';
  out << "evaluated " << n_evaluated << ", skipped " << n_skipped << ", backend failures " << n_failed
      << ", unparseable " << n_unparseable << '\n';
  return out.str();
}

EvalRun run_eval(const std::vector<Mention>& mentions, const LinkingContext& ctx,
                 const PromptTemplate& student_template, const EvalOptions& options,
                 const CompletionServices& services) {
  require_mention_vectors(mentions, ctx.mention_vectors);
  EvalRun run;
  run.traces.resize(mentions.size());
  std::vector<char> unparseable(mentions.size(), 0);
  std::vector<char> failed(mentions.size(), 0);

  parallel_for_each_index(mentions.size(), options.parallelism, [&](std::size_t i) {
    const Mention mention = prepare_mention(mentions[i], options.max_context_chars, options.include_context);
    MentionTrace& t = run.traces[i];
    t.uid = mention.uid;
    t.surface = mention.surface;
    t.gold_id = mention.gold_id;
    t.evaluated = mention.gold_id.has_value() && (!options.strict_gold || ctx.kb.contains(*mention.gold_id));

    const auto candidates = ctx.index.top_k(ctx.mention_vectors.lookup(mention.uid), options.k, options.metric);
    t.candidate_ids = candidates.ids();
    const auto prompt = render_student(student_template, mention, candidates, ctx.kb);

    CompletionRequest request;
    request.model = options.model;
    request.prompt_text = prompt.text;
    request.temperature = options.temperature;
    request.max_output = options.max_output;
    if (mention.gold_id) {
      if (const auto r = candidates.rank_of(*mention.gold_id)) request.gold_label = prompt.candidate_labels[*r - 1];
    }
    try {
      const auto response = services.complete(request);
      t.raw_output = response.text;
      const auto ranked = parse_ranked(response.text, prompt.candidate_labels, t.candidate_ids, mention.uid);
      t.ranked_ids = ranked.order;
      t.repairs = ranked.repairs;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::unparseable) {
        unparseable[i] = 1;
      } else if (e.kind() == ErrorKind::backend || e.kind() == ErrorKind::auth) {
        failed[i] = 1;
      } else {
        throw;
      }
      t.error = e.what();
    }
  });

  run.report = build_report(run.traces, options);
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (!run.traces[i].evaluated) continue;
    run.report.n_failed += failed[i];
    run.report.n_unparseable += unparseable[i];
  }
  return run;
}

void write_traces(const std::vector<MentionTrace>& traces, const std::filesystem::path& path) {
  std::string buf;
  for (const auto& t : traces) buf += t.to_json_line() + "\n";
  text::write_file_atomic(path, buf);
}

}  // namespace medlink
