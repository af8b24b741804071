#include "medlink/config.hpp"

#include <set>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where,
                    const std::string& source) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::config, source + ": unknown setting " + where + key);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void read_path(const json& obj, const char* key, std::optional<std::filesystem::path>& target,
               const std::filesystem::path& base) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  std::filesystem::path p = obj.at(key).get<std::string>();
  target = p.is_relative() ? base / p : p;
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text, const std::string& source) {
  PipelineConfig cfg;
  const std::filesystem::path base =
      source.starts_with("<") ? std::filesystem::path(".") : std::filesystem::path(source).parent_path();
  try {
    const auto j = json::parse(json_text);
    if (!j.is_object()) throw Error(ErrorKind::config, source + ": config must be a JSON object");
    reject_unknown(j, {"paths", "mentions_format", "retrieval", "generation", "eval"}, "", source);
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown(p, {"kb", "mentions", "entity_embeddings", "mention_embeddings", "cache_dir",
                         "teacher_template", "student_template", "price_table"},
                     "paths.", source);
      read_path(p, "kb", cfg.paths.kb, base);
      read_path(p, "mentions", cfg.paths.mentions, base);
      read_path(p, "entity_embeddings", cfg.paths.entity_embeddings, base);
      read_path(p, "mention_embeddings", cfg.paths.mention_embeddings, base);
      read_path(p, "cache_dir", cfg.paths.cache_dir, base);
      read_path(p, "teacher_template", cfg.paths.teacher_template, base);
      read_path(p, "student_template", cfg.paths.student_template, base);
      read_path(p, "price_table", cfg.paths.price_table, base);
    }
    read(j, "mentions_format", cfg.mentions_format);
    if (j.contains("retrieval")) {
      const auto& r = j["retrieval"];
      reject_unknown(r, {"k", "metric", "negatives", "hard_ratio", "seed"}, "retrieval.", source);
      read(r, "k", cfg.retrieval.k);
      if (r.contains("metric")) cfg.retrieval.metric = parse_metric(r["metric"].get<std::string>());
      read(r, "negatives", cfg.retrieval.negatives);
      read(r, "hard_ratio", cfg.retrieval.hard_ratio);
      read(r, "seed", cfg.retrieval.seed);
    }
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      reject_unknown(g, {"teacher_model", "endpoint", "temperature", "max_output", "limit", "filter",
                         "parallelism", "rate_limit", "max_context_chars", "include_context",
                         "fewshot_from_train"},
                     "generation.", source);
      read(g, "teacher_model", cfg.generation.teacher_model);
      read(g, "endpoint", cfg.generation.endpoint);
      read(g, "temperature", cfg.generation.temperature);
      read(g, "max_output", cfg.generation.max_output);
      read(g, "limit", cfg.generation.limit);
      if (g.contains("filter")) cfg.generation.filter = parse_filter_policy(g["filter"].get<std::string>());
      read(g, "parallelism", cfg.generation.parallelism);
      read(g, "rate_limit", cfg.generation.rate_limit);
      read(g, "max_context_chars", cfg.generation.max_context_chars);
      read(g, "include_context", cfg.generation.include_context);
      read(g, "fewshot_from_train", cfg.generation.fewshot_from_train);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      reject_unknown(e, {"acc_ks", "student_model", "student_endpoint", "strict_gold"}, "eval.", source);
      read(e, "acc_ks", cfg.eval.acc_ks);
      read(e, "student_model", cfg.eval.student_model);
      read(e, "student_endpoint", cfg.eval.student_endpoint);
      read(e, "strict_gold", cfg.eval.strict_gold);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, source + ": " + e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string contents;
  try {
    contents = text::read_file(path);
  } catch (const Error&) {
    throw Error(ErrorKind::config, "cannot read config file " + path.string());
  }
  return parse_config(contents, path.string());
}

std::string config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  auto path_or_null = [](const std::optional<std::filesystem::path>& p) {
    return p ? nlohmann::ordered_json(p->string()) : nlohmann::ordered_json(nullptr);
  };
  j["paths"] = {{"kb", path_or_null(c.paths.kb)},
                {"mentions", path_or_null(c.paths.mentions)},
                {"entity_embeddings", path_or_null(c.paths.entity_embeddings)},
                {"mention_embeddings", path_or_null(c.paths.mention_embeddings)},
                {"cache_dir", path_or_null(c.paths.cache_dir)},
                {"teacher_template", path_or_null(c.paths.teacher_template)},
                {"student_template", path_or_null(c.paths.student_template)},
                {"price_table", path_or_null(c.paths.price_table)}};
  j["mentions_format"] = c.mentions_format;
  j["retrieval"] = {{"k", c.retrieval.k},
                    {"metric", to_string(c.retrieval.metric)},
                    {"negatives", c.retrieval.negatives},
                    {"hard_ratio", c.retrieval.hard_ratio},
                    {"seed", c.retrieval.seed}};
  j["generation"] = {{"teacher_model", c.generation.teacher_model},
                     {"endpoint", c.generation.endpoint},
                     {"temperature", c.generation.temperature},
                     {"max_output", c.generation.max_output},
                     {"limit", c.generation.limit},
                     {"filter", to_string(c.generation.filter)},
                     {"parallelism", c.generation.parallelism},
                     {"rate_limit", c.generation.rate_limit},
                     {"max_context_chars", c.generation.max_context_chars},
                     {"include_context", c.generation.include_context},
                     {"fewshot_from_train", c.generation.fewshot_from_train}};
  j["eval"] = {{"acc_ks", c.eval.acc_ks},
               {"student_model", c.eval.student_model},
               {"student_endpoint", c.eval.student_endpoint},
               {"strict_gold", c.eval.strict_gold}};
  return j.dump(2) + "\n";
}

std::string config_digest(const PipelineConfig& config) { return text::sha256_hex(config_to_json(config)); }

std::filesystem::path require_path(const std::optional<std::filesystem::path>& value, const std::string& field,
                                   bool must_exist) {
  if (!value || value->empty()) throw Error(ErrorKind::config, "missing required setting " + field);
  if (must_exist && !std::filesystem::exists(*value)) {
    throw Error(ErrorKind::config, field + ": no such file: " + value->string());
  }
  return *value;
}

}  // namespace medlink
