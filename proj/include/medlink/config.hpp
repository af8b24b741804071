#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medlink/chat_client.hpp"
#include "medlink/distillgen.hpp"
#include "medlink/retriever.hpp"

namespace medlink {

// Merged run configuration. Defaults follow the published setup: six
// candidates, 15 negatives of which 10% hard, temperature 0, 256-character
// context windows, Acc@1 and Acc@5.
struct PipelineConfig {
  struct Paths {
    std::optional<std::filesystem::path> kb;
    std::optional<std::filesystem::path> mentions;
    std::optional<std::filesystem::path> entity_embeddings;
    std::optional<std::filesystem::path> mention_embeddings;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> teacher_template;
    std::optional<std::filesystem::path> student_template;
    std::optional<std::filesystem::path> price_table;
  } paths;

  std::string mentions_format = "normalized-tsv";

  struct Retrieval {
    std::size_t k = kDefaultCandidates;
    Metric metric = Metric::dot;
    std::size_t negatives = kDefaultNegatives;
    double hard_ratio = kDefaultHardRatio;
    std::uint64_t seed = 42;
  } retrieval;

  struct Generation {
    std::string teacher_model = "gpt-3.5-turbo-0125";
    std::string endpoint = "https://api.openai.com/v1";
    double temperature = kDefaultTemperature;
    int max_output = kDefaultMaxOutput;
    std::size_t limit = 1000;
    FilterPolicy filter = FilterPolicy::drop_unparseable_only;
    std::size_t parallelism = 4;
    std::size_t rate_limit = 0;  // requests per second, 0 = unlimited
    std::size_t max_context_chars = kDefaultMaxContextChars;
    bool include_context = true;
    std::size_t fewshot_from_train = 0;  // 0 = use the template's examples
  } generation;

  struct Eval {
    std::vector<std::size_t> acc_ks{1, 5};
    std::string student_model = "student";
    std::string student_endpoint = kDefaultStudentUrl;
    bool strict_gold = false;
  } eval;
};

// Reads a JSON config; keys are validated and unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text, const std::string& source = "<config>");

std::string config_to_json(const PipelineConfig& config);
std::string config_digest(const PipelineConfig& config);

// Returns the path, or throws Error(config) naming the field when it is unset
// or (if must_exist) does not exist on disk.
std::filesystem::path require_path(const std::optional<std::filesystem::path>& value, const std::string& field,
                                   bool must_exist = true);

}  // namespace medlink
