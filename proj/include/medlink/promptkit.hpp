#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medlink/corpus.hpp"
#include "medlink/retriever.hpp"

namespace medlink {

enum class TemplateKind { teacher, student };

struct FewShotExample {
  std::string input;
  std::string output;
};

// instruction_text holds the task statement followed by the query block.
// The query block starts at the first line carrying a placeholder
// ({mention}, {context} or {candidates}); everything before it is the task
// statement. Teacher prompts insert the output-format section and the
// examples between the two. A line containing {context} is dropped entirely
// when the mention has no context.
struct PromptTemplate {
  TemplateKind kind = TemplateKind::teacher;
  std::string instruction_text;
  std::optional<std::string> output_format_text;
  std::vector<FewShotExample> examples;

  // Throws Error(validation) when a placeholder is missing or repeated, or a
  // student template carries an output format or examples.
  void validate() const;
};

PromptTemplate parse_template(std::string_view json_text, const std::string& source = "<template>");
PromptTemplate load_template(const std::filesystem::path& path);
std::string template_digest(const PromptTemplate& t);

struct RenderedPrompt {
  std::string text;
  std::vector<std::string> candidate_labels;  // in retrieval order
};

// Canonical names in retrieval order; names shared by distinct ids get an
// " (id)" suffix.
std::vector<std::string> candidate_labels(const CandidateSet& candidates, const KnowledgeBase& kb);

RenderedPrompt render_teacher(const PromptTemplate& t, const Mention& mention,
                              const CandidateSet& candidates, const KnowledgeBase& kb);
RenderedPrompt render_student(const PromptTemplate& t, const Mention& mention,
                              const CandidateSet& candidates, const KnowledgeBase& kb);

// "1. a\n2. b\n..." without a trailing newline.
std::string numbered_list(const std::vector<std::string>& labels);

// Labels of the last run of consecutively numbered lines ("1. x", "2. y", ...)
// in text. Prompts always end their query block with the candidate list, so
// this recovers the candidates a prompt asked about.
std::vector<std::string> last_numbered_list(std::string_view text);

// Few-shot examples built from labelled training mentions: the query block
// rendered for the mention, answered with the gold first and the remaining
// candidates in retrieval order. Mentions whose gold was not retrieved are
// skipped. Picks `count` mentions with a seeded shuffle.
struct ExampleSource {
  const Mention* mention = nullptr;
  CandidateSet candidates;
};
std::vector<FewShotExample> examples_from_train(const PromptTemplate& t,
                                                const std::vector<ExampleSource>& sources,
                                                const KnowledgeBase& kb, std::size_t count,
                                                std::uint64_t seed);

}  // namespace medlink
