#include "medlink/promptkit.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/seeded.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

namespace {

constexpr std::string_view kMention = "{mention}";
constexpr std::string_view kContext = "{context}";
constexpr std::string_view kCandidates = "{candidates}";

std::size_t count_of(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool has_placeholder(std::string_view line) {
  return line.find(kMention) != std::string_view::npos ||
         line.find(kContext) != std::string_view::npos ||
         line.find(kCandidates) != std::string_view::npos;
}

struct Sections {
  std::string task;
  std::string query;
};

Sections split_instruction(std::string_view instruction) {
  std::size_t line_start = 0;
  while (line_start <= instruction.size()) {
    auto line_end = instruction.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = instruction.size();
    if (has_placeholder(instruction.substr(line_start, line_end - line_start))) {
      std::string task(instruction.substr(0, line_start));
      while (!task.empty() && (task.back() == '\n' || task.back() == ' ' || task.back() == '\r')) {
        task.pop_back();
      }
      return {task, std::string(instruction.substr(line_start))};
    }
    line_start = line_end + 1;
  }
  return {std::string(instruction), ""};
}

// Single left-to-right pass so substituted text is never re-scanned.
std::string fill(std::string_view block, const Mention& mention, const std::string& candidates) {
  std::string out;
  out.reserve(block.size() + candidates.size() + 64);
  std::size_t line_start = 0;
  while (line_start < block.size()) {
    auto line_end = block.find('\n', line_start);
    const bool last = line_end == std::string_view::npos;
    if (last) line_end = block.size();
    const auto line = block.substr(line_start, line_end - line_start);
    if (!(line.find(kContext) != std::string_view::npos && !mention.context)) {
      std::size_t i = 0;
      while (i < line.size()) {
        if (line[i] == '{') {
          const auto rest = line.substr(i);
          if (rest.starts_with(kMention)) {
            out += mention.surface;
            i += kMention.size();
            continue;
          }
          if (rest.starts_with(kContext)) {
            out += *mention.context;
            i += kContext.size();
            continue;
          }
          if (rest.starts_with(kCandidates)) {
            out += candidates;
            i += kCandidates.size();
            continue;
          }
        }
        out.push_back(line[i++]);
      }
      if (!last) out.push_back('\n');
    }
    line_start = line_end + 1;
  }
  return out;
}

void require_candidates(const CandidateSet& candidates) {
  if (candidates.candidates.empty()) {
    throw Error(ErrorKind::precondition, "cannot render a prompt with an empty candidate set");
  }
}

}  // namespace

void PromptTemplate::validate() const {
  const auto mentions = count_of(instruction_text, kMention);
  const auto cands = count_of(instruction_text, kCandidates);
  if (mentions != 1) {
    throw Error(ErrorKind::validation, "template must contain {mention} exactly once, found " +
                                           std::to_string(mentions));
  }
  if (cands != 1) {
    throw Error(ErrorKind::validation, "template must contain {candidates} exactly once, found " +
                                           std::to_string(cands));
  }
  if (count_of(instruction_text, kContext) > 1) {
    throw Error(ErrorKind::validation, "template may contain {context} at most once");
  }
  if (kind == TemplateKind::student && (output_format_text || !examples.empty())) {
    throw Error(ErrorKind::validation, "student templates carry no output format or examples");
  }
}

PromptTemplate parse_template(std::string_view json_text, const std::string& source) {
  PromptTemplate t;
  try {
    const auto j = nlohmann::json::parse(json_text);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "teacher") {
      t.kind = TemplateKind::teacher;
    } else if (kind == "student") {
      t.kind = TemplateKind::student;
    } else {
      throw Error(ErrorKind::validation, source + ": unknown template kind '" + kind + "'");
    }
    t.instruction_text = j.at("instruction_text").get<std::string>();
    if (j.contains("output_format_text") && !j["output_format_text"].is_null()) {
      t.output_format_text = j["output_format_text"].get<std::string>();
    }
    if (j.contains("examples")) {
      for (const auto& ex : j["examples"]) {
        t.examples.push_back({ex.at("input").get<std::string>(), ex.at("output").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, source + ": " + e.what());
  }
  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(e.kind(), source + ": " + e.what());
  }
  return t;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  return parse_template(text::read_file(path), path.string());
}

std::string template_digest(const PromptTemplate& t) {
  nlohmann::ordered_json j;
  j["kind"] = t.kind == TemplateKind::teacher ? "teacher" : "student";
  j["instruction_text"] = t.instruction_text;
  j["output_format_text"] = t.output_format_text ? nlohmann::ordered_json(*t.output_format_text)
                                                 : nlohmann::ordered_json(nullptr);
  j["examples"] = nlohmann::ordered_json::array();
  for (const auto& ex : t.examples) j["examples"].push_back({{"input", ex.input}, {"output", ex.output}});
  return text::sha256_hex(j.dump());
}

std::vector<std::string> candidate_labels(const CandidateSet& candidates, const KnowledgeBase& kb) {
  std::vector<std::string> names;
  names.reserve(candidates.candidates.size());
  std::map<std::string, std::size_t> name_count;
  for (const auto& c : candidates.candidates) {
    names.push_back(kb.entity(c.entity_id).name);
    ++name_count[names.back()];
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (name_count[names[i]] > 1) names[i] += " (" + candidates.candidates[i].entity_id + ")";
  }
  return names;
}

std::string numbered_list(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + labels[i];
  }
  return out;
}

RenderedPrompt render_teacher(const PromptTemplate& t, const Mention& mention,
                              const CandidateSet& candidates, const KnowledgeBase& kb) {
  if (t.kind != TemplateKind::teacher) throw Error(ErrorKind::precondition, "render_teacher needs a teacher template");
  t.validate();
  require_candidates(candidates);
  RenderedPrompt out;
  out.candidate_labels = candidate_labels(candidates, kb);
  const auto sections = split_instruction(t.instruction_text);

  std::vector<std::string> parts;
  if (!sections.task.empty()) parts.push_back(sections.task);
  if (t.output_format_text) parts.push_back(*t.output_format_text);
  for (std::size_t i = 0; i < t.examples.size(); ++i) {
    parts.push_back("Example " + std::to_string(i + 1) + ":\n" + t.examples[i].input + "\nOutput:\n" +
                    t.examples[i].output);
  }
  parts.push_back(fill(sections.query, mention, numbered_list(out.candidate_labels)));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.text += "\n\n";
    out.text += parts[i];
  }
  return out;
}

RenderedPrompt render_student(const PromptTemplate& t, const Mention& mention,
                              const CandidateSet& candidates, const KnowledgeBase& kb) {
  if (t.kind != TemplateKind::student) throw Error(ErrorKind::precondition, "render_student needs a student template");
  t.validate();
  require_candidates(candidates);
  RenderedPrompt out;
  out.candidate_labels = candidate_labels(candidates, kb);
  out.text = fill(t.instruction_text, mention, numbered_list(out.candidate_labels));
  return out;
}

std::vector<std::string> last_numbered_list(std::string_view text) {
  static const std::regex kItem(R"(^\s*(\d+)[.)]\s+(.*?)\s*$)");
  std::vector<std::string> best;
  std::vector<std::string> run;
  for (auto line : text::split(text, '\n')) {
    std::smatch m;
    const std::string s(line);
    if (std::regex_match(s, m, kItem)) {
      const auto n = std::stoul(m[1].str());
      if (n == run.size() + 1) {
        run.push_back(m[2].str());
        continue;
      }
      if (n == 1) {
        if (!run.empty()) best = std::move(run);
        run = {m[2].str()};
        continue;
      }
    }
    if (!run.empty()) best = std::move(run);
    run.clear();
  }
  if (!run.empty()) best = std::move(run);
  return best;
}

std::vector<FewShotExample> examples_from_train(const PromptTemplate& t,
                                                const std::vector<ExampleSource>& sources,
                                                const KnowledgeBase& kb, std::size_t count,
                                                std::uint64_t seed) {
  std::vector<const ExampleSource*> usable;
  for (const auto& s : sources) {
    if (s.mention->gold_id && s.candidates.contains(*s.mention->gold_id)) usable.push_back(&s);
  }
  std::mt19937_64 rng(seed);
  partial_shuffle(usable, count, rng);
  usable.resize(std::min(count, usable.size()));

  const auto query = split_instruction(t.instruction_text).query;
  std::vector<FewShotExample> out;
  for (const auto* s : usable) {
    const auto labels = candidate_labels(s->candidates, kb);
    const auto gold_rank = *s->candidates.rank_of(*s->mention->gold_id) - 1;
    std::vector<std::string> answer{labels[gold_rank]};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i != gold_rank) answer.push_back(labels[i]);
    }
    out.push_back({fill(query, *s->mention, numbered_list(labels)), numbered_list(answer)});
  }
  return out;
}

}  // namespace medlink
