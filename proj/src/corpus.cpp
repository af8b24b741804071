#include "medlink/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

KnowledgeBase::KnowledgeBase(std::vector<Entity> entities) : entities_(std::move(entities)) {
  if (entities_.empty()) throw Error(ErrorKind::validation, "empty knowledge base");
  index_.reserve(entities_.size());
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    const auto& e = entities_[i];
    if (e.id.empty()) {
      throw Error(ErrorKind::validation, "entity at position " + std::to_string(i) + " has an empty id");
    }
    if (text::trim(e.name).empty()) {
      throw Error(ErrorKind::validation, "entity " + e.id + " has a blank name");
    }
    if (!index_.emplace(e.id, i).second) {
      throw Error(ErrorKind::conflict, "duplicate entity id " + e.id);
    }
  }
}

std::optional<std::size_t> KnowledgeBase::position(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Entity& KnowledgeBase::entity(std::string_view id) const {
  const auto pos = position(id);
  if (!pos) throw Error(ErrorKind::not_found, "unknown entity id " + std::string(id));
  return entities_[*pos];
}

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val" || s == "validation") return Split::val;
  if (s == "test") return Split::test;
  throw Error(ErrorKind::config, "unknown split '" + std::string(s) + "'");
}

MentionFormat parse_mention_format(std::string_view s) {
  if (s == "normalized-tsv") return MentionFormat::normalized_tsv;
  if (s == "ask-a-patient") return MentionFormat::ask_a_patient;
  throw Error(ErrorKind::config, "unknown mention format '" + std::string(s) + "'");
}

namespace {

// getline that also drops a trailing CR.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return in;
}

}  // namespace

KnowledgeBase parse_kb(std::istream& in, const std::string& source) {
  std::vector<Entity> entities;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    const auto cols = text::split(line, '\t');
    if (cols.size() != 2) {
      throw ParseError(source, line_no,
                       "expected 2 tab-separated columns, found " + std::to_string(cols.size()));
    }
    if (cols[0].empty()) throw ParseError(source, line_no, "empty entity id");
    if (text::trim(cols[1]).empty()) throw ParseError(source, line_no, "blank entity name");
    const auto [it, inserted] = seen.emplace(std::string(cols[0]), line_no);
    if (!inserted) {
      throw Error(ErrorKind::conflict, source + ":" + std::to_string(line_no) + ": duplicate id " +
                                           it->first + " (first seen at line " +
                                           std::to_string(it->second) + ")");
    }
    entities.push_back(Entity{std::string(cols[0]), std::string(cols[1])});
  }
  if (entities.empty()) throw Error(ErrorKind::validation, source + ": empty knowledge base");
  return KnowledgeBase(std::move(entities));
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_kb(in, path.string());
}

void write_kb(std::ostream& out, const KnowledgeBase& kb) {
  for (const auto& e : kb.entities()) out << e.id << '\t' << e.name << '\n';
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_kb(buf, kb);
  text::write_file_atomic(path, buf.str());
}

std::vector<Mention> parse_mentions(std::istream& in, MentionFormat format, Split split,
                                    const std::string& source) {
  std::vector<Mention> mentions;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    const auto cols = text::split(line, '\t');
    Mention m;
    m.uid = std::string(to_string(split)) + ":" + std::to_string(line_no);
    m.split = split;
    if (format == MentionFormat::ask_a_patient) {
      if (cols.size() != 3) {
        throw ParseError(source, line_no,
                         "expected gold_id<TAB>gold_name<TAB>mention, found " +
                             std::to_string(cols.size()) + " columns");
      }
      if (!cols[0].empty()) m.gold_id = std::string(cols[0]);
      m.surface = std::string(cols[2]);
    } else {
      if (cols.size() != 2 && cols.size() != 3) {
        throw ParseError(source, line_no,
                         "expected gold_id<TAB>mention[<TAB>context], found " +
                             std::to_string(cols.size()) + " columns");
      }
      if (!cols[0].empty()) m.gold_id = std::string(cols[0]);
      m.surface = std::string(cols[1]);
      if (cols.size() == 3 && !cols[2].empty()) m.context = std::string(cols[2]);
    }
    if (text::trim(m.surface).empty()) throw ParseError(source, line_no, "empty mention");
    mentions.push_back(std::move(m));
  }
  return mentions;
}

std::vector<Mention> load_mentions(const std::filesystem::path& path, MentionFormat format,
                                   Split split) {
  auto in = open_or_throw(path);
  return parse_mentions(in, format, split, path.string());
}

void write_mentions(std::ostream& out, const std::vector<Mention>& mentions) {
  for (const auto& m : mentions) {
    out << m.gold_id.value_or("") << '\t' << text::tsv_cell(m.surface);
    if (m.context) out << '\t' << text::tsv_cell(*m.context);
    out << '\n';
  }
}

std::filesystem::path ask_a_patient_fold_path(const std::filesystem::path& dir,
                                              std::string_view fold, Split split) {
  const char* suffix = split == Split::train ? ".train.txt"
                       : split == Split::val ? ".validation.txt"
                                             : ".test.txt";
  return dir / (std::string(fold) + suffix);
}

IngestReport check_mentions(const std::vector<Mention>& mentions, const KnowledgeBase& kb) {
  IngestReport report;
  report.kb_entities = kb.size();
  report.mention_lines = mentions.size();
  for (const auto& m : mentions) {
    if (m.gold_id && !kb.contains(*m.gold_id)) {
      const auto colon = m.uid.rfind(':');
      const std::size_t line = colon == std::string::npos ? 0 : std::stoul(m.uid.substr(colon + 1));
      report.rejected.push_back({line, m.uid, "gold id " + *m.gold_id + " not in knowledge base"});
    } else {
      ++report.accepted;
    }
  }
  return report;
}

std::string window_context(std::string_view context, std::string_view mention_surface,
                           std::size_t max_chars) {
  const auto offsets = text::codepoint_offsets(context);
  const std::size_t total = offsets.size() - 1;
  if (total <= max_chars) return std::string(context);

  const auto hit = mention_surface.empty() ? std::string_view::npos : context.find(mention_surface);
  if (hit == std::string_view::npos) return std::string(context.substr(0, offsets[max_chars]));

  // Code point index of the mention start and one-past-end.
  const auto begin_cp = static_cast<std::size_t>(
      std::lower_bound(offsets.begin(), offsets.end(), hit) - offsets.begin());
  const auto end_cp = static_cast<std::size_t>(
      std::lower_bound(offsets.begin(), offsets.end(), hit + mention_surface.size()) -
      offsets.begin());
  const std::size_t mention_len = end_cp - begin_cp;
  if (mention_len >= max_chars) {
    return std::string(context.substr(offsets[begin_cp], offsets[begin_cp + max_chars] - offsets[begin_cp]));
  }

  const std::size_t budget = max_chars - mention_len;
  const std::size_t room_left = begin_cp;
  const std::size_t room_right = total - end_cp;
  std::size_t left = budget / 2;
  std::size_t right = budget - left;
  if (room_left < left) {
    left = room_left;
    right = std::min(room_right, budget - left);
  } else if (room_right < right) {
    right = room_right;
    left = std::min(room_left, budget - right);
  }
  const auto from = offsets[begin_cp - left];
  const auto to = offsets[end_cp + right];
  return std::string(context.substr(from, to - from));
}

}  // namespace medlink
