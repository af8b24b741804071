#include "medlink/rankparse.hpp"

#include <optional>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

const char* to_string(Repair repair) {
  switch (repair) {
    case Repair::appended_missing: return "appended_missing";
    case Repair::dropped_unknown: return "dropped_unknown";
    case Repair::deduplicated: return "deduplicated";
    case Repair::fuzzy_matched: return "fuzzy_matched";
  }
  return "?";
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view strip_marker(std::string_view line) {
  line = text::trim(line);
  std::size_t i = 0;
  while (i < line.size() && is_digit(line[i])) ++i;
  if (i > 0 && i < line.size()) {
    std::size_t marker = 0;
    if (line[i] == '.' || line[i] == ')') {
      marker = 1;
    } else if (line.substr(i).starts_with("、")) {
      marker = 3;
    }
    const std::size_t after = i + marker;
    if (marker > 0 && (after == line.size() || line[after] == ' ' || line[after] == '\t' || marker == 3)) {
      return text::trim(line.substr(after));
    }
  }
  if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
    if (line.size() == 1 || line[1] == ' ' || line[1] == '\t') return text::trim(line.substr(1));
  }
  if (line.starts_with("•")) return text::trim(line.substr(3));
  return line;
}

std::string normalize(std::string_view s) { return text::to_lower_ascii(text::collapse_whitespace(s)); }

bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

std::string strip_punct(std::string_view s) {
  std::string kept;
  kept.reserve(s.size());
  for (char c : s) kept.push_back(is_ascii_punct(c) ? ' ' : c);
  return normalize(kept);
}

// Suffix " (id)" added by candidate_labels for duplicate names.
std::string base_name(const std::string& label, const std::string& id) {
  const std::string suffix = " (" + id + ")";
  if (label.size() > suffix.size() && label.ends_with(suffix)) {
    return label.substr(0, label.size() - suffix.size());
  }
  return label;
}

struct Keys {
  std::string full;
  std::string base;
};

// Prefers a candidate not yet used so that two lines naming a shared base
// name bind to both duplicates.
std::optional<std::size_t> find_match(const std::vector<Keys>& keys, const std::string& line,
                                      const std::vector<bool>& used) {
  std::optional<std::size_t> first_used;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].full == line) return i;
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].base == line) {
      if (!used[i]) return i;
      if (!first_used) first_used = i;
    }
  }
  return first_used;
}

}  // namespace

RankedList parse_ranked(std::string_view raw_text, const std::vector<std::string>& candidate_labels,
                        const std::vector<std::string>& candidate_ids, std::string_view mention_uid) {
  if (candidate_labels.empty() || candidate_labels.size() != candidate_ids.size()) {
    throw Error(ErrorKind::precondition, "candidate labels and ids must be non-empty and equal in length");
  }
  const std::size_t k = candidate_ids.size();
  std::vector<Keys> exact(k), normalized(k), stripped(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto base = base_name(candidate_labels[i], candidate_ids[i]);
    exact[i] = {candidate_labels[i], base};
    normalized[i] = {normalize(candidate_labels[i]), normalize(base)};
    stripped[i] = {strip_punct(candidate_labels[i]), strip_punct(base)};
  }

  RankedList out;
  out.mention_uid = std::string(mention_uid);
  std::vector<bool> used(k, false);
  for (auto raw_line : text::split(raw_text, '\n')) {
    const auto body = strip_marker(raw_line);
    if (body.empty()) continue;
    const std::string line(body);
    bool fuzzy = false;
    auto hit = find_match(exact, line, used);
    if (!hit) {
      hit = find_match(normalized, normalize(line), used);
      fuzzy = hit.has_value();
    }
    if (!hit) {
      hit = find_match(stripped, strip_punct(line), used);
      fuzzy = hit.has_value();
    }
    if (!hit) {
      out.repairs.push_back(Repair::dropped_unknown);
      continue;
    }
    if (used[*hit]) {
      out.repairs.push_back(Repair::deduplicated);
      continue;
    }
    if (fuzzy) out.repairs.push_back(Repair::fuzzy_matched);
    used[*hit] = true;
    out.order.push_back(candidate_ids[*hit]);
  }

  if (out.order.empty()) {
    throw Error(ErrorKind::unparseable, "no line of the model output names a candidate" +
                                            (mention_uid.empty() ? std::string()
                                                                 : " (" + std::string(mention_uid) + ")"));
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!used[i]) {
      out.order.push_back(candidate_ids[i]);
      out.repairs.push_back(Repair::appended_missing);
    }
  }
  out.clean = out.repairs.empty();
  return out;
}

const std::string& top1(const RankedList& ranked) {
  if (ranked.order.empty()) throw Error(ErrorKind::precondition, "empty ranked list");
  return ranked.order.front();
}

}  // namespace medlink
