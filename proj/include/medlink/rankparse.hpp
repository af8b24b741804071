#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace medlink {

enum class Repair { appended_missing, dropped_unknown, deduplicated, fuzzy_matched };

const char* to_string(Repair repair);

struct RankedList {
  std::string mention_uid;
  std::vector<std::string> order;  // entity ids, most probable first
  std::vector<Repair> repairs;     // in the order they were applied
  bool clean = false;
};

// Maps raw model output onto a permutation of candidate_ids.
//
// Each non-blank line loses one list marker ("1.", "1)", "-", "*") and is
// matched against candidate_labels by exact text, then case/whitespace
// normalized text, then punctuation-stripped text. A label's " (id)"
// disambiguation suffix may be omitted by the model. Repeated candidates keep
// their first position, unmatched lines are dropped, and candidates the text
// never named are appended in retrieval order.
//
// Throws Error(unparseable) when no line matches any candidate.
RankedList parse_ranked(std::string_view raw_text, const std::vector<std::string>& candidate_labels,
                        const std::vector<std::string>& candidate_ids,
                        std::string_view mention_uid = {});

const std::string& top1(const RankedList& ranked);

}  // namespace medlink
