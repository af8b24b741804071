#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace medlink {

struct Entity {
  std::string id;
  std::string name;

  bool operator==(const Entity&) const = default;
};

// Entity inventory in file order. Immutable once constructed.
class KnowledgeBase {
 public:
  // Throws Error(conflict) on duplicate ids and Error(validation) on empty
  // ids, blank names or an empty inventory.
  explicit KnowledgeBase(std::vector<Entity> entities);

  std::size_t size() const noexcept { return entities_.size(); }
  const std::vector<Entity>& entities() const noexcept { return entities_; }
  const Entity& at(std::size_t position) const { return entities_.at(position); }

  std::optional<std::size_t> position(std::string_view id) const;
  bool contains(std::string_view id) const { return position(id).has_value(); }
  // Throws Error(not_found).
  const Entity& entity(std::string_view id) const;

 private:
  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Split { train, val, test };

const char* to_string(Split split);
Split parse_split(std::string_view s);

struct Mention {
  std::string uid;
  std::string surface;
  std::optional<std::string> context;
  std::optional<std::string> gold_id;
  Split split = Split::train;
};

enum class MentionFormat { normalized_tsv, ask_a_patient };

MentionFormat parse_mention_format(std::string_view s);

KnowledgeBase parse_kb(std::istream& in, const std::string& source = "<kb>");
KnowledgeBase load_kb(const std::filesystem::path& path);
void write_kb(std::ostream& out, const KnowledgeBase& kb);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

std::vector<Mention> parse_mentions(std::istream& in, MentionFormat format, Split split,
                                    const std::string& source = "<mentions>");
std::vector<Mention> load_mentions(const std::filesystem::path& path, MentionFormat format,
                                   Split split);
void write_mentions(std::ostream& out, const std::vector<Mention>& mentions);

// Ask A Patient fold file for a split, e.g. dir/0.test.txt.
std::filesystem::path ask_a_patient_fold_path(const std::filesystem::path& dir,
                                              std::string_view fold, Split split);

struct RejectedMention {
  std::size_t line = 0;
  std::string uid;
  std::string reason;
};

// Mentions are never dropped at ingest: accepted + rejected always equals the
// number of mention lines read.
struct IngestReport {
  std::size_t kb_entities = 0;
  std::size_t mention_lines = 0;
  std::size_t accepted = 0;
  std::vector<RejectedMention> rejected;
  std::size_t max_context_chars = 0;
  std::size_t contexts_windowed = 0;
};

IngestReport check_mentions(const std::vector<Mention>& mentions, const KnowledgeBase& kb);

inline constexpr std::size_t kDefaultMaxContextChars = 256;

// Window of at most max_chars code points around the first occurrence of
// mention_surface. Extra budget goes to the right when it cannot split evenly.
// Falls back to the first max_chars code points when the mention is absent.
std::string window_context(std::string_view context, std::string_view mention_surface,
                           std::size_t max_chars);

}  // namespace medlink
