#include "medlink/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "medlink/errors.hpp"
#include "medlink/seeded.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

const char* to_string(Metric metric) { return metric == Metric::dot ? "dot" : "cosine"; }

Metric parse_metric(std::string_view s) {
  if (s == "dot") return Metric::dot;
  if (s == "cosine") return Metric::cosine;
  throw Error(ErrorKind::config, "unknown metric '" + std::string(s) + "' (expected dot|cosine)");
}

double score(std::span<const float> mention, std::span<const float> entity, Metric metric) {
  if (mention.size() != entity.size()) {
    throw Error(ErrorKind::precondition, "dimension mismatch: " + std::to_string(mention.size()) +
                                             " vs " + std::to_string(entity.size()));
  }
  const double d = kernels::dot(mention.data(), entity.data(), mention.size());
  if (metric == Metric::dot) return d;
  const double mn = std::sqrt(kernels::dot(mention.data(), mention.data(), mention.size()));
  const double en = std::sqrt(kernels::dot(entity.data(), entity.data(), entity.size()));
  if (mn == 0.0 || en == 0.0) throw Error(ErrorKind::precondition, "zero vector under cosine");
  return d / (mn * en);
}

std::vector<std::string> CandidateSet::ids() const {
  std::vector<std::string> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.entity_id);
  return out;
}

bool CandidateSet::contains(std::string_view entity_id) const {
  return rank_of(entity_id).has_value();
}

std::optional<std::size_t> CandidateSet::rank_of(std::string_view entity_id) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].entity_id == entity_id) return i + 1;
  }
  return std::nullopt;
}

EntityIndex::EntityIndex(const KnowledgeBase& kb, const EmbeddingStore& store)
    : kb_(&kb), dim_(store.dim()) {
  const auto alignment = validate_alignment(store, kb);
  if (!alignment.covers_kb()) {
    std::string listed;
    for (std::size_t i = 0; i < alignment.missing.size() && i < 5; ++i) {
      listed += (i ? ", " : "") + alignment.missing[i];
    }
    if (alignment.missing.size() > 5) listed += ", ...";
    throw Error(ErrorKind::validation, std::to_string(alignment.missing.size()) +
                                           " knowledge-base entities lack embeddings: " + listed);
  }
  matrix_.reserve(kb.size() * dim_);
  norms_.reserve(kb.size());
  for (const auto& e : kb.entities()) {
    const auto row = store.lookup(e.id);
    matrix_.insert(matrix_.end(), row.begin(), row.end());
    norms_.push_back(std::sqrt(kernels::dot(row.data(), row.data(), dim_)));
  }
}

kernels::MatrixView EntityIndex::view() const {
  return kernels::MatrixView{matrix_.data(), kb_->size(), dim_, norms_.data()};
}

double EntityIndex::check_query(std::span<const float> mention_vec, Metric metric) const {
  if (mention_vec.size() != dim_) {
    throw Error(ErrorKind::precondition, "dimension mismatch: mention " +
                                             std::to_string(mention_vec.size()) + " vs entities " +
                                             std::to_string(dim_));
  }
  if (metric != Metric::cosine) return 1.0;
  const double qn = std::sqrt(kernels::dot(mention_vec.data(), mention_vec.data(), dim_));
  if (qn == 0.0) throw Error(ErrorKind::precondition, "zero mention vector under cosine");
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    if (norms_[i] == 0.0) {
      throw Error(ErrorKind::precondition, "zero entity vector under cosine: " + kb_->at(i).id);
    }
  }
  return qn;
}

CandidateSet EntityIndex::top_k(std::span<const float> mention_vec, std::size_t k, Metric metric,
                                bool parallel) const {
  if (k == 0) throw Error(ErrorKind::precondition, "k must be >= 1");
  const double qn = check_query(mention_vec, metric);
  const auto best = parallel ? kernels::top_k_parallel(view(), mention_vec, qn, k, metric)
                             : kernels::top_k_serial(view(), mention_vec, qn, k, metric);
  CandidateSet out;
  out.k = k;
  out.metric = metric;
  out.candidates.reserve(best.size());
  for (const auto& s : best) out.candidates.push_back({kb_->at(s.position).id, s.score});
  return out;
}

std::vector<kernels::Scored> EntityIndex::rank_all(std::span<const float> mention_vec,
                                                   Metric metric) const {
  const double qn = check_query(mention_vec, metric);
  return kernels::top_k_serial(view(), mention_vec, qn, kb_->size(), metric);
}

const char* to_string(NegativeKind kind) { return kind == NegativeKind::hard ? "hard" : "random"; }

std::size_t hard_negative_count(std::size_t total, double hard_ratio) {
  const double raw = hard_ratio * static_cast<double>(total);
  // 0.3 * 10 evaluates to 3.0000000000000004; don't let that round up to 4.
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}


std::uint64_t mention_seed(std::uint64_t run_seed, std::string_view uid) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : uid) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h ^ (run_seed + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
}

std::vector<NegativeSample> mine_negatives(const EntityIndex& index, std::span<const float> mention_vec,
                                           std::string_view mention_uid, std::string_view gold_id,
                                           std::size_t total, double hard_ratio, std::uint64_t seed,
                                           Metric metric) {
  const auto& kb = index.kb();
  const auto gold_pos = kb.position(gold_id);
  if (!gold_pos) throw Error(ErrorKind::not_found, "gold id " + std::string(gold_id) + " not in knowledge base");
  if (!(hard_ratio >= 0.0 && hard_ratio <= 1.0)) {
    throw Error(ErrorKind::precondition, "hard_ratio must be within [0, 1]");
  }
  if (total >= kb.size() - 1) {
    throw Error(ErrorKind::precondition,
                "insufficient population: " + std::to_string(total) + " negatives requested from " +
                    std::to_string(kb.size()) + " entities (need total < N-1)");
  }

  const std::size_t hard_count = hard_negative_count(total, hard_ratio);
  std::vector<NegativeSample> out;
  out.reserve(total);
  std::vector<bool> taken(kb.size(), false);
  taken[*gold_pos] = true;

  if (hard_count > 0) {
    for (const auto& s : index.rank_all(mention_vec, metric)) {
      if (out.size() == hard_count) break;
      if (s.position == *gold_pos) continue;
      taken[s.position] = true;
      out.push_back({std::string(mention_uid), kb.at(s.position).id, NegativeKind::hard});
    }
  }

  std::vector<std::size_t> pool;
  pool.reserve(kb.size());
  for (std::size_t i = 0; i < kb.size(); ++i) {
    if (!taken[i]) pool.push_back(i);
  }
  std::mt19937_64 rng(seed);
  const std::size_t random_count = total - out.size();
  partial_shuffle(pool, random_count, rng);
  for (std::size_t i = 0; i < random_count; ++i) {
    out.push_back({std::string(mention_uid), kb.at(pool[i]).id, NegativeKind::random});
  }
  return out;
}

void export_training_pairs(const std::vector<TrainingPairInput>& inputs,
                           const std::filesystem::path& path) {
  std::ostringstream buf;
  for (const auto& in : inputs) {
    const Mention& m = *in.mention;
    if (!m.gold_id) {
      throw Error(ErrorKind::precondition, "mention " + m.uid + " has no gold id; cannot export pairs");
    }
    const auto prefix = text::tsv_cell(m.uid) + '\t' + text::tsv_cell(m.surface) + '\t' +
                        text::tsv_cell(m.context.value_or("")) + '\t';
    buf << prefix << *m.gold_id << "\tpos\n";
    for (const auto& n : in.negatives) {
      buf << prefix << n.entity_id << '\t' << (n.kind == NegativeKind::hard ? "hard_neg" : "rand_neg")
          << '\n';
    }
  }
  text::write_file_atomic(path, buf.str());
}

TrainingPairReport validate_training_pairs(const std::filesystem::path& path) {
  TrainingPairReport report;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::map<std::string, std::set<std::string>> seen;
  std::map<std::string, std::size_t> positives;
  std::string line;
  while (std::getline(in, line)) {
    ++report.rows;
    const auto cols = text::split(line, '\t');
    const auto where = "row " + std::to_string(report.rows);
    if (cols.size() != 5) {
      report.problems.push_back(where + ": expected 5 columns");
      continue;
    }
    const std::string uid(cols[0]);
    const std::string entity(cols[3]);
    const std::string_view label = cols[4];
    if (label != "pos" && label != "hard_neg" && label != "rand_neg") {
      report.problems.push_back(where + ": unknown label '" + std::string(label) + "'");
    }
    if (label == "pos") ++positives[uid];
    if (!seen[uid].insert(entity).second) {
      report.problems.push_back(where + ": entity " + entity + " repeated for mention " + uid);
    }
  }
  report.mentions = seen.size();
  for (const auto& [uid, _] : seen) {
    if (positives[uid] != 1) {
      report.problems.push_back("mention " + uid + " has " + std::to_string(positives[uid]) +
                                " positive rows");
    }
  }
  return report;
}

}  // namespace medlink
