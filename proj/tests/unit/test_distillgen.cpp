#include <gtest/gtest.h>

#include <json.hpp>

#include "medlink/distillgen.hpp"
#include "medlink/errors.hpp"
#include "medlink/response_cache.hpp"
#include "medlink/text_util.hpp"
#include "toy.hpp"

using namespace medlink;

namespace {

GenerateOptions options(std::size_t limit, FilterPolicy filter = FilterPolicy::drop_unparseable_only) {
  GenerateOptions o;
  o.limit = limit;
  o.filter = filter;
  o.teacher_model = "toy-teacher";
  o.parallelism = 3;
  return o;
}

// Answers with fixed text for every prompt, or fails.
class ScriptedBackend final : public CompletionBackend {
 public:
  explicit ScriptedBackend(std::function<std::string(const CompletionRequest&)> fn) : fn_(std::move(fn)) {}
  CompletionResponse complete(const CompletionRequest& r) override {
    CompletionResponse out;
    out.text = fn_(r);
    out.usage = {10, 5};
    out.source = ResponseSource::mock;
    return out;
  }
  std::string describe() const override { return "scripted"; }

 private:
  std::function<std::string(const CompletionRequest&)> fn_;
};

}  // namespace

TEST(Generate, OracleRecordsAreValidAndGoldFirst) {
  const oracle::Toy toy;
  MockBackend backend(MockKind::oracle);
  UsageLedger ledger;
  const auto result = generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(8),
                                       {backend, nullptr, ledger});
  EXPECT_EQ(result.processed, 8u);
  ASSERT_EQ(result.records.size(), 8u);
  EXPECT_EQ(result.audit.size(), 8u);
  EXPECT_EQ(result.gold_in_candidates, 7u);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& rec = result.records[i];
    EXPECT_EQ(rec.meta.mention_uid, "train:" + std::to_string(i + 1));
    EXPECT_EQ(rec.meta.candidate_ids.size(), 6u);
    EXPECT_TRUE(rec.meta.clean);
    EXPECT_EQ(rec.meta.teacher_model, "toy-teacher");
    const bool gold_in = oracle::kToyRetrievalRanks[i] <= 6;
    EXPECT_EQ(rec.meta.gold_in_candidates, gold_in);
    if (gold_in) EXPECT_EQ(rec.meta.ranked_ids[0], *toy.train[i].gold_id);
    // The instruction is the student rendering: no examples, no format section.
    EXPECT_EQ(rec.instruction.find("Example 1"), std::string::npos);
    EXPECT_EQ(last_numbered_list(rec.instruction).size(), 6u);
  }
  std::string text;
  for (const auto& r : result.records) text += r.to_json_line() + "\n";
  const auto report = validate_dataset_text(text);
  EXPECT_TRUE(report.pass());
  EXPECT_EQ(report.records, 8u);
}

TEST(Generate, RecordJsonShape) {
  const oracle::Toy toy;
  MockBackend backend(MockKind::identity);
  UsageLedger ledger;
  const auto result = generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(1),
                                       {backend, nullptr, ledger});
  const auto j = nlohmann::ordered_json::parse(result.records[0].to_json_line());
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"instruction", "output", "meta"}));
  EXPECT_EQ(j["output"], "nausea\nvomiting\nabdominal pain\ndizziness\ndiarrhoea\nheadache");
  EXPECT_EQ(j["meta"]["candidate_ids"], nlohmann::json({"E01", "E02", "E10", "E05", "E11", "E03"}));
}

TEST(Generate, LimitBounds) {
  const oracle::Toy toy;
  MockBackend backend(MockKind::identity);
  UsageLedger ledger;
  EXPECT_THROW(generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(0), {backend, nullptr, ledger}),
               Error);
  EXPECT_THROW(generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(9), {backend, nullptr, ledger}),
               Error);
  const auto r = generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(3), {backend, nullptr, ledger});
  EXPECT_EQ(r.processed, 3u);
  EXPECT_EQ(r.records.back().meta.mention_uid, "train:3");
}

TEST(Generate, FilterPolicies) {
  const oracle::Toy toy;
  // Mention 1 gets gibberish, mention 2 a partial answer, the rest a full echo.
  ScriptedBackend backend([](const CompletionRequest& r) -> std::string {
    const auto labels = last_numbered_list(r.prompt_text);
    if (r.prompt_text.find("felt queasy") != std::string::npos) return "no idea";
    if (r.prompt_text.find("threw up") != std::string::npos) return "1. " + labels[1];
    return numbered_list(labels);
  });
  UsageLedger ledger;
  const CompletionServices services{backend, nullptr, ledger};
  auto run = [&](FilterPolicy f) {
    return generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(4, f), services);
  };

  const auto keep = run(FilterPolicy::keep_all);
  ASSERT_EQ(keep.records.size(), 4u);
  EXPECT_FALSE(keep.records[0].meta.clean);
  EXPECT_EQ(keep.records[0].meta.ranked_ids, keep.records[0].meta.candidate_ids);
  EXPECT_FALSE(keep.records[1].meta.clean);
  EXPECT_EQ(keep.audit[0].outcome, "emitted");

  const auto drop = run(FilterPolicy::drop_unparseable_only);
  ASSERT_EQ(drop.records.size(), 3u);
  EXPECT_EQ(drop.audit[0].outcome, "filtered:unparseable");
  EXPECT_EQ(drop.audit[1].outcome, "emitted");
  EXPECT_EQ(drop.audit[1].repairs.size(), 5u);

  const auto strict = run(FilterPolicy::strict_clean);
  ASSERT_EQ(strict.records.size(), 2u);
  EXPECT_EQ(strict.audit[1].outcome, "filtered:not_clean");

  for (const auto* r : {&keep, &drop, &strict}) {
    std::string text;
    for (const auto& rec : r->records) text += rec.to_json_line() + "\n";
    EXPECT_TRUE(validate_dataset_text(text).pass());
  }
}

TEST(Generate, BackendFailuresAreAuditedAndSkipped) {
  const oracle::Toy toy;
  ScriptedBackend backend([](const CompletionRequest& r) -> std::string {
    if (r.prompt_text.find("pounding head") != std::string::npos) throw Error(ErrorKind::backend, "HTTP 503");
    return numbered_list(last_numbered_list(r.prompt_text));
  });
  UsageLedger ledger;
  const auto r = generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(8),
                                  {backend, nullptr, ledger});
  EXPECT_EQ(r.backend_failures, 1u);
  EXPECT_EQ(r.records.size(), 7u);
  EXPECT_EQ(r.audit[2].outcome, "failed:backend");
  EXPECT_NE(r.audit[2].note.find("503"), std::string::npos);
}

TEST(Generate, WarmCacheIsByteIdenticalWithNoBackendCalls) {
  const oracle::Toy toy;
  oracle::TempDir dir("gen-cache");
  ResponseCache cache(dir / "cache");
  MockBackend backend(MockKind::oracle);
  UsageLedger cold, warm;
  const auto a = generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(8),
                                  {backend, &cache, cold});
  const auto b = generate_dataset(toy.train, toy.context(), toy.teacher, toy.student, options(8),
                                  {backend, &cache, warm});
  write_dataset(a.records, dir / "a.jsonl");
  write_dataset(b.records, dir / "b.jsonl");
  EXPECT_EQ(text::read_file(dir / "a.jsonl"), text::read_file(dir / "b.jsonl"));
  EXPECT_EQ(cold.backend_calls(), 8u);
  EXPECT_EQ(warm.backend_calls(), 0u);
  EXPECT_EQ(warm.cache_hits(), 8u);
}

TEST(Generate, MissingMentionVectorIsRejected) {
  const oracle::Toy toy;
  auto ms = toy.train;
  ms[0].uid = "train:99";
  MockBackend backend(MockKind::identity);
  UsageLedger ledger;
  EXPECT_THROW(generate_dataset(ms, toy.context(), toy.teacher, toy.student, options(1), {backend, nullptr, ledger}),
               Error);
}

TEST(Validate, CatchesBrokenRecords) {
  const std::string good =
      R"({"instruction":"Q\n1. a\n2. b","output":"b\na","meta":{"mention_uid":"u1","candidate_ids":["A","B"],"ranked_ids":["B","A"],"clean":true,"gold_in_candidates":true,"teacher_model":"t"}})";
  EXPECT_TRUE(validate_dataset_text(good + "\n").pass());

  auto with = [&](const std::string& from, const std::string& to) {
    auto s = good;
    s.replace(s.find(from), from.size(), to);
    return validate_dataset_text(s + "\n");
  };
  EXPECT_FALSE(with(R"("output":"b\na")", R"("output":"b\nb")").pass());
  EXPECT_FALSE(with(R"("output":"b\na")", R"("output":"b")").pass());
  EXPECT_FALSE(with(R"("ranked_ids":["B","A"])", R"("ranked_ids":["A","B"])").pass());
  EXPECT_FALSE(with(R"("ranked_ids":["B","A"])", R"("ranked_ids":["B","C"])").pass());
  EXPECT_FALSE(with(R"("candidate_ids":["A","B"])", R"("candidate_ids":["A"])").pass());
  EXPECT_FALSE(with(R"("clean":true,)", "").pass());
  EXPECT_FALSE(validate_dataset_text("not json\n").pass());

  const auto dup = validate_dataset_text(good + "\n" + good + "\n");
  EXPECT_TRUE(dup.pass());
  EXPECT_EQ(dup.warnings(), 1u);
  EXPECT_EQ(dup.records, 2u);
}
