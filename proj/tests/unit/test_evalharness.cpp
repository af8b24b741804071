#include <gtest/gtest.h>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/evalharness.hpp"
#include "medlink/text_util.hpp"
#include "toy.hpp"

using namespace medlink;

namespace {

using Lists = std::vector<std::vector<std::string>>;

EvalOptions eval_options(const std::string& model) {
  EvalOptions o;
  o.model = model;
  o.backend_label = model;
  o.parallelism = 2;
  return o;
}

EvalRun run_toy(const oracle::Toy& toy, MockKind kind, const std::vector<Mention>* ms = nullptr) {
  MockBackend backend(kind);
  UsageLedger ledger;
  return run_eval(ms ? *ms : toy.test, toy.context(), toy.student, eval_options(backend.describe()),
                  {backend, nullptr, ledger});
}

}  // namespace

TEST(Metrics, HandTracedRanks) {
  // Golds at ranks 1, 1, 1, 3.
  const Lists ranked{{"g", "x", "y"}, {"g", "x", "y"}, {"g", "x", "y"}, {"x", "y", "g"}};
  const std::vector<std::string> golds(4, "g");
  EXPECT_EQ(acc_at_k(ranked, golds, 1), 0.75);
  EXPECT_EQ(acc_at_k(ranked, golds, 5), 1.0);
  EXPECT_EQ(hits_at_k(ranked, golds, 2), 3u);
  const auto o1 = oracle::acc_from_ranks({1, 1, 1, 3}, 1);
  EXPECT_EQ(acc_at_k(ranked, golds, 1), o1.value());
}

TEST(Metrics, GoldAbsentIsAMiss) {
  const Lists ranked{{"a", "b"}, {"c", "d"}};
  EXPECT_EQ(acc_at_k(ranked, {"a", "z"}, 5), 0.5);
}

TEST(Metrics, EmptyInputIsUndefined) {
  try {
    acc_at_k({}, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_metric);
  }
  EXPECT_THROW(acc_at_k({{"a"}}, {"a"}, 0), Error);
  EXPECT_THROW(acc_at_k({{"a"}}, {"a", "b"}, 1), Error);
}

TEST(Metrics, RecallOverCandidateSets) {
  CandidateSet a, b;
  a.candidates = {{"x", 1}, {"y", 0}};
  b.candidates = {{"z", 1}};
  EXPECT_EQ(recall_at_k({a, b}, {"y", "q"}), 0.5);
}

TEST(Metrics, SandwichViolationIsALogicError) {
  MentionTrace t;
  t.uid = "u";
  t.gold_id = "g";
  t.evaluated = true;
  t.candidate_ids = {"a", "b"};
  t.ranked_ids = {"g", "a", "b"};  // cannot happen through the parser
  EXPECT_THROW(build_report({t}, EvalOptions{}), std::logic_error);
}

TEST(RunEval, IdentityMatchesRetrievalRanks) {
  const oracle::Toy toy;
  const auto run = run_toy(toy, MockKind::identity);
  const auto& r = run.report;
  EXPECT_EQ(r.n_evaluated, 8u);
  for (std::size_t k : {1, 5}) {
    const auto expected = oracle::acc_from_ranks(oracle::kToyRetrievalRanks, k);
    EXPECT_EQ(r.hits_at.at(k), expected.num) << k;
    EXPECT_EQ(r.acc_at.at(k), expected.value()) << k;
    EXPECT_EQ(r.acc_at.at(k), r.retrieval_acc_at.at(k));
  }
  EXPECT_EQ(r.acc_at.at(1), 0.375);
  EXPECT_EQ(r.acc_at.at(5), 0.75);
  EXPECT_EQ(r.recall_hits, oracle::acc_from_ranks(oracle::kToyRetrievalRanks, 6).num);
  EXPECT_EQ(r.recall_at_k_candidates, 0.875);
}

TEST(RunEval, OracleReachesRecall) {
  const oracle::Toy toy;
  const auto r = run_toy(toy, MockKind::oracle).report;
  EXPECT_EQ(r.acc_at.at(1), r.recall_at_k_candidates);
  EXPECT_EQ(r.acc_at.at(1), 0.875);
  EXPECT_EQ(r.acc_at.at(5), 0.875);
}

TEST(RunEval, ReverseMatchesHandTrace) {
  // Reversing six candidates moves rank r to 7 - r.
  const oracle::Toy toy;
  std::vector<std::size_t> reversed;
  for (auto rank : oracle::kToyRetrievalRanks) reversed.push_back(rank <= 6 ? 7 - rank : 0);
  const auto r = run_toy(toy, MockKind::reverse).report;
  EXPECT_EQ(r.acc_at.at(1), oracle::acc_from_ranks(reversed, 1).value());
  EXPECT_EQ(r.acc_at.at(5), oracle::acc_from_ranks(reversed, 5).value());
  EXPECT_EQ(r.acc_at.at(1), 0.125);
  EXPECT_EQ(r.acc_at.at(5), 0.5);
}

TEST(RunEval, SkipsUnlabelledAndHonoursStrictGold) {
  const oracle::Toy toy;
  auto ms = toy.test;
  ms[0].gold_id.reset();     // rank-1 hit removed from the denominator
  ms[1].gold_id = "E99";     // unknown gold
  MockBackend backend(MockKind::identity);
  UsageLedger ledger;
  auto opts = eval_options("m");
  auto r = run_eval(ms, toy.context(), toy.student, opts, {backend, nullptr, ledger}).report;
  EXPECT_EQ(r.n_skipped, 1u);
  EXPECT_EQ(r.n_evaluated, 7u);
  EXPECT_EQ(r.hits_at.at(1), 2u);  // mentions 3 and 6

  opts.strict_gold = true;
  r = run_eval(ms, toy.context(), toy.student, opts, {backend, nullptr, ledger}).report;
  EXPECT_EQ(r.n_skipped, 2u);
  EXPECT_EQ(r.n_evaluated, 6u);
}

TEST(RunEval, FailuresAreMissesAndCounted) {
  const oracle::Toy toy;
  class Flaky final : public CompletionBackend {
   public:
    CompletionResponse complete(const CompletionRequest& r) override {
      if (r.prompt_text.find("felt queasy") != std::string::npos) throw Error(ErrorKind::backend, "down");
      if (r.prompt_text.find("pounding head") != std::string::npos) return {"???", {}, ResponseSource::mock, 0};
      return {numbered_list(last_numbered_list(r.prompt_text)), {}, ResponseSource::mock, 0};
    }
    std::string describe() const override { return "flaky"; }
  } backend;
  UsageLedger ledger;
  const auto run = run_eval(toy.test, toy.context(), toy.student, eval_options("m"), {backend, nullptr, ledger});
  EXPECT_EQ(run.report.n_failed, 1u);
  EXPECT_EQ(run.report.n_unparseable, 1u);
  EXPECT_EQ(run.report.n_evaluated, 8u);
  EXPECT_EQ(run.report.hits_at.at(1), 1u);  // only mention 6 remains a top-1 hit
  EXPECT_FALSE(run.traces[0].error.empty());
  EXPECT_TRUE(run.traces[0].ranked_ids.empty());
}

TEST(RunEval, ReportAndTraces) {
  const oracle::Toy toy;
  oracle::TempDir dir("eval");
  auto run = run_toy(toy, MockKind::identity);
  write_traces(run.traces, dir / "t.jsonl");
  const auto lines = text::split(text::read_file(dir / "t.jsonl"), '\n');
  EXPECT_EQ(lines.size(), 9u);
  const auto first = nlohmann::json::parse(lines[0]);
  EXPECT_EQ(first["uid"], "test:1");
  EXPECT_EQ(first["candidates"].size(), 6u);
  const auto j = nlohmann::json::parse(run.report.to_json());
  EXPECT_EQ(j["acc_at"]["1"], 0.375);
  EXPECT_EQ(j["n_evaluated"], 8);
  EXPECT_EQ(j["config"]["k"], "6");
  EXPECT_EQ(j["config"]["metric"], "dot");
  EXPECT_NE(run.report.to_table().find("Acc@1"), std::string::npos);
}
