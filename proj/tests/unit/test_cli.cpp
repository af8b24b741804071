#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "medlink/cli.hpp"
#include "medlink/promptkit.hpp"
#include "medlink/text_util.hpp"
#include "fake_endpoint.hpp"
#include "oracles.hpp"

using namespace medlink;
using oracle::FakeEndpoint;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string toy(const std::string& name) { return (oracle::toy_dir() / name).string(); }
const std::string kConfig = toy("config.json");

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(run({}).code, cli::kExitConfig);
  EXPECT_EQ(run({"retrieve", "--bogus-flag"}).code, cli::kExitConfig);
}

TEST(Cli, EvaluateWithoutEmbeddingsNamesTheField) {
  const auto r = run({"evaluate", "--backend", "mock:identity", "--kb", toy("kb.tsv"), "--mentions",
                      toy("mentions.tsv"), "--template", (oracle::source_dir() / "templates/student_en.json").string(),
                      "--mention-embeddings", toy("mentions.emb.json")});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("entity_embeddings"), std::string::npos) << r.err;

  const auto r2 = run({"evaluate", "--config", kConfig, "--backend", "mock:identity", "--entity-embeddings",
                       "/nonexistent/e.json"});
  EXPECT_EQ(r2.code, cli::kExitConfig);
  EXPECT_NE(r2.err.find("entity_embeddings"), std::string::npos) << r2.err;
}

TEST(Cli, GenerateLimitZeroIsConfigError) {
  oracle::TempDir dir("cli-limit");
  EXPECT_EQ(run({"generate", "--config", kConfig, "--backend", "mock:identity", "--limit", "0", "--out",
                 (dir / "d.jsonl").string()})
                .code,
            cli::kExitConfig);
  EXPECT_EQ(run({"generate", "--config", kConfig, "--backend", "mock:identity", "--limit", "9", "--out",
                 (dir / "d.jsonl").string()})
                .code,
            cli::kExitConfig);
}

TEST(Cli, RemoteBackendNeedsAKey) {
  oracle::TempDir dir("cli-key");
  ::unsetenv("MEDLINK_API_KEY");
  const auto r = run({"generate", "--config", kConfig, "--out", (dir / "d.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("MEDLINK_API_KEY"), std::string::npos);
}

TEST(Cli, FullMockPipelineOnToyFixture) {
  oracle::TempDir dir("cli-full");
  auto p = [&](const std::string& n) { return (dir / n).string(); };

  EXPECT_EQ(run({"ingest", "--config", kConfig, "--report", p("ingest.json")}).code, 0);
  EXPECT_EQ(nlohmann::json::parse(text::read_file(p("ingest.json")))["accepted"], 8);

  auto r = run({"retrieve", "--config", kConfig, "--out", p("cands.jsonl")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("recall@6 = 7/8"), std::string::npos) << r.out;
  EXPECT_EQ(run({"retrieve", "--config", kConfig, "--serial", "--out", p("cands_serial.jsonl")}).code, 0);
  EXPECT_EQ(text::read_file(p("cands.jsonl")), text::read_file(p("cands_serial.jsonl")));

  r = run({"mine-negatives", "--config", kConfig, "--negatives", "10", "--out", p("pairs.tsv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(text::split(text::read_file(p("pairs.tsv")), '\n').size(), 8u * 11 + 1);

  r = run({"generate", "--config", kConfig, "--backend", "mock:oracle", "--cache-dir", p("cache"), "--ledger",
           p("ledger.json"), "--out", p("ds.jsonl")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(p("ds.jsonl.audit.jsonl")));
  EXPECT_EQ(run({"validate-dataset", "--dataset", p("ds.jsonl")}).code, 0);

  r = run({"evaluate", "--config", kConfig, "--backend", "mock:identity", "--report", p("report.json"), "--trace",
           p("trace.jsonl")});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(text::read_file(p("report.json")));
  EXPECT_EQ(report["acc_at"]["1"], 0.375);
  EXPECT_EQ(report["acc_at"]["5"], 0.75);
  EXPECT_EQ(report["recall_at_k_candidates"], 0.875);
  EXPECT_EQ(report["trace_path"], p("trace.jsonl"));
  EXPECT_EQ(report["config"]["config_sha256"].get<std::string>().size(), 64u);

  r = run({"cost-report", "--config", kConfig, "--ledger", p("ledger.json"), "--out", p("cost.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("toy-teacher"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(text::read_file(p("cost.json")))["unpriced"], 0);
}

TEST(Cli, WarmCacheRerunChangesNothing) {
  oracle::TempDir dir("cli-warm");
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  for (const auto* n : {"1", "2"}) {
    const auto r = run({"generate", "--config", kConfig, "--backend", "mock:reverse", "--cache-dir", p("cache"),
                        "--ledger", p(std::string("ledger") + n + ".json"), "--out", p(std::string("ds") + n + ".jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(text::read_file(p("ds1.jsonl")), text::read_file(p("ds2.jsonl")));
  EXPECT_EQ(text::read_file(p("ds1.jsonl.audit.jsonl")), text::read_file(p("ds2.jsonl.audit.jsonl")));
  const auto l2 = nlohmann::json::parse(text::read_file(p("ledger2.json")));
  EXPECT_EQ(l2["backend_calls"], 0);
  EXPECT_EQ(l2["models"]["toy-teacher"]["remote_calls"], 0);
  EXPECT_EQ(l2["cache_hits"], 8);
}

TEST(Cli, FewShotFromTrainUsesMentionsAfterTheLimit) {
  oracle::TempDir dir("cli-fewshot");
  const auto r = run({"generate", "--config", kConfig, "--backend", "mock:identity", "--limit", "4",
                      "--fewshot-from-train", "2", "--out", (dir / "d.jsonl").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run({"validate-dataset", "--dataset", (dir / "d.jsonl").string()}).code, 0);
}

TEST(Cli, IngestUnresolvedGold) {
  oracle::TempDir dir("cli-ingest");
  text::write_file_atomic(dir / "m.tsv", "E01\tqueasy\nE77\tmystery\n");
  const auto base = std::vector<std::string>{"ingest", "--kb", toy("kb.tsv"), "--mentions", (dir / "m.tsv").string()};
  auto r = run(base);
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  auto strict = base;
  strict.push_back("--strict-gold");
  EXPECT_EQ(run(strict).code, 0);
}

TEST(Cli, ValidationAndParseFailuresExitOne) {
  oracle::TempDir dir("cli-bad");
  text::write_file_atomic(dir / "bad.jsonl", "{\"instruction\": 1}\n");
  EXPECT_EQ(run({"validate-dataset", "--dataset", (dir / "bad.jsonl").string()}).code, cli::kExitValidation);
  text::write_file_atomic(dir / "kb.tsv", "E1\n");
  EXPECT_EQ(run({"ingest", "--kb", (dir / "kb.tsv").string()}).code, cli::kExitValidation);
}

TEST(Cli, StudentBackendSpeaksChatCompletion) {
  // The endpoint answers like a served student: it echoes the candidate list.
  FakeEndpoint ep([](const httplib::Request& req, httplib::Response& res, int) {
    const auto body = nlohmann::json::parse(req.body);
    const auto labels = last_numbered_list(body["messages"][0]["content"].get<std::string>());
    res.set_content(FakeEndpoint::ok_body(numbered_list(labels)), "application/json");
  });
  oracle::TempDir dir("cli-student");
  const auto r = run({"evaluate", "--config", kConfig, "--backend", "student", "--endpoint", ep.url(), "--report",
                      (dir / "r.json").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ep.calls(), 8);
  const auto report = nlohmann::json::parse(text::read_file(dir / "r.json"));
  EXPECT_EQ(report["acc_at"]["1"], 0.375);
  const auto sent = nlohmann::json::parse(ep.bodies()[0]);
  EXPECT_EQ(sent["model"], "student");
  EXPECT_EQ(sent["temperature"].get<double>(), 0.0);
}

TEST(Cli, BackendAuthFailureExitsThree) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int) { res.status = 401; });
  const auto r = run({"evaluate", "--config", kConfig, "--backend", "student", "--endpoint", ep.url()});
  EXPECT_EQ(r.code, cli::kExitBackend) << r.err;
}

TEST(Cli, HelpShowsDefaults) {
  auto r = run({"mine-negatives", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("15"), std::string::npos);
  EXPECT_NE(r.out.find("0.10"), std::string::npos);
  r = run({"generate", "--help"});
  for (const char* needle : {"--k", "6", "--temperature", "256", "--limit", "1000", "drop-unparseable-only"}) {
    EXPECT_NE(r.out.find(needle), std::string::npos) << needle;
  }
  r = run({"evaluate", "--help"});
  EXPECT_NE(r.out.find("1,5"), std::string::npos);
  for (const auto* sub : {"ingest", "import-embeddings", "retrieve", "validate-dataset", "cost-report"}) {
    EXPECT_EQ(run({sub, "--help"}).code, 0) << sub;
  }
}

TEST(Cli, CostReportRendersReferenceLedger) {
  const auto r = run({"cost-report", "--ledger",
                      (oracle::source_dir() / "data/reference/cost_comparison_ledger.json").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.294"), std::string::npos);
  EXPECT_EQ(run({"cost-report"}).code, cli::kExitConfig);
  EXPECT_EQ(run({"cost-report", "--ledger", "/nonexistent.json"}).code, cli::kExitConfig);
}

TEST(Cli, ImportEmbeddingsReportsAlignment) {
  oracle::TempDir dir("cli-import");
  text::write_file_atomic(dir / "v.txt", "E01\t1 0\nZZ\t0 1\n");
  const auto r = run({"import-embeddings", "--text", (dir / "v.txt").string(), "--out", (dir / "v.json").string(),
                      "--kb", toy("kb.tsv")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("orphan vector (not in KB): ZZ"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "v.bin"));
}
