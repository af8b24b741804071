#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "medlink/corpus.hpp"
#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"
#include "oracles.hpp"

using namespace medlink;

namespace {

KnowledgeBase kb_from(const std::string& text) {
  std::istringstream in(text);
  return parse_kb(in);
}

std::vector<Mention> mentions_from(const std::string& text, MentionFormat f, Split s = Split::test) {
  std::istringstream in(text);
  return parse_mentions(in, f, s);
}

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::io;
}

}  // namespace

TEST(KnowledgeBase, TwoLinesIndexedInFileOrder) {
  const auto kb = kb_from("E1\taphakia\nE2\tmyopia\n");
  ASSERT_EQ(kb.size(), 2u);
  EXPECT_EQ(kb.position("E1"), 0u);
  EXPECT_EQ(kb.position("E2"), 1u);
  EXPECT_EQ(kb.entity("E2").name, "myopia");
  EXPECT_FALSE(kb.contains("E3"));
  EXPECT_EQ(kind_of([&] { kb.entity("E3"); }), ErrorKind::not_found);
}

TEST(KnowledgeBase, EmptyFileIsRejected) {
  try {
    kb_from("");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
    EXPECT_NE(std::string(e.what()).find("empty knowledge base"), std::string::npos);
  }
}

TEST(KnowledgeBase, OneColumnLineReportsLineNumber) {
  try {
    kb_from("E1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    kb_from("E1\ta\nE2\tb\tc\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(KnowledgeBase, DuplicateIdIsConflict) {
  EXPECT_EQ(kind_of([] { kb_from("E1\ta\nE1\tb\n"); }), ErrorKind::conflict);
}

TEST(KnowledgeBase, BlankNameIsRejected) {
  EXPECT_EQ(kind_of([] { kb_from("E1\t   \n"); }), ErrorKind::parse);
}

TEST(KnowledgeBase, SaveLoadRoundTripsByteExactly) {
  const std::string text = "E1\taphakia\nE2\tmyopia\nC0027497\tnausea and vomiting\nH26.9\t白内障\n";
  const auto kb = kb_from(text);
  std::ostringstream out;
  write_kb(out, kb);
  EXPECT_EQ(out.str(), text);

  oracle::TempDir dir("kb");
  save_kb(kb, dir / "kb.tsv");
  EXPECT_EQ(text::read_file(dir / "kb.tsv"), text);
  EXPECT_EQ(load_kb(dir / "kb.tsv").entities(), kb.entities());
}

TEST(Mentions, AskAPatientLineHasNoContext) {
  const auto ms = mentions_from("C01\tnausea\tfelt queasy\n", MentionFormat::ask_a_patient);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].surface, "felt queasy");
  EXPECT_EQ(ms[0].gold_id, "C01");
  EXPECT_FALSE(ms[0].context.has_value());
  EXPECT_EQ(ms[0].uid, "test:1");
}

TEST(Mentions, NormalizedLineWithContext) {
  const auto ms = mentions_from("E1\t人工晶体眼\t术后人工晶体眼状态\nE2\tmyopia\n", MentionFormat::normalized_tsv,
                                Split::train);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].context, "术后人工晶体眼状态");
  EXPECT_EQ(ms[0].uid, "train:1");
  EXPECT_FALSE(ms[1].context.has_value());
  EXPECT_EQ(ms[1].uid, "train:2");
}

TEST(Mentions, EmptyGoldColumnMeansUnlabelled) {
  const auto ms = mentions_from("\tsomething odd\n", MentionFormat::normalized_tsv);
  EXPECT_FALSE(ms[0].gold_id.has_value());
}

TEST(Mentions, CrlfIsTolerated) {
  const auto ms = mentions_from("E1\tmyopia\tshort sighted\r\n", MentionFormat::normalized_tsv);
  EXPECT_EQ(*ms[0].context, "short sighted");
}

TEST(Mentions, MalformedLinesReportLineNumbers) {
  try {
    mentions_from("E1\ta\nE1\n", MentionFormat::normalized_tsv);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    mentions_from("C1\tname\n", MentionFormat::ask_a_patient);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(mentions_from("E1\t\n", MentionFormat::normalized_tsv), ParseError);
}

TEST(Mentions, FoldPaths) {
  EXPECT_EQ(ask_a_patient_fold_path("d", "AskAPatient.fold-0", Split::test).filename(), "AskAPatient.fold-0.test.txt");
  EXPECT_EQ(ask_a_patient_fold_path("d", "0", Split::val).filename(), "0.validation.txt");
  EXPECT_EQ(parse_split("validation"), Split::val);
}

TEST(Mentions, WriteParseRoundTrip) {
  const std::string text = "E1\tmyopia\tshort sighted\n\tfoo\nE2\tbar\tctx\n";
  const auto ms = mentions_from(text, MentionFormat::normalized_tsv);
  std::ostringstream out;
  write_mentions(out, ms);
  EXPECT_EQ(out.str(), text);
}

TEST(Ingest, UnresolvedGoldIsReportedNotDropped) {
  const auto kb = kb_from("E1\ta\nE2\tb\n");
  const auto ms = mentions_from("E1\tx\nE9\ty\n\tz\nE2\tw\n", MentionFormat::normalized_tsv);
  const auto report = check_mentions(ms, kb);
  EXPECT_EQ(report.mention_lines, 4u);
  ASSERT_EQ(report.rejected.size(), 1u);
  EXPECT_EQ(report.rejected[0].line, 2u);
  EXPECT_EQ(report.rejected[0].uid, "test:2");
  EXPECT_EQ(report.accepted + report.rejected.size(), report.mention_lines);
}

TEST(WindowContext, UnderBudgetIsUnchanged) {
  const std::string ctx(100, 'a');
  EXPECT_EQ(window_context(ctx, "a", 256), ctx);
}

TEST(WindowContext, CentersOnMention) {
  EXPECT_EQ(window_context("aaaaaXbbbbb", "X", 5), "aaXbb");
  // Odd spare budget: the extra character goes right.
  EXPECT_EQ(window_context("aaaaaXbbbbb", "X", 4), "aXbb");
}

TEST(WindowContext, AbsentMentionTakesPrefix) {
  EXPECT_EQ(window_context("abcdefgh", "zz", 4), "abcd");
}

TEST(WindowContext, ShiftsBudgetWhenOneSideIsShort) {
  EXPECT_EQ(window_context("Xbbbbbbbb", "X", 5), "Xbbbb");
  EXPECT_EQ(window_context("aaaaaaaaX", "X", 5), "aaaaX");
}

TEST(WindowContext, CountsCodePointsNotBytes) {
  const std::string ctx = "术后人工晶体眼状态良好";
  const auto w = window_context(ctx, "晶体", 4);
  EXPECT_EQ(w, "工晶体眼");
  EXPECT_EQ(text::codepoint_length(w), 4u);
}

TEST(WindowContext, PropertyContainsMentionWithinBudget) {
  std::mt19937 rng(11);
  const std::string alphabet = "abX ";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string ctx(rng() % 60, ' ');
    for (auto& c : ctx) c = alphabet[rng() % alphabet.size()];
    std::string mention(1 + rng() % 4, ' ');
    for (auto& c : mention) c = alphabet[rng() % alphabet.size()];
    if (rng() % 2) ctx.insert(rng() % (ctx.size() + 1), mention);
    const std::size_t max = mention.size() + rng() % 20;
    const auto w = window_context(ctx, mention, max);
    ASSERT_LE(w.size(), max) << ctx << " / " << mention;
    if (ctx.find(mention) != std::string::npos) {
      ASSERT_NE(w.find(mention), std::string::npos) << ctx << " / " << mention << " / " << max;
      ASSERT_NE(ctx.find(w), std::string::npos);
    } else {
      ASSERT_EQ(w, ctx.substr(0, std::min(max, ctx.size())));
    }
  }
}
