#include <gtest/gtest.h>

#include <random>

#include "plansmith/context.hpp"
#include "plansmith/error.hpp"
#include "support.hpp"

using namespace plansmith;
using namespace plansmith::context;
using plansmith::testkit::synthetic_trajectory;

TEST(CountTokens, CountsWhitespaceSeparatedRuns) {
  EXPECT_EQ(count_tokens(""), 0);
  EXPECT_EQ(count_tokens("   \n\t "), 0);
  EXPECT_EQ(count_tokens("a"), 1);
  EXPECT_EQ(count_tokens("  go to  kitchen\n"), 3);
}

TEST(CountTokens, AdditiveOverSpaceJoin) {
  std::mt19937_64 rng(7);
  const std::string alphabet = "ab \n\tc.";
  auto random_text = [&] {
    std::string s;
    const int len = static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_text();
    const auto b = random_text();
    EXPECT_EQ(count_tokens(a + " " + b), count_tokens(a) + count_tokens(b)) << '"' << a << "\" + \"" << b << '"';
  }
}

TEST(Assemble, FirstStepHasSystemAndTask) {
  const auto ctx = assemble("do it", {}, "you see a box", {.system_prompt = "SYS"});
  ASSERT_EQ(ctx.messages.size(), 2u);
  EXPECT_EQ(ctx.step, 1);
  EXPECT_EQ(ctx.messages[0], (ChatMessage{Role::system, "SYS"}));
  EXPECT_EQ(ctx.messages[1], (ChatMessage{Role::user, "do it\n\nyou see a box"}));
  EXPECT_EQ(ctx.total_tokens, 1 + 2 + 4);
}

TEST(Assemble, HistoryKeepsShortThoughtsOnly) {
  const auto t = synthetic_trajectory(5, 20, 4, "h");
  for (std::size_t step = 1; step <= t.steps.size(); ++step) {
    const auto hist = history_of(t, step - 1);
    const auto ctx = assemble(t.instruction.text, hist, t.steps[step - 1].observation, {.system_prompt = "S"});
    ASSERT_EQ(ctx.messages.size(), 2 * step);
    std::string all;
    for (const auto& m : ctx.messages) all += m.content + "\n";
    for (std::size_t i = 0; i < step - 1; ++i) {
      EXPECT_EQ(all.find(t.steps[i].long_thought), std::string::npos);
      EXPECT_NE(all.find(t.steps[i].short_thought), std::string::npos);
      EXPECT_NE(all.find(t.steps[i].action), std::string::npos);
    }
  }
}

TEST(Assemble, RejectsHistoryGaps) {
  std::vector<HistoryStep> hist{{1, "o1", "p1", "wait"}, {3, "o3", "p3", "wait"}};
  try {
    assemble("x", hist, "o");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
}

TEST(Assemble, BudgetDropsOldestSteps) {
  const auto t = synthetic_trajectory(6, 10, 3, "b");
  const auto hist = history_of(t, 5);
  const auto full = assemble(t.instruction.text, hist, t.steps[5].observation);
  EXPECT_FALSE(full.truncated);
  const auto cut = assemble(t.instruction.text, hist, t.steps[5].observation, {.token_budget = full.total_tokens - 1});
  EXPECT_TRUE(cut.truncated);
  EXPECT_EQ(cut.dropped_steps, 1);
  EXPECT_LE(cut.total_tokens, full.total_tokens - 1);
  EXPECT_EQ(cut.messages.size(), full.messages.size() - 2);
  EXPECT_EQ(cut.messages[1].content.find(t.steps[0].observation), std::string::npos);
  // A budget below the irreducible part drops every history step and still returns.
  const auto floor = assemble(t.instruction.text, hist, t.steps[5].observation, {.token_budget = 1});
  EXPECT_EQ(floor.dropped_steps, 5);
  EXPECT_EQ(floor.messages.size(), 2u);
}

TEST(Assemble, CustomCounter) {
  AssembleOptions opts;
  opts.counter = [](std::string_view s) { return static_cast<int>(s.size()); };
  const auto ctx = assemble("ab", {}, "cd", opts);
  EXPECT_EQ(ctx.total_tokens, 6);
}

TEST(FusionReport, ClosedFormTotals) {
  for (int n : {1, 2, 5, 9}) {
    const auto t = synthetic_trajectory(n, 100, 10, "f");
    const auto r = fusion_report(t);
    long long expected_short = 0;
    for (int step = 1; step <= n; ++step) expected_short += (step - 1) * 10;
    EXPECT_EQ(r.fused_thought_tokens, expected_short);
    EXPECT_EQ(r.full_thought_tokens, expected_short * 10);
    if (n > 1) EXPECT_EQ(r.thought_ratio, 0.1);
    EXPECT_EQ(r.fused_total - r.fused_thought_tokens, r.overhead_tokens);
    EXPECT_LE(r.fused_total, r.full_total);
  }
  const auto j = to_json(fusion_report(synthetic_trajectory(3, 100, 10)));
  EXPECT_EQ(j.at("fused_thought_tokens"), 30);
  EXPECT_EQ(j.at("full_thought_tokens"), 300);
}
