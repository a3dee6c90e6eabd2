#include <gtest/gtest.h>

#include "plansmith/error.hpp"
#include "plansmith/eval.hpp"
#include "plansmith/text.hpp"
#include "support.hpp"

using namespace plansmith;
using namespace plansmith::eval;

namespace {

refine::EpisodeResult episode(int optimal_length, int reward, double score = -1.0) {
  refine::EpisodeResult e;
  e.trajectory = testkit::synthetic_trajectory(2, 6, 2, "e" + std::to_string(optimal_length));
  e.trajectory.instruction.optimal_length = optimal_length;
  e.reward = reward;
  e.success = reward == 1;
  e.score = score < 0 ? reward : score;
  return e;
}

}  // namespace

TEST(Percent, HalfUpIntegerRounding) {
  EXPECT_EQ(percent(3, 4), 75.0);
  EXPECT_EQ(percent(1, 3), 33.33);
  EXPECT_EQ(percent(2, 3), 66.67);
  EXPECT_EQ(percent(1, 8), 12.5);     // 12.5 exactly
  EXPECT_EQ(percent(1, 800), 0.13);   // 0.125 rounds up
  EXPECT_EQ(percent(0, 5), 0.0);
  EXPECT_THROW(percent(1, 0), Error);
  EXPECT_EQ(round2(0.125), 0.13);
  EXPECT_EQ(round2(2.675), 2.68);
}

TEST(SuccessRate, Examples) {
  const std::vector<int> r{1, 0, 1, 1};
  EXPECT_EQ(text::fixed(success_rate(r), 2), "75.00");
  const std::vector<int> all{1, 1};
  EXPECT_EQ(text::fixed(success_rate(all), 2), "100.00");
  try {
    success_rate(std::vector<int>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::evaluation);
  }
}

TEST(AverageReward, Examples) {
  EXPECT_EQ(average_reward(std::vector<double>{1.0, 0.5}), 75.0);
  EXPECT_EQ(average_reward(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_THROW(average_reward(std::vector<double>{}), Error);
  EXPECT_THROW(average_reward(std::vector<double>{1.5}), Error);
  const std::vector<refine::EpisodeResult> eps{episode(3, 1), episode(3, 0), episode(3, 1)};
  EXPECT_EQ(average_reward(eps), success_rate(eps));
}

TEST(ByDifficulty, BucketsByOptimalLength) {
  const std::vector<refine::EpisodeResult> eps{episode(8, 1), episode(12, 0), episode(20, 1)};
  const auto m = by_difficulty(eps);
  EXPECT_EQ(m, (std::map<std::string, double>{{"Easy", 100.0}, {"Medium", 0.0}, {"Hard", 100.0}}));
  const std::vector<refine::EpisodeResult> easy_only{episode(2, 1)};
  EXPECT_EQ(by_difficulty(easy_only).size(), 1u);
}

TEST(Evaluate, AggregatesConsistently) {
  std::vector<refine::EpisodeResult> eps;
  for (int i = 0; i < 13; ++i) eps.push_back(episode(1 + (i * 7) % 24, i % 3 == 0 ? 0 : 1));
  const auto r = evaluate(eps);
  int total = 0;
  double weighted = 0;
  for (const auto& [name, b] : r.bucket_counts) {
    total += b.episodes;
    weighted += 100.0 * b.successes;
  }
  EXPECT_EQ(total, r.n_episodes);
  EXPECT_EQ(percent(static_cast<long long>(weighted / 100.0), total), r.success_rate);
  EXPECT_EQ(r.average_reward, r.success_rate);
  EXPECT_EQ(render_report(r, Format::json), render_report(evaluate(eps), Format::json));
  EXPECT_EQ(render_report(r, Format::text), render_report(evaluate(eps), Format::text));
}

TEST(TokenReport, LongOnlyAndLongPlusShort) {
  const std::vector<refine::EpisodeResult> eps{episode(2, 1), episode(2, 0)};
  const auto t = token_report(eps);
  EXPECT_EQ(t.steps, 4);
  EXPECT_EQ(t.mean_reasoning_tokens, 6.0);
  EXPECT_EQ(t.mean_thought_tokens, 8.0);
  auto zero = episode(2, 1);
  for (auto& s : zero.trajectory.steps) s.token_usage = {0, 0, 1};
  const std::vector<refine::EpisodeResult> z{zero};
  EXPECT_EQ(token_report(z).mean_thought_tokens, 0.0);
}

TEST(Table, BaselineFixtureRendersRows) {
  const auto rows = load_baselines(PLANSMITH_TEST_ASSET_DIR "/fixtures/token_baselines.json");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(render_row(rows[0]), "Deepseek-R1 | 671B | 620 | 56.70");
  EXPECT_EQ(render_row(rows[1]), "Qwen-3-Thinking | 8B | 763 | 57.45");
  EXPECT_EQ(render_row(rows[2]), "Ours | 8B | 112 | 83.16");
  const auto text = render_table(rows, Format::text);
  EXPECT_EQ(text.substr(0, text.find('\n')), "Models | Size | # Tokens | SR (%)");
  EXPECT_NE(render_table(rows, Format::csv).find("Deepseek-R1,671B,620,56.70\n"), std::string::npos);
  const auto j = nlohmann::json::parse(render_table(rows, Format::json));
  EXPECT_EQ(j[2].at("sr"), "83.16");
  EXPECT_THROW(parse_format("xml"), Error);
  EXPECT_THROW(load_baselines("/nonexistent.json"), Error);
}
