#include <gtest/gtest.h>

#include <fstream>

#include "plansmith/context.hpp"
#include "plansmith/error.hpp"
#include "plansmith/flywheel.hpp"
#include "plansmith/policy.hpp"
#include "support.hpp"

using namespace plansmith;
using namespace plansmith::flywheel;
using plansmith::testkit::words_of;

namespace {

SeedEpisode episode(const std::string& id, const std::vector<std::string>& assistant_turns, bool success = true) {
  SeedEpisode ep;
  ep.episode_id = id;
  ep.instruction.task_id = "task-" + id;
  ep.instruction.text = "put the mug in the cabinet";
  ep.success = success;
  ep.transcript.push_back({Role::system, "SYS"});
  ep.transcript.push_back({Role::user, "put the mug in the cabinet\n\nyou are in the kitchen"});
  for (std::size_t i = 0; i < assistant_turns.size(); ++i) {
    ep.transcript.push_back({Role::assistant, assistant_turns[i]});
    if (i + 1 < assistant_turns.size()) ep.transcript.push_back({Role::user, "obs " + std::to_string(i + 2)});
  }
  return ep;
}

}  // namespace

TEST(Curate, ConvertsSuccessfulEpisodes) {
  const std::vector<SeedEpisode> eps{
      episode("a", {"<reasoning>think one</reasoning>\nAction: go to kitchen", "<reasoning>think two</reasoning>\nAction: wait"}),
      episode("b", {"<reasoning>r</reasoning>\nAction: wait"}, false),
      episode("c", {"<reasoning>r</reasoning>\nAction: wait", "Action: wait"}),
      episode("d", {"<reasoning>r</reasoning>\nAction: a\nAction: b"}),
  };
  const auto r = curate_seeds(eps);
  ASSERT_EQ(r.trajectories.size(), 1u);
  EXPECT_EQ(r.unsuccessful, 1);
  ASSERT_EQ(r.dropped.size(), 2u);
  EXPECT_EQ(r.dropped[0].episode_id, "c");
  EXPECT_EQ(r.dropped[0].step, 2);
  EXPECT_EQ(r.dropped[1].episode_id, "d");
  EXPECT_EQ(r.dropped[1].step, 1);
  const auto& t = r.trajectories[0];
  ASSERT_EQ(t.steps.size(), 2u);
  EXPECT_EQ(t.steps[0].observation, "you are in the kitchen");
  EXPECT_EQ(t.steps[1].observation, "obs 2");
  EXPECT_EQ(t.steps[0].long_thought, "think one");
  EXPECT_TRUE(t.steps[0].short_thought.empty());
  EXPECT_EQ(t.steps[1].action, "wait");
  EXPECT_EQ(t.source, TrajectorySource::seed);
  EXPECT_EQ(t.final_reward, 1);
  EXPECT_NO_THROW(t.validate());
}

TEST(Curate, CommittedFixtureYieldsExpectedCounts) {
  const auto eps = load_seed_episodes(PLANSMITH_TEST_ASSET_DIR "/fixtures/seeds.jsonl");
  ASSERT_EQ(eps.size(), 12u);
  const auto r = curate_seeds(eps);
  EXPECT_EQ(r.trajectories.size(), 9u);
  EXPECT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.unsuccessful, 2);
  // Fixture actions replay to success in MiniWorld.
  for (const auto& t : r.trajectories) {
    env::MiniWorld w;
    w.reset(t.instruction);
    env::StepOutcome last;
    for (const auto& q : t.steps) last = w.step(q.action);
    EXPECT_EQ(last.reward, 1) << t.instruction.task_id;
  }
}

TEST(Distill, BudgetFormula) {
  EXPECT_EQ(token_budget(100), 60);
  EXPECT_EQ(token_budget(10), 10);  // floor above length is capped at the length
  EXPECT_EQ(token_budget(40), 32);
  EXPECT_EQ(token_budget(54), 32);
  EXPECT_EQ(token_budget(55), 33);
  EXPECT_EQ(token_budget(5, {.rho = 0.5, .floor_tokens = 1}), 2);
  EXPECT_TRUE(within_budget(60, 100));
  EXPECT_FALSE(within_budget(61, 100));
}

TEST(Distill, AcceptsFirstCandidateWithinBudget) {
  teacher::FunctionTeacher t([](const std::vector<ChatMessage>&) { return std::string("<reasoning>short plan</reasoning>"); });
  const auto r = distill(words_of("L", 80), t);
  EXPECT_EQ(r.short_thought, "short plan");
  EXPECT_EQ(r.attempts, 1);
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(t.calls(), 1);
}

TEST(Distill, RetriesThenTruncates) {
  int call = 0;
  teacher::FunctionTeacher t([&](const std::vector<ChatMessage>& msgs) {
    EXPECT_NE(msgs.back().content.find("<reasoning>"), std::string::npos);
    ++call;
    return words_of("V", 200);  // always longer than the long thought
  });
  DistillOptions opts;
  opts.max_attempts = 3;
  const auto r = distill(words_of("L", 100), t, opts);
  EXPECT_EQ(r.attempts, 3);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(context::count_tokens(r.short_thought), 60);
  EXPECT_EQ(r.short_thought, words_of("V", 60));
  EXPECT_EQ(call, 3);
}

TEST(Distill, EmptyCandidatesFallBackToLongThought) {
  teacher::FunctionTeacher t([](const std::vector<ChatMessage>&) { return std::string("   "); });
  const auto r = distill(words_of("L", 50), t);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.short_thought, words_of("L", 32));
  EXPECT_THROW(distill("  ", t), Error);
}

TEST(Distill, TeacherErrorsPropagate) {
  teacher::FunctionTeacher t([](const std::vector<ChatMessage>&) -> std::string {
    throw Error(ErrorKind::backend, "down");
  });
  EXPECT_THROW(distill("a b c", t), Error);
}

TEST(Distill, FillsOnlyEmptyShortThoughts) {
  auto a = testkit::synthetic_trajectory(3, 40, 0, "a");
  a.steps[1].short_thought = "kept";
  teacher::FunctionTeacher t([](const std::vector<ChatMessage>&) { return std::string("distilled plan"); });
  DistillStats stats;
  const auto out = distill_trajectories({a}, t, {}, &stats);
  EXPECT_EQ(out[0].steps[0].short_thought, "distilled plan");
  EXPECT_EQ(out[0].steps[1].short_thought, "kept");
  EXPECT_EQ(stats.steps, 2);
  EXPECT_EQ(stats.teacher_calls, 2);
  EXPECT_EQ(stats.truncated, 0);
}

TEST(Expand, FillsLongThoughtsAndSkipsFailures) {
  auto seed = testkit::synthetic_trajectory(3, 10, 2, "seed");
  std::vector<Trajectory> targets;
  for (int i = 0; i < 3; ++i) {
    targets.push_back(flywheel::plan_trajectory(env::generate_task(env::Difficulty::easy, 40 + i)));
  }
  const std::string bad_text = targets[1].instruction.text;
  teacher::FunctionTeacher t([&](const std::vector<ChatMessage>& msgs) -> std::string {
    const auto& user = msgs.back().content;
    EXPECT_NE(user.find("Example 1 reasoning:"), std::string::npos);
    if (user.find(bad_text) != std::string::npos) return "";
    return "<reasoning>Okay, so the next move follows.</reasoning>";
  });
  const auto r = expand({&seed, 1}, targets, t, 3);
  EXPECT_EQ(r.trajectories.size(), 2u);
  EXPECT_EQ(r.skipped, 1);
  ASSERT_EQ(r.errors.size(), 1u);
  for (const auto& traj : r.trajectories) {
    EXPECT_EQ(traj.source, TrajectorySource::synthetic_expansion);
    for (const auto& q : traj.steps) EXPECT_EQ(q.long_thought, "Okay, so the next move follows.");
  }
  EXPECT_EQ(expand({&seed, 1}, targets, t, 0).trajectories.size(), 0u);
  EXPECT_THROW(expand({}, targets, t, 1), Error);
}

TEST(Expand, TargetMessagesEndWithBareAction) {
  const auto traj = testkit::synthetic_trajectory(3, 4, 2, "m");
  const auto j = nlohmann::json::parse(render_target_messages(traj, 2));
  ASSERT_EQ(j.size(), 4u);
  EXPECT_EQ(j[3].at("content"), "Action: " + traj.steps[1].action);
  EXPECT_EQ(j[1].at("content"), history_assistant_content(traj.steps[0].short_thought, traj.steps[0].action));
  EXPECT_THROW(render_target_messages(traj, 0), Error);
}

TEST(PlanTrajectory, IsSuccessfulOracleReplay) {
  const auto task = env::generate_task(env::Difficulty::medium, 3);
  const auto t = plan_trajectory(task);
  EXPECT_EQ(t.final_reward, 1);
  EXPECT_EQ(static_cast<int>(t.steps.size()), task.instruction.optimal_length);
}

TEST(Assemble, ReportsEveryIncompleteStep) {
  auto a = testkit::synthetic_trajectory(3, 5, 2, "a");
  a.steps[0].short_thought.clear();
  a.steps[2].long_thought.clear();
  try {
    assemble_quaternions({a});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::assembly);
    EXPECT_NE(std::string(e.what()).find("steps 1, 3"), std::string::npos) << e.what();
  }
  auto b = testkit::synthetic_trajectory(2, 5, 2, "b");
  b.steps[0].long_thought = "  spaced \n\n text ";
  const auto out = assemble_quaternions({b});
  EXPECT_EQ(out[0].steps[0].long_thought, "spaced\ntext");
  EXPECT_EQ(out[0].steps[0].token_usage.long_tokens, 2);
  EXPECT_NO_THROW(out[0].validate());
}

TEST(ExportSft, WritesOneLinePerStep) {
  testkit::TempDir dir;
  DatasetStore store(dir / "ds");
  const std::vector<Trajectory> trajs{testkit::synthetic_trajectory(2, 5, 2, "a"), testkit::synthetic_trajectory(3, 5, 2, "b")};
  const auto d = store.create(trajs);
  const auto path = dir / "sft.jsonl";
  EXPECT_EQ(export_sft(d, path, "SYS"), 5u);
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const int step = j.at("target_step");
    EXPECT_EQ(j.at("messages").size(), static_cast<std::size_t>(2 * step));
    EXPECT_TRUE(j.at("target").contains("long_thought"));
    ++n;
  }
  EXPECT_EQ(n, 5);
}

TEST(ExportSft, ShapeCheckRejectsMalformed) {
  SFTExemplar ex;
  ex.target_step = 1;
  ex.input_messages = {{Role::system, "s"}, {Role::assistant, "x"}};
  EXPECT_THROW(check_exemplar_shape(ex), Error);
  ex.input_messages = {{Role::system, "s"}, {Role::user, "u"}};
  EXPECT_NO_THROW(check_exemplar_shape(ex));
  ex.target_step = 2;
  EXPECT_THROW(check_exemplar_shape(ex), Error);
}
