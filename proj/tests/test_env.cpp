#include <gtest/gtest.h>

#include <deque>
#include <unordered_set>

#include "plansmith/env.hpp"
#include "plansmith/error.hpp"
#include "support.hpp"

using namespace plansmith;
using namespace plansmith::env;

namespace {

// Independent shortest-path oracle: BFS over full world states, stepping the
// real environment with every grounded action. Returns -1 when unsolvable.
int oracle_shortest(const TaskSpec& task, std::size_t state_limit = 200000) {
  WorldState start = task.world;
  start.max_steps = 1 << 30;
  std::deque<std::pair<WorldState, int>> frontier{{start, 0}};
  std::unordered_set<std::string> seen{start.fingerprint()};
  while (!frontier.empty()) {
    auto [state, depth] = frontier.front();
    frontier.pop_front();
    for (const auto& action : grounded_actions(state)) {
      MiniWorld w;
      w.reset(TaskSpec{task.instruction, state});
      const auto out = w.step(action);
      if (out.invalid) continue;
      if (out.reward == 1) return depth + 1;
      WorldState next = w.state();
      next.steps_taken = 0;
      if (seen.insert(next.fingerprint()).second) frontier.emplace_back(std::move(next), depth + 1);
    }
    if (seen.size() > state_limit) return -2;
  }
  return -1;
}

}  // namespace

TEST(Stratum, BoundariesFollowThresholds) {
  EXPECT_EQ(stratum_for_length(1), Difficulty::easy);
  EXPECT_EQ(stratum_for_length(10), Difficulty::easy);
  EXPECT_EQ(stratum_for_length(11), Difficulty::medium);
  EXPECT_EQ(stratum_for_length(17), Difficulty::medium);
  EXPECT_EQ(stratum_for_length(18), Difficulty::hard);
  EXPECT_EQ(stratum_for_length(5, {4, 6}), Difficulty::medium);
}

TEST(ActionCommand, ParsesCanonicalFormsCaseInsensitively) {
  auto a = ActionCommand::parse("  Take Mug FROM table ");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->verb, Verb::take);
  EXPECT_EQ(a->canonical(), "take mug from table");
  EXPECT_EQ(ActionCommand::parse("put mug in cabinet")->canonical(), "put mug in/on cabinet");
  EXPECT_EQ(ActionCommand::parse("put mug on cabinet")->canonical(), "put mug in/on cabinet");
  EXPECT_EQ(ActionCommand::parse("go to kitchen")->verb, Verb::go_to);
  EXPECT_EQ(ActionCommand::parse("focus on pen")->verb, Verb::focus_on);
  EXPECT_EQ(ActionCommand::parse("wait")->verb, Verb::wait);
  EXPECT_FALSE(ActionCommand::parse("dance wildly"));
  EXPECT_FALSE(ActionCommand::parse(""));
  EXPECT_FALSE(ActionCommand::parse("take mug"));
}

TEST(ActionCommand, CanonicalRoundTrips) {
  const auto task = generate_task(Difficulty::medium, 11);
  for (const auto& raw : grounded_actions(task.world)) {
    auto cmd = ActionCommand::parse(raw);
    ASSERT_TRUE(cmd) << raw;
    EXPECT_EQ(cmd->canonical(), raw);
    EXPECT_EQ(ActionCommand::parse(cmd->canonical()), cmd);
  }
}

TEST(Generator, DeterministicInDifficultyAndSeed) {
  for (auto d : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
    const auto a = generate_task(d, 42);
    const auto b = generate_task(d, 42);
    EXPECT_EQ(a.instruction, b.instruction);
    EXPECT_EQ(a.world, b.world);
    EXPECT_EQ(a.instruction.task_id, make_task_id(d, 42));
  }
  EXPECT_NE(generate_task(Difficulty::easy, 1).world, generate_task(Difficulty::easy, 2).world);
}

TEST(Generator, TasksSatisfyBandInvariants) {
  for (auto d : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
    for (int seed = 0; seed < 8; ++seed) {
      const auto t = generate_task(d, seed);
      EXPECT_NO_THROW(t.instruction.validate());
      EXPECT_NO_THROW(t.world.validate());
      EXPECT_EQ(t.instruction.difficulty, d);
      EXPECT_EQ(stratum_for_length(t.instruction.optimal_length), d);
      EXPECT_FALSE(t.world.goal_satisfied());
      const int goals = static_cast<int>(t.world.goal.size());
      switch (d) {
        case Difficulty::easy: EXPECT_TRUE(goals >= 1 && goals <= 2); break;
        case Difficulty::medium: EXPECT_TRUE(goals >= 2 && goals <= 3); break;
        case Difficulty::hard: EXPECT_GT(goals, 3); break;
      }
    }
  }
}

TEST(Planner, MatchesExhaustiveOracleOnEasyTasks) {
  for (int seed = 0; seed < 6; ++seed) {
    const auto t = generate_task(Difficulty::easy, 300 + seed);
    const auto plan = solve_optimal(t.world);
    const int oracle = oracle_shortest(t);
    ASSERT_GT(oracle, 0) << t.instruction.task_id;
    EXPECT_EQ(static_cast<int>(plan.actions.size()), oracle) << t.instruction.task_id;
    EXPECT_EQ(t.instruction.optimal_length, oracle);
  }
}

TEST(Planner, MatchesOracleOnMicroWorld) {
  const auto t = testkit::micro_task(10);
  EXPECT_EQ(oracle_shortest(t), 3);
  const auto plan = solve_optimal(t.world);
  ASSERT_EQ(plan.actions.size(), 3u);
  EXPECT_EQ(plan.actions[0].canonical(), "take gem from shelf");
  EXPECT_EQ(plan.actions[1].canonical(), "put gem in/on box");
  EXPECT_EQ(plan.actions[2].canonical(), "close box");
}

TEST(Planner, PlanReplaysToSuccess) {
  for (auto d : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
    const auto t = generate_task(d, 77);
    const auto plan = solve_optimal(t.world);
    MiniWorld w;
    w.reset(t);
    StepOutcome last;
    for (const auto& a : plan.actions) {
      ASSERT_FALSE(w.done());
      last = w.step(a);
      EXPECT_FALSE(last.invalid) << a.canonical();
    }
    EXPECT_EQ(last.reward, 1);
    EXPECT_TRUE(last.done);
    EXPECT_EQ(static_cast<int>(plan.actions.size()), t.instruction.optimal_length);
  }
}

TEST(Planner, RejectsSolvedAndUnsolvableWorlds) {
  auto t = testkit::micro_task(10);
  t.world.objects = {{"gem", "box"}};
  t.world.receptacles[1].open = false;
  EXPECT_THROW(solve_optimal(t.world), Error);
  auto u = testkit::micro_task(10);
  u.world.goal = {{"gem", "shelf", true, false}};  // shelf cannot be closed
  try {
    solve_optimal(u.world);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::planner);
  }
}

TEST(MiniWorld, ProtocolErrors) {
  MiniWorld w;
  try {
    w.step("wait");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::protocol);
  }
  w.reset(testkit::micro_task(1));
  EXPECT_TRUE(w.step("wait").done);
  EXPECT_THROW(w.step("wait"), Error);
}

TEST(MiniWorld, InvalidActionConsumesStepAndChangesNothing) {
  MiniWorld w;
  w.reset(testkit::micro_task(5));
  const auto before = w.state().fingerprint();
  for (const char* bad : {"put gem in/on box", "fly away", "", "take gem from box"}) {
    const auto out = w.step(bad);
    EXPECT_TRUE(out.invalid);
    EXPECT_EQ(out.observation, kNothingHappened);
    EXPECT_EQ(out.reward, 0);
  }
  EXPECT_EQ(w.state().fingerprint(), before);
  EXPECT_EQ(w.state().steps_taken, 4);
  EXPECT_TRUE(w.step("wait").done);
}

TEST(MiniWorld, ClosedContainersHideContents) {
  auto t = testkit::micro_task(10);
  t.world.objects = {{"gem", "box"}};
  t.world.receptacles[1].open = false;
  t.world.goal = {{"gem", "shelf", false, false}};
  MiniWorld w;
  const auto obs = w.reset(t);
  EXPECT_EQ(obs.substr(0, obs.find("Your task")).find("gem"), std::string::npos);
  EXPECT_TRUE(w.step("take gem from box").invalid);
  const auto open = w.step("open box");
  EXPECT_EQ(open.observation, "You open the box. In it, you see: gem.");
  EXPECT_FALSE(w.step("take gem from box").invalid);
  const auto put = w.step("put gem on shelf");
  EXPECT_EQ(put.reward, 1);
  EXPECT_TRUE(put.done);
}

TEST(MiniWorld, RoomObservationMatchesGolden) {
  const auto t = generate_task(Difficulty::medium, 5);
  MiniWorld w;
  const std::string obs = w.reset(t);
  const auto golden = testkit::read_text(std::filesystem::path(PLANSMITH_TEST_GOLDEN_DIR) / "room_observation.txt");
  EXPECT_EQ(obs + "\n", golden);
}

TEST(MiniWorld, ResetFromInstructionRebuildsWorld) {
  const auto t = generate_task(Difficulty::easy, 9);
  MiniWorld a, b;
  EXPECT_EQ(a.reset(t), b.reset(t.instruction));
  TaskInstruction bogus = t.instruction;
  bogus.task_id = "other-1";
  EXPECT_THROW(b.reset(bogus), Error);
  EXPECT_EQ(parse_task_id("mw-hard-123"), std::make_pair(Difficulty::hard, std::int64_t{123}));
  EXPECT_FALSE(parse_task_id("xx-1"));
}

TEST(Serialization, TaskSpecRoundTrips) {
  const auto t = generate_task(Difficulty::hard, 3);
  const nlohmann::json j = t;
  const auto back = j.get<TaskSpec>();
  EXPECT_EQ(back.instruction, t.instruction);
  EXPECT_EQ(back.world, t.world);
}
