#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"
#include "plansmith/trajectory.hpp"
#include "support.hpp"

using namespace plansmith;
using plansmith::testkit::synthetic_trajectory;
using plansmith::testkit::TempDir;

namespace {

std::string fixed_clock() { return "2000-01-01T00:00:00Z"; }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorKind::config;
}

}  // namespace

TEST(Trajectory, IdDependsOnContentOnly) {
  auto a = synthetic_trajectory(3, 5, 2, "a");
  auto b = a;
  b.iteration = 7;
  b.source = TrajectorySource::rollout;
  EXPECT_EQ(a.compute_id(), b.compute_id());
  b.steps[1].short_thought += " more";
  EXPECT_NE(a.compute_id(), b.compute_id());
  b = a;
  b.final_reward = 0;
  EXPECT_NE(a.compute_id(), b.compute_id());
}

TEST(Trajectory, ValidateCatchesEachInvariant) {
  auto base = synthetic_trajectory(3, 5, 2);
  EXPECT_NO_THROW(base.validate());

  auto empty = base;
  empty.steps.clear();
  empty.rehash();
  EXPECT_EQ(kind_of([&] { empty.validate(); }), ErrorKind::validation);

  auto gap = base;
  gap.steps[2].step_index = 5;
  gap.rehash();
  EXPECT_THROW(gap.validate(), Error);

  auto no_action = base;
  no_action.steps[0].action.clear();
  no_action.rehash();
  EXPECT_THROW(no_action.validate(), Error);

  auto stale = base;
  stale.steps[0].observation = "changed";
  try {
    stale.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stale trajectory_id"), std::string::npos);
  }

  auto bad_reward = base;
  bad_reward.final_reward = 2;
  bad_reward.rehash();
  EXPECT_THROW(bad_reward.validate(), Error);
}

TEST(Trajectory, JsonlRoundTripCarriesSchemaVersion) {
  TempDir dir;
  std::vector<Trajectory> trajs{synthetic_trajectory(2, 4, 1, "x"), synthetic_trajectory(4, 6, 3, "y")};
  trajs[1].source = TrajectorySource::skeleton;
  trajs[1].iteration = 2;
  const auto path = dir / "t.jsonl";
  write_jsonl(trajs, path);
  const auto line = to_jsonl_line(trajs[0]);
  EXPECT_EQ(nlohmann::json::parse(line).at("schema_version"), kTrajectorySchemaVersion);
  EXPECT_EQ(read_jsonl(path), trajs);
  EXPECT_EQ(from_jsonl_line(line), trajs[0]);
}

TEST(Trajectory, ReadJsonlReportsLineNumbers) {
  TempDir dir;
  const auto path = dir / "bad.jsonl";
  {
    std::ofstream out(path);
    out << to_jsonl_line(synthetic_trajectory(1, 2, 1)) << "\n\n{not json\n";
  }
  try {
    read_jsonl(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:3:"), std::string::npos) << e.what();
  }
  auto j = nlohmann::json::parse(to_jsonl_line(synthetic_trajectory(1, 2, 1)));
  j["schema_version"] = 99;
  EXPECT_EQ(kind_of([&] { from_jsonl_line(j.dump()); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([&] { read_jsonl(dir / "missing.jsonl"); }), ErrorKind::io);
}

TEST(Exemplars, ShapeAndFusion) {
  const auto t = synthetic_trajectory(4, 8, 2, "e");
  const auto exs = to_exemplars(t, "SYS");
  ASSERT_EQ(exs.size(), 4u);
  for (std::size_t n = 1; n <= exs.size(); ++n) {
    const auto& ex = exs[n - 1];
    EXPECT_EQ(ex.target_step, static_cast<int>(n));
    ASSERT_EQ(ex.input_messages.size(), 2 * n);
    EXPECT_EQ(ex.input_messages.front(), (ChatMessage{Role::system, "SYS"}));
    EXPECT_EQ(ex.input_messages.back().role, Role::user);
    EXPECT_EQ(ex.target.long_thought, t.steps[n - 1].long_thought);
    EXPECT_EQ(ex.target.action, t.steps[n - 1].action);
    for (const auto& m : ex.input_messages) EXPECT_EQ(m.content.find("LONG_"), std::string::npos);
  }
  EXPECT_EQ(exs[0].input_messages[1].content, first_user_content(t.instruction.text, t.steps[0].observation));
  EXPECT_EQ(exs[1].input_messages[2].content,
            history_assistant_content(t.steps[0].short_thought, t.steps[0].action));
  const auto fused = fused_transcript(t, "SYS");
  EXPECT_EQ(fused.size(), 2 + 2 * t.steps.size() - 1);
  EXPECT_EQ(fused.back().role, Role::assistant);
}

TEST(DatasetStore, CreateMergeOpen) {
  TempDir dir;
  DatasetStore store(dir.path(), fixed_clock);
  EXPECT_FALSE(store.latest_version());
  std::vector<Trajectory> seeds{synthetic_trajectory(2, 3, 1, "a"), synthetic_trajectory(3, 3, 1, "b")};
  seeds.push_back(seeds[0]);  // duplicate is dropped
  const auto d0 = store.create(seeds);
  EXPECT_EQ(d0.version, 0);
  EXPECT_EQ(d0.size(), 2u);
  EXPECT_EQ(d0.manifest.total, 2);
  EXPECT_EQ(d0.manifest.counts_by_source.at("seed"), 2);
  EXPECT_EQ(d0.manifest.created_at, "2000-01-01T00:00:00Z");
  EXPECT_EQ(d0.manifest.content_hash, sha256_hex(testkit::read_text(d0.storage_path / "trajectories.jsonl")));

  auto extra = synthetic_trajectory(2, 3, 1, "c");
  extra.source = TrajectorySource::rollout;
  const std::vector<Trajectory> additions{extra, seeds[1]};
  const auto d1 = store.merge(d0, additions);
  EXPECT_EQ(d1.version, 1);
  EXPECT_EQ(d1.manifest.parent_version, 0);
  EXPECT_EQ(d1.size(), 3u);
  EXPECT_TRUE(d1.contains(extra.trajectory_id));

  const auto reopened = store.open(1);
  EXPECT_EQ(reopened.trajectories, d1.trajectories);
  EXPECT_EQ(reopened.manifest.content_hash, d1.manifest.content_hash);
  EXPECT_EQ(store.latest().version, 1);
  EXPECT_EQ(kind_of([&] { store.open(9); }), ErrorKind::io);
}

TEST(DatasetStore, MergeGatesOnRewardAndNeverRewrites) {
  TempDir dir;
  DatasetStore store(dir.path(), fixed_clock);
  const std::vector<Trajectory> seeds{synthetic_trajectory(2, 3, 1, "a")};
  const auto d0 = store.create(seeds);
  auto failed = synthetic_trajectory(2, 3, 1, "f");
  failed.final_reward = 0;
  failed.rehash();
  const std::vector<Trajectory> bad{failed};
  EXPECT_EQ(kind_of([&] { store.merge(d0, bad); }), ErrorKind::gating);
  const auto d1 = store.merge(d0, {});
  EXPECT_EQ(d1.trajectories, d0.trajectories);
  // v1 is sealed: merging onto v0 again would overwrite it.
  EXPECT_EQ(kind_of([&] { store.merge(d0, {}); }), ErrorKind::io);
}

TEST(DatasetStore, MergeIsIdempotentOnRepeatedAdditions) {
  TempDir dir;
  DatasetStore store(dir.path(), fixed_clock);
  const std::vector<Trajectory> seeds{synthetic_trajectory(2, 3, 1, "a")};
  const std::vector<Trajectory> adds{synthetic_trajectory(2, 3, 1, "b"), synthetic_trajectory(2, 3, 1, "c")};
  const auto d1 = store.merge(store.create(seeds), adds);
  const auto d2 = store.merge(d1, adds);
  EXPECT_EQ(d2.trajectories, d1.trajectories);
  EXPECT_EQ(d2.manifest.content_hash, d1.manifest.content_hash);
}

TEST(DatasetStore, TimestampHonoursSourceDateEpoch) {
  ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
  EXPECT_EQ(utc_timestamp(), "1970-01-02T00:00:00Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
  EXPECT_EQ(utc_timestamp().size(), 20u);
}
