#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "plansmith/context.hpp"
#include "plansmith/env.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith::testkit {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("plansmith-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// `n` distinct words "<tag>w0 <tag>w1 ...".
inline std::string words_of(const std::string& tag, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += tag + "w" + std::to_string(i);
  }
  return out;
}

/// Synthetic successful trajectory with tagged, step-unique texts.
inline Trajectory synthetic_trajectory(int n_steps, int long_tokens, int short_tokens, const std::string& tag = "t") {
  Trajectory t;
  t.instruction.task_id = "syn-" + tag;
  t.instruction.text = "synthetic task " + tag;
  t.instruction.optimal_length = n_steps;
  t.instruction.difficulty = env::stratum_for_length(n_steps);
  t.source = TrajectorySource::seed;
  for (int i = 1; i <= n_steps; ++i) {
    PlanningQuaternion q;
    q.step_index = i;
    const std::string s = tag + "s" + std::to_string(i);
    q.observation = "OBS_" + s + " you see things";
    q.long_thought = words_of("LONG_" + s + "_", long_tokens);
    q.short_thought = words_of("SHORT_" + s + "_", short_tokens);
    q.action = "examine ACT_" + s;
    q.token_usage = {long_tokens, short_tokens, 2};
    t.steps.push_back(std::move(q));
  }
  t.final_reward = 1;
  t.final_score = 1.0;
  t.rehash();
  return t;
}

/// One room, a gem on a shelf, an open box. Goal: gem in the closed box.
/// The action set is exactly the four templates below.
inline env::TaskSpec micro_task(int max_steps = 3, const std::string& id = "micro-gem") {
  env::TaskSpec spec;
  auto& w = spec.world;
  w.rooms = {"vault"};
  w.receptacles = {{"shelf", "vault", false, true}, {"box", "vault", true, true}};
  w.objects = {{"gem", "shelf"}};
  w.agent_room = "vault";
  w.goal = {{"gem", "box", true, false}};
  w.max_steps = max_steps;
  w.action_templates = {"take gem from shelf", "put gem in/on box", "close box", "wait"};
  spec.instruction.task_id = id;
  spec.instruction.text = env::goal_text(w.goal);
  spec.instruction.category = env::TaskCategory::contain;
  spec.instruction.difficulty = env::Difficulty::easy;
  spec.instruction.optimal_length = 3;
  return spec;
}

}  // namespace plansmith::testkit
