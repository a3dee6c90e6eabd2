#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/env.hpp"
#include "plansmith/flywheel.hpp"
#include "plansmith/teacher.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith::curriculum {

struct TaskSkeleton {
  std::vector<ChatMessage> messages;
  std::string category;
  std::string category_topic;
  env::Difficulty difficulty = env::Difficulty::easy;
  int target_length = 0;
  bool validated = false;
};

void to_json(nlohmann::json& j, const TaskSkeleton& s);

/// Actions allowed to end a skeleton. Matching is by verb prefix.
struct TerminalActions {
  std::vector<std::string> verbs;

  bool matches(std::string_view action) const;
  static TerminalActions miniworld();       // put, close, focus on
  static TerminalActions scienceworld();    // focus on, wait
};

struct SkeletonRequest {
  std::string category;
  std::string category_topic;
  env::Difficulty difficulty = env::Difficulty::easy;
  int target_length = 9;
  /// Rendered example trajectories, inserted verbatim.
  std::vector<std::string> exemplars;
  int n = 1;
};

struct SkeletonOptions {
  TerminalActions terminal = TerminalActions::miniworld();
  int max_retries = 2;
};

struct SkeletonRejection {
  int index = 0;    // which of the n requested skeletons
  int attempt = 0;  // 1-based
  std::string reason;
};

struct SkeletonBatch {
  std::vector<TaskSkeleton> skeletons;
  std::vector<SkeletonRejection> rejections;
  int teacher_calls = 0;
  bool partial = false;
};

std::vector<ChatMessage> skeleton_prompt(const SkeletonRequest& request);

/// A trajectory in skeleton form: the environment system prompt as the first
/// user turn, "OK", then the task and alternating Thought/Action and
/// observation turns. Used as a few-shot exemplar.
std::string render_skeleton_exemplar(const Trajectory& traj, std::string_view system_prompt);

/// Body of the first ```json fenced block. Throws Error(parse) with message
/// "unfenced" when no complete fence exists.
std::string extract_fenced_json(std::string_view response);

/// Distinct direct objects of manipulation verbs across assistant actions.
int count_objects(const std::vector<ChatMessage>& messages);

/// Object-count band per difficulty: Easy 1-2, Medium 2-3, Hard more than 3.
bool objects_in_band(int objects, env::Difficulty difficulty);

/// Returns an empty string when valid, otherwise the rejection reason.
std::string validate_skeleton(const std::vector<ChatMessage>& messages, env::Difficulty difficulty,
                              const TerminalActions& terminal);

/// Parses one teacher response into a skeleton; throws Error(parse) with the
/// rejection reason.
TaskSkeleton parse_skeleton(std::string_view response, const SkeletonRequest& request, const TerminalActions& terminal);

SkeletonBatch synthesize_skeletons(teacher::Teacher& teacher, const SkeletonRequest& request,
                                   const SkeletonOptions& options = {});

struct PopulateOptions {
  flywheel::DistillOptions distill;
  int n_examples = 2;
  env::StratumThresholds thresholds;
};

/// Steps from the assistant turns (index 3, 5, ...); o_1 is empty because
/// message 2 is the task description; o_{t+1} is the user turn after a_t.
/// Long thoughts come from the synthesis prompt; short thoughts that break
/// the distillation budget are re-distilled. Throws Error(validation) when
/// the skeleton cannot be converted.
Trajectory populate(const TaskSkeleton& skeleton, teacher::Teacher& teacher, std::span<const Trajectory> seeds,
                    const PopulateOptions& options = {});

// ---------------------------------------------------------------------------
// Stratification and scheduling

struct Buckets {
  std::vector<Trajectory> easy;
  std::vector<Trajectory> medium;
  std::vector<Trajectory> hard;

  std::size_t size() const { return easy.size() + medium.size() + hard.size(); }
};

Buckets stratify(std::span<const Trajectory> trajs, const env::StratumThresholds& thresholds = {});

struct Phase {
  env::Difficulty stratum = env::Difficulty::easy;
  /// Full training slice for this phase, shuffled.
  std::vector<std::string> trajectory_ids;
  /// Trajectories introduced in this phase (each id is new in exactly one phase).
  std::vector<std::string> new_ids;
  int epoch_hint = 3;
  int max_length = 0;
};

struct CurriculumSchedule {
  std::vector<Phase> phases;
  env::StratumThresholds thresholds;
  std::uint64_t seed = 0;
};

struct ScheduleOptions {
  std::uint64_t seed = 0;
  int epochs = 3;
  /// Cumulative phases replay earlier strata; disjoint phases do not.
  bool cumulative = true;
  env::StratumThresholds thresholds;
};

/// Phases Easy, Medium, Hard for non-empty buckets. Throws Error(scheduling)
/// when all buckets are empty.
CurriculumSchedule schedule(const Buckets& buckets, const ScheduleOptions& options = {});

nlohmann::json to_json(const CurriculumSchedule& s);

}  // namespace plansmith::curriculum
