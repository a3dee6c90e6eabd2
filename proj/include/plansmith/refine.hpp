#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/env.hpp"
#include "plansmith/policy.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith::refine {

struct EpisodeResult {
  Trajectory trajectory;
  bool success = false;
  int reward = 0;
  double score = 0.0;
  int steps_used = 0;
  std::vector<int> reasoning_tokens_per_step;
  double wall_time_ms = 0.0;
  /// Non-empty when the backend failed mid-episode.
  std::string failure_reason;
  int invalid_outputs = 0;
  bool context_truncated = false;
  std::size_t task_index = 0;
};

nlohmann::json to_json(const EpisodeResult& e);

struct RolloutOptions {
  /// Number of episodes; tasks are cycled through a seed-derived permutation.
  int n = 0;
  std::optional<double> temperature;
  std::uint64_t seed = 0;
  int iteration = 0;
  std::string system_prompt;
  std::optional<int> context_budget;
  /// Parallel episodes; defaults to the backend's concurrency limit.
  std::optional<int> concurrency;
};

/// Task index for each of the n episodes.
std::vector<std::size_t> episode_tasks(std::size_t n_tasks, int n, std::uint64_t seed);

/// Runs one ReAct episode: assemble context, generate, step, until done.
EpisodeResult run_episode(const policy::PolicyBackend& policy, const env::TaskSpec& task,
                          const policy::EpisodeSettings& settings, const RolloutOptions& options);

std::vector<EpisodeResult> rollout(const policy::PolicyBackend& policy, std::span<const env::TaskSpec> tasks,
                                   const RolloutOptions& options);

/// Trajectories of the reward-1 episodes, in order.
std::vector<Trajectory> gate(std::span<const EpisodeResult> episodes);

// ---------------------------------------------------------------------------

enum class Profile { miniworld, alfworld, scienceworld, webshop };
std::string_view to_string(Profile p);
Profile parse_profile(std::string_view s);
/// Refinement iterations per profile: 2 for ScienceWorld, otherwise 1.
int default_iterations(Profile p);

/// Stand-in for fine-tuning: maps a dataset version to a policy.
using PolicyFactory = std::function<std::unique_ptr<policy::PolicyBackend>(const DatasetVersion&)>;

/// Named factories: "memorizing", "scripted", "random".
PolicyFactory named_factory(std::string_view name, const policy::BackendConfig& base = {});

struct RefinementConfig {
  int K = 1;
  int rollouts_per_iteration = 0;  // 0 means one episode per pool task
  double temperature = 1.0;
  double eval_temperature = 0.0;
  std::vector<env::TaskSpec> task_pool;
  std::string policy_factory = "memorizing";
  std::uint64_t seed = 0;
  std::string system_prompt;
  std::optional<int> context_budget;
  /// Evaluate π_K on the pool after the last merge.
  bool final_evaluation = true;
};

struct IterationMetrics {
  int k = 0;
  double sr = 0.0;
  int successes = 0;
  int dataset_size = 0;
  int episodes = 0;
};

nlohmann::json to_json(const IterationMetrics& m);

struct RefinementResult {
  DatasetVersion final_version;
  std::vector<IterationMetrics> metrics;
  std::optional<double> final_sr;
  std::vector<int> dataset_sizes;  // |D_0|, |D_1|, ...
  bool aborted = false;
  std::string abort_reason;
};

/// For k in 0..K-1: policy <- factory(D_k); rollouts; D_{k+1} <- merge(D_k, gate).
/// Rejected episodes go to <store root>/rejects/iter-<k>.jsonl. A factory
/// failure stops the loop and keeps the last sealed version.
RefinementResult iterate(const DatasetVersion& d0, const RefinementConfig& cfg, DatasetStore& store,
                         const PolicyFactory& factory);

}  // namespace plansmith::refine
