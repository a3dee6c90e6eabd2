#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/env.hpp"
#include "plansmith/policy.hpp"
#include "plansmith/refine.hpp"
#include "plansmith/teacher.hpp"

namespace plansmith::config {

/// Number of generated tasks per difficulty band.
struct TaskPool {
  int easy = 0;
  int medium = 0;
  int hard = 0;
  /// Mixed into the pipeline seed so different pools draw different worlds.
  std::uint64_t salt = 0;

  int total() const { return easy + medium + hard; }
};

struct EnvConfig {
  std::string profile = "miniworld";
  int max_steps = 40;
  std::vector<std::string> terminal_actions{"put", "close", "focus on"};
  env::StratumThresholds thresholds;
};

struct BootstrapStage {
  double rho = 0.6;
  int floor_tokens = 32;
  int max_attempts = 3;
  /// Expansion targets generated from the oracle planner.
  int n_target = 64;
  /// Seed episodes taken from the fixture; 0 keeps all.
  int seeds = 8;
  int n_examples = 2;
};

struct SkeletonCategory {
  std::string name;
  std::string topic;
};

struct CurriculumStage {
  int easy = 2;
  int medium = 2;
  int hard = 2;
  std::vector<SkeletonCategory> categories{{"Household", "tidying objects into containers"}};
  int easy_length = 6;
  int medium_length = 14;
  int hard_length = 20;
  int max_retries = 2;
  int exemplars = 2;
  int epochs = 3;
  bool cumulative = true;
};

struct RefineStage {
  /// Unset means the profile default.
  std::optional<int> K;
  int rollouts_per_iteration = 0;
  double temperature = 1.0;
  TaskPool task_pool{4, 2, 2, 1};
  std::optional<int> context_budget;
};

struct EvalStage {
  double temperature = 0.0;
  TaskPool tasks{4, 2, 2, 2};
};

struct Paths {
  std::filesystem::path dataset_root;
  std::filesystem::path prompt_assets;
  std::filesystem::path seed_fixture;
  std::filesystem::path baselines;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  EnvConfig env;
  policy::BackendConfig agent;
  teacher::TeacherConfig teacher;
  BootstrapStage bootstrap;
  CurriculumStage curriculum;
  RefineStage refine;
  EvalStage eval;
  Paths paths;

  int iterations() const;
  refine::Profile profile() const;
  env::GeneratorOptions generator_options() const;

  /// Throws Error(config) with the dotted field path of the first problem.
  void validate() const;
};

/// Built-in defaults with paths pointing at the installed assets.
PipelineConfig default_config();

/// Parses a config document on top of the defaults. Relative paths resolve
/// against `base_dir`. Unknown keys are rejected.
PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load(const std::filesystem::path& path);

nlohmann::json to_json(const PipelineConfig& cfg);

/// Generates the pool deterministically from (seed, salt), band by band.
std::vector<env::TaskSpec> make_pool(const TaskPool& pool, std::uint64_t seed, const env::GeneratorOptions& options);

}  // namespace plansmith::config
