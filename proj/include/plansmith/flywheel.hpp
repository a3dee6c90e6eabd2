#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/env.hpp"
#include "plansmith/teacher.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith::flywheel {

/// A raw transcript from a reasoning model. The first user message carries
/// the instruction text, a blank line, then the first observation; assistant
/// messages follow the policy output grammar.
struct SeedEpisode {
  std::string episode_id;
  env::TaskInstruction instruction;
  std::vector<ChatMessage> transcript;
  bool success = false;
  std::string source_model;
};

void to_json(nlohmann::json& j, const SeedEpisode& s);
void from_json(const nlohmann::json& j, SeedEpisode& s);
std::vector<SeedEpisode> load_seed_episodes(const std::filesystem::path& path);

struct DroppedEpisode {
  std::string episode_id;
  int step = 0;  // 0 when the problem is not tied to a step
  std::string reason;
};

struct CurationResult {
  std::vector<Trajectory> trajectories;
  std::vector<DroppedEpisode> dropped;
  int unsuccessful = 0;
};

/// Keeps successful episodes and converts them into seed trajectories with
/// long thoughts filled and short thoughts left empty.
CurationResult curate_seeds(std::span<const SeedEpisode> episodes);

// ---------------------------------------------------------------------------
// Distillation

struct DistillOptions {
  double rho = 0.6;
  int floor_tokens = 32;
  int max_attempts = 3;
};

struct DistillationResult {
  std::string long_thought;
  std::string short_thought;
  int attempts = 0;
  bool accepted = false;
  bool truncated = false;
};

/// Largest admissible short-thought length for a long thought of
/// `long_tokens`: floor(max(rho * long, floor_tokens)), never above `long_tokens`.
int token_budget(int long_tokens, const DistillOptions& options = {});
bool within_budget(int short_tokens, int long_tokens, const DistillOptions& options = {});

std::vector<ChatMessage> distillation_prompt(std::string_view long_thought);

/// Teacher response with any reasoning markers removed, lines normalised.
std::string reasoning_text(std::string_view response);

/// Calls the teacher until a non-empty candidate fits the budget; after
/// max_attempts the last candidate (or the long thought, if every candidate
/// was empty) is cut to the budget. Teacher errors propagate.
DistillationResult distill(std::string_view long_thought, teacher::Teacher& teacher, const DistillOptions& options = {});

struct DistillStats {
  int steps = 0;
  int teacher_calls = 0;
  int truncated = 0;
};

/// Fills every empty short thought from its long thought.
std::vector<Trajectory> distill_trajectories(std::vector<Trajectory> trajs, teacher::Teacher& teacher,
                                             const DistillOptions& options = {}, DistillStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Expansion

/// Messages of `traj` up to and including the action of step `step`
/// (1-based), rendered as a JSON list; the final assistant message holds only
/// the action.
std::string render_target_messages(const Trajectory& traj, std::size_t step);

/// Few-shot block built from seed trajectories: for each of the first
/// `n_examples` seeds, the trajectory up to its middle step and that step's
/// long thought.
std::string render_examples_section(std::span<const Trajectory> seeds, int n_examples);

std::vector<ChatMessage> synthesis_prompt(std::string_view examples_section, std::string_view target_messages);

struct ExpandOptions {
  int n_examples = 2;
};

struct ExpansionResult {
  std::vector<Trajectory> trajectories;
  int skipped = 0;
  int teacher_calls = 0;
  std::vector<std::string> errors;
};

/// Writes a teacher-generated long thought into every step of the first
/// n_target targets. A target whose teacher call fails or returns nothing is
/// skipped and counted.
ExpansionResult expand(std::span<const Trajectory> seeds, std::span<const Trajectory> targets,
                       teacher::Teacher& teacher, int n_target, const ExpandOptions& options = {});

/// Successful oracle trajectory for `task`: planner actions replayed through
/// MiniWorld, with no thoughts.
Trajectory plan_trajectory(const env::TaskSpec& task);

// ---------------------------------------------------------------------------
// Assembly and export

/// Normalises text, fills token_usage and re-hashes. Throws Error(assembly)
/// listing every step without a long or short thought.
std::vector<Trajectory> assemble_quaternions(std::vector<Trajectory> trajs);

/// Writes {"messages","target","target_step","trajectory_id"} lines; returns
/// the exemplar count.
std::size_t export_sft(const DatasetVersion& dataset, const std::filesystem::path& path,
                       std::string_view system_prompt);

/// Throws Error(validation) unless the exemplar has 2N messages, a leading
/// system message and strict user/assistant alternation ending in user.
void check_exemplar_shape(const SFTExemplar& ex);

}  // namespace plansmith::flywheel
