#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/env.hpp"

namespace plansmith {

inline constexpr int kTrajectorySchemaVersion = 1;

struct TokenUsage {
  int long_tokens = 0;
  int short_tokens = 0;
  int action_tokens = 0;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// One decision step Q_t = (o_t, e_t, p_t, a_t).
struct PlanningQuaternion {
  std::string observation;
  std::string long_thought;
  std::string short_thought;
  std::string action;
  int step_index = 1;
  TokenUsage token_usage;

  friend bool operator==(const PlanningQuaternion&, const PlanningQuaternion&) = default;
};

enum class TrajectorySource { seed, synthetic_expansion, skeleton, rollout };

std::string_view to_string(TrajectorySource s);
TrajectorySource parse_source(std::string_view s);

struct Trajectory {
  std::string trajectory_id;
  env::TaskInstruction instruction;
  std::vector<PlanningQuaternion> steps;
  int final_reward = 0;
  double final_score = 0.0;
  TrajectorySource source = TrajectorySource::rollout;
  int iteration = 0;

  /// Content hash over (instruction text, step texts, final reward).
  std::string compute_id() const;
  void rehash() { trajectory_id = compute_id(); }

  /// Throws Error(validation): empty steps, non-contiguous step_index,
  /// empty action, or a stale trajectory_id.
  void validate() const;

  /// Planner-certified length when known, otherwise the step count.
  int certified_length() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

void to_json(nlohmann::json& j, const TokenUsage& u);
void from_json(const nlohmann::json& j, TokenUsage& u);
void to_json(nlohmann::json& j, const PlanningQuaternion& q);
void from_json(const nlohmann::json& j, PlanningQuaternion& q);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);

// ---------------------------------------------------------------------------
// Chat form and SFT exemplars

enum class Role { system, user, assistant };
std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);

struct TargetTriplet {
  std::string long_thought;
  std::string short_thought;
  std::string action;

  friend bool operator==(const TargetTriplet&, const TargetTriplet&) = default;
};

struct SFTExemplar {
  std::vector<ChatMessage> input_messages;
  TargetTriplet target;
  int target_step = 1;
  std::string trajectory_id;
};

/// First user message: instruction text folded together with o_1.
std::string first_user_content(std::string_view instruction, std::string_view first_observation);

/// Assistant turn kept in history: short thought and action only.
std::string history_assistant_content(std::string_view short_thought, std::string_view action);

/// One exemplar per step N, input = [system, user(u + o_1), assistant(p_1, a_1), ...,
/// user(o_N)], target = (e_N, p_N, a_N). No long thought ever appears in the input.
std::vector<SFTExemplar> to_exemplars(const Trajectory& traj, std::string_view system_prompt);

nlohmann::json exemplar_json(const SFTExemplar& ex);

/// Full fused transcript: system, user(u + o_1), then alternating assistant
/// (p_t, a_t) and user(o_{t+1}) turns, ending with the last assistant turn.
std::vector<ChatMessage> fused_transcript(const Trajectory& traj, std::string_view system_prompt);

// ---------------------------------------------------------------------------
// JSONL persistence

void write_jsonl(std::span<const Trajectory> trajs, const std::filesystem::path& path);
/// Errors carry the 1-based line number. Blank lines are skipped.
std::vector<Trajectory> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl_line(const Trajectory& t);
Trajectory from_jsonl_line(std::string_view line);

// ---------------------------------------------------------------------------
// Versioned dataset store

/// Pass-through training metadata carried in every manifest.
struct TrainingMetadata {
  std::string optimizer = "AdamW";
  double stage1_learning_rate = 2e-5;
  double stage2_learning_rate = 5e-6;
  double stage3_learning_rate = 1e-6;
  int epochs = 3;
};

struct DatasetManifest {
  int version = 0;
  std::string created_at;
  std::optional<int> parent_version;
  std::map<std::string, int> counts_by_source;
  std::map<std::string, int> counts_by_difficulty;
  int total = 0;
  TrainingMetadata training;
  std::string content_hash;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

/// A sealed, immutable dataset version D_k. Holds every trajectory of the
/// version in shard order.
struct DatasetVersion {
  int version = 0;
  DatasetManifest manifest;
  std::filesystem::path storage_path;
  std::vector<Trajectory> trajectories;

  std::set<std::string> trajectory_ids() const;
  bool contains(std::string_view id) const;
  std::size_t size() const { return trajectories.size(); }
};

/// Directory layout: <root>/v<k>/{manifest.json, trajectories.jsonl}. A version
/// is sealed once its manifest exists; sealed versions are never rewritten.
class DatasetStore {
 public:
  using Clock = std::function<std::string()>;

  explicit DatasetStore(std::filesystem::path root, Clock clock = {});

  /// Seals a fresh version (next free number, 0 for an empty store) from
  /// arbitrary trajectories; duplicates by trajectory_id are dropped.
  DatasetVersion create(std::span<const Trajectory> trajectories, const TrainingMetadata& training = {});

  /// D_{k+1} = D_k ∪ additions. Every addition must carry final_reward = 1.
  DatasetVersion merge(const DatasetVersion& base, std::span<const Trajectory> additions);

  DatasetVersion open(int version) const;
  std::optional<int> latest_version() const;
  DatasetVersion latest() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  DatasetVersion seal(int version, std::optional<int> parent, std::vector<Trajectory> trajectories,
                      const TrainingMetadata& training);

  std::filesystem::path root_;
  Clock clock_;
};

/// ISO-8601 UTC timestamp; honours SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

}  // namespace plansmith
