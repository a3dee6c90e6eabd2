#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace plansmith::env {

enum class Difficulty { easy, medium, hard };
enum class TaskCategory { move, contain, process, compound };

std::string_view to_string(Difficulty d);
std::string_view to_string(TaskCategory c);
Difficulty parse_difficulty(std::string_view s);
TaskCategory parse_category(std::string_view s);

/// Step-count strata: Easy <= easy_max < Medium <= medium_max < Hard.
struct StratumThresholds {
  int easy_max = 10;
  int medium_max = 17;
};

Difficulty stratum_for_length(int length, const StratumThresholds& t = {});

struct TaskInstruction {
  std::string task_id;
  std::string text;
  TaskCategory category = TaskCategory::move;
  Difficulty difficulty = Difficulty::easy;
  int optimal_length = 1;
  std::int64_t seed = 0;

  /// Throws Error(validation) when an invariant does not hold.
  void validate(const StratumThresholds& t = {}) const;

  friend bool operator==(const TaskInstruction&, const TaskInstruction&) = default;
};

struct Receptacle {
  std::string name;
  std::string room;
  bool openable = false;
  bool open = true;

  friend bool operator==(const Receptacle&, const Receptacle&) = default;
};

/// One conjunct of the goal predicate: `object` rests in/on `receptacle`,
/// optionally with the receptacle closed and/or the object focused.
struct GoalClause {
  std::string object;
  std::string receptacle;
  bool require_closed = false;
  bool require_focus = false;

  friend bool operator==(const GoalClause&, const GoalClause&) = default;
};

inline constexpr std::string_view kInventory = "inventory";

struct WorldState {
  std::vector<std::string> rooms;
  std::vector<Receptacle> receptacles;
  /// (object name, location) where location is a receptacle name or kInventory.
  std::vector<std::pair<std::string, std::string>> objects;
  std::string agent_room;
  std::vector<GoalClause> goal;
  std::string focused;
  int steps_taken = 0;
  int max_steps = 40;
  /// Action set sampled by the random policy. Empty means the full grounded vocabulary.
  std::vector<std::string> action_templates;

  const Receptacle* find_receptacle(std::string_view name) const;
  Receptacle* find_receptacle(std::string_view name);
  const std::string* location_of(std::string_view object) const;
  std::optional<std::string> held_object() const;
  bool goal_satisfied() const;

  /// Throws Error(validation) on structural problems (unknown rooms, dangling locations...).
  void validate() const;

  /// Serialization of everything but the step counter; equal fingerprints mean
  /// equal world content.
  std::string fingerprint() const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class Verb { go_to, take, put, open, close, examine, focus_on, wait };

std::string_view to_string(Verb v);

struct ActionCommand {
  std::string raw;
  Verb verb = Verb::wait;
  std::vector<std::string> args;

  /// Accepts the canonical forms (`go to R`, `take O from R`, `put O in/on R`,
  /// `open R`, `close R`, `examine X`, `focus on O`, `wait`), case-insensitive
  /// on keywords. `put` also accepts `in` or `on` alone.
  static std::optional<ActionCommand> parse(std::string_view raw);
  static ActionCommand make(Verb verb, std::vector<std::string> args);
  std::string canonical() const;

  friend bool operator==(const ActionCommand&, const ActionCommand&) = default;
};

struct StepOutcome {
  std::string observation;
  int reward = 0;
  bool done = false;
  bool invalid = false;
  /// Carried for environments with graded scores; MiniWorld reports reward.
  double score = 0.0;
};

inline constexpr std::string_view kNothingHappened = "Nothing happened";

/// A generated task: the public instruction plus the hidden initial world.
struct TaskSpec {
  TaskInstruction instruction;
  WorldState world;
};

/// Contract for text worlds driven by the episode runner. Real benchmark
/// connectors implement this same surface.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string reset(const TaskSpec& task) = 0;
  virtual StepOutcome step(std::string_view raw_action) = 0;
  virtual std::vector<std::string> action_templates() const = 0;
  virtual bool done() const = 0;
};

struct GeneratorOptions {
  int max_attempts = 400;
  int max_steps = 40;
  StratumThresholds thresholds{};
};

class MiniWorld final : public Environment {
 public:
  explicit MiniWorld(GeneratorOptions options = {}) : options_(options) {}

  std::string reset(const TaskSpec& task) override;
  /// Rebuilds the world from the task id (`mw-<difficulty>-<seed>`).
  std::string reset(const TaskInstruction& task);

  StepOutcome step(std::string_view raw_action) override;
  StepOutcome step(const ActionCommand& action);

  std::vector<std::string> action_templates() const override;
  bool done() const override { return done_; }
  const WorldState& state() const { return state_; }

 private:
  bool apply(const ActionCommand& action, std::string& observation);
  void check_steppable() const;
  StepOutcome finish(bool ok, std::string observation);

  GeneratorOptions options_;
  WorldState state_;
  std::string instruction_text_;
  bool started_ = false;
  bool done_ = false;
};

/// Frozen room description used for observations.
std::string describe_room(const WorldState& world, std::string_view room);
std::string initial_observation(const WorldState& world, std::string_view instruction_text);
std::string goal_text(const std::vector<GoalClause>& goal);

/// Every grounded action over the world vocabulary, in a fixed order.
std::vector<std::string> grounded_actions(const WorldState& world);

std::string make_task_id(Difficulty d, std::int64_t seed);
/// Returns nullopt when `task_id` is not a MiniWorld id.
std::optional<std::pair<Difficulty, std::int64_t>> parse_task_id(std::string_view task_id);

/// Deterministic in (difficulty, seed). Goal object count and planner-certified
/// length both fall in the band for `difficulty`; throws Error(generation)
/// when no such world is found within the retry budget.
TaskSpec generate_task(Difficulty difficulty, std::int64_t seed, const GeneratorOptions& options = {});

struct PlannerOptions {
  std::size_t max_nodes = 4'000'000;
};

struct Plan {
  std::vector<ActionCommand> actions;
  std::size_t nodes_expanded = 0;
};

/// Breadth-first search over the compact state graph; returns a shortest
/// action sequence reaching the goal. Throws Error(planner) when unsolvable,
/// when the goal already holds, or when the node budget runs out.
Plan solve_optimal(const WorldState& initial, const PlannerOptions& options = {});
Plan solve_optimal(const TaskInstruction& task, const GeneratorOptions& gen = {},
                   const PlannerOptions& options = {});

void to_json(nlohmann::json& j, const TaskInstruction& t);
void from_json(const nlohmann::json& j, TaskInstruction& t);
void to_json(nlohmann::json& j, const WorldState& w);
void from_json(const nlohmann::json& j, WorldState& w);
void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);

}  // namespace plansmith::env
