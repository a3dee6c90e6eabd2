#include "plansmith/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"

namespace plansmith {

using nlohmann::json;
using detail::optional_field;
using detail::require;

std::string_view to_string(TrajectorySource s) {
  switch (s) {
    case TrajectorySource::seed: return "seed";
    case TrajectorySource::synthetic_expansion: return "synthetic_expansion";
    case TrajectorySource::skeleton: return "skeleton";
    case TrajectorySource::rollout: return "rollout";
  }
  return "rollout";
}

TrajectorySource parse_source(std::string_view s) {
  if (s == "seed") return TrajectorySource::seed;
  if (s == "synthetic_expansion") return TrajectorySource::synthetic_expansion;
  if (s == "skeleton") return TrajectorySource::skeleton;
  if (s == "rollout") return TrajectorySource::rollout;
  throw Error(ErrorKind::parse, "unknown trajectory source '" + std::string(s) + "'");
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw Error(ErrorKind::parse, "unknown role '" + std::string(s) + "'");
}

std::string Trajectory::compute_id() const {
  ContentHasher h;
  h.field(instruction.text);
  h.field(static_cast<std::int64_t>(steps.size()));
  for (const auto& q : steps) {
    h.field(q.observation).field(q.long_thought).field(q.short_thought).field(q.action);
  }
  h.field(static_cast<std::int64_t>(final_reward));
  return h.hex();
}

void Trajectory::validate() const {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::validation, "trajectory " + trajectory_id + ": " + msg);
  };
  if (steps.empty()) fail("no steps");
  if (final_reward != 0 && final_reward != 1) fail("final_reward must be 0 or 1");
  if (final_score < 0.0 || final_score > 1.0) fail("final_score outside [0,1]");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& q = steps[i];
    const std::string where = "step " + std::to_string(i + 1);
    if (q.step_index != static_cast<int>(i) + 1) fail(where + ": step_index " + std::to_string(q.step_index));
    if (q.action.empty()) fail(where + ": empty action");
    const auto& u = q.token_usage;
    if (u.long_tokens < 0 || u.short_tokens < 0 || u.action_tokens < 0) fail(where + ": negative token count");
    if (!q.long_thought.empty() && u.short_tokens > u.long_tokens) fail(where + ": short_tokens exceed long_tokens");
  }
  if (trajectory_id != compute_id()) fail("stale trajectory_id");
}

int Trajectory::certified_length() const {
  return instruction.optimal_length >= 1 ? instruction.optimal_length : static_cast<int>(steps.size());
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const TokenUsage& u) {
  j = json{{"long_tokens", u.long_tokens}, {"short_tokens", u.short_tokens}, {"action_tokens", u.action_tokens}};
}

void from_json(const json& j, TokenUsage& u) {
  u.long_tokens = require<int>(j, "long_tokens");
  u.short_tokens = require<int>(j, "short_tokens");
  u.action_tokens = require<int>(j, "action_tokens");
}

void to_json(json& j, const PlanningQuaternion& q) {
  j = json{{"step_index", q.step_index},       {"observation", q.observation}, {"long_thought", q.long_thought},
           {"short_thought", q.short_thought}, {"action", q.action},           {"token_usage", q.token_usage}};
}

void from_json(const json& j, PlanningQuaternion& q) {
  q.step_index = require<int>(j, "step_index");
  q.observation = require<std::string>(j, "observation");
  q.long_thought = require<std::string>(j, "long_thought");
  q.short_thought = require<std::string>(j, "short_thought");
  q.action = require<std::string>(j, "action");
  q.token_usage = optional_field<TokenUsage>(j, "token_usage", TokenUsage{});
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"schema_version", kTrajectorySchemaVersion},
           {"trajectory_id", t.trajectory_id},
           {"instruction", t.instruction},
           {"steps", t.steps},
           {"final_reward", t.final_reward},
           {"final_score", t.final_score},
           {"source", to_string(t.source)},
           {"iteration", t.iteration}};
}

void from_json(const json& j, Trajectory& t) {
  const int version = optional_field<int>(j, "schema_version", kTrajectorySchemaVersion);
  if (version != kTrajectorySchemaVersion) {
    throw Error(ErrorKind::parse, "unsupported schema_version " + std::to_string(version));
  }
  t.trajectory_id = require<std::string>(j, "trajectory_id");
  t.instruction = require<env::TaskInstruction>(j, "instruction");
  t.steps = require<std::vector<PlanningQuaternion>>(j, "steps");
  t.final_reward = require<int>(j, "final_reward");
  t.final_score = optional_field<double>(j, "final_score", static_cast<double>(t.final_reward));
  t.source = parse_source(optional_field<std::string>(j, "source", "rollout"));
  t.iteration = optional_field<int>(j, "iteration", 0);
}

void to_json(json& j, const ChatMessage& m) { j = json{{"role", to_string(m.role)}, {"content", m.content}}; }

void from_json(const json& j, ChatMessage& m) {
  m.role = parse_role(require<std::string>(j, "role"));
  m.content = require<std::string>(j, "content");
}

// ---------------------------------------------------------------------------
// Chat form

std::string first_user_content(std::string_view instruction, std::string_view first_observation) {
  std::string out(instruction);
  if (!first_observation.empty()) {
    if (!out.empty()) out += "\n\n";
    out += first_observation;
  }
  return out;
}

std::string history_assistant_content(std::string_view short_thought, std::string_view action) {
  std::string out;
  if (!short_thought.empty()) {
    out += "Thought: ";
    out += short_thought;
    out += '\n';
  }
  out += "Action: ";
  out += action;
  return out;
}

std::vector<ChatMessage> fused_transcript(const Trajectory& traj, std::string_view system_prompt) {
  if (traj.steps.empty()) throw Error(ErrorKind::validation, "trajectory has no steps");
  std::vector<ChatMessage> out;
  out.reserve(2 * traj.steps.size() + 1);
  out.push_back({Role::system, std::string(system_prompt)});
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& q = traj.steps[i];
    out.push_back({Role::user, i == 0 ? first_user_content(traj.instruction.text, q.observation) : q.observation});
    out.push_back({Role::assistant, history_assistant_content(q.short_thought, q.action)});
  }
  return out;
}

std::vector<SFTExemplar> to_exemplars(const Trajectory& traj, std::string_view system_prompt) {
  const auto transcript = fused_transcript(traj, system_prompt);
  std::vector<SFTExemplar> out;
  out.reserve(traj.steps.size());
  for (std::size_t n = 1; n <= traj.steps.size(); ++n) {
    const auto& q = traj.steps[n - 1];
    SFTExemplar ex;
    ex.input_messages.assign(transcript.begin(), transcript.begin() + static_cast<std::ptrdiff_t>(2 * n));
    ex.target = {q.long_thought, q.short_thought, q.action};
    ex.target_step = static_cast<int>(n);
    ex.trajectory_id = traj.trajectory_id;
    out.push_back(std::move(ex));
  }
  return out;
}

json exemplar_json(const SFTExemplar& ex) {
  return json{{"messages", ex.input_messages},
              {"target",
               {{"long_thought", ex.target.long_thought},
                {"short_thought", ex.target.short_thought},
                {"action", ex.target.action}}},
              {"target_step", ex.target_step},
              {"trajectory_id", ex.trajectory_id}};
}

// ---------------------------------------------------------------------------
// JSONL

std::string to_jsonl_line(const Trajectory& t) { return json(t).dump(); }

Trajectory from_jsonl_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("malformed JSON: ") + e.what());
  }
  return j.get<Trajectory>();
}

void write_jsonl(std::span<const Trajectory> trajs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  for (const auto& t : trajs) out << to_jsonl_line(t) << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::vector<Trajectory> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_jsonl_line(line));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace plansmith
