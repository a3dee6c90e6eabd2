#include "plansmith/teacher.hpp"

#include "json_util.hpp"
#include "plansmith/env.hpp"
#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"
#include "plansmith/prompts.hpp"
#include "plansmith/text.hpp"

namespace plansmith::teacher {

using nlohmann::json;

FunctionTeacher::FunctionTeacher(Fn fn, std::string id) : fn_(std::move(fn)), id_(std::move(id)) {}

std::string FunctionTeacher::complete(const std::vector<ChatMessage>& messages) {
  ++calls_;
  return fn_(messages);
}

RemoteTeacher::RemoteTeacher(policy::BackendConfig cfg, std::shared_ptr<policy::ChatTransport> transport,
                             policy::Sleeper sleep)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  cfg_.kind = policy::BackendKind::remote_chat;
  cfg_.validate();
}

std::string RemoteTeacher::complete(const std::vector<ChatMessage>& messages) {
  return policy::complete_with_retries(*transport_, cfg_, messages, cfg_.temperature, sleep_).content;
}

// ---------------------------------------------------------------------------
// Heuristic teacher

namespace {

std::string first_words(std::string_view s, std::size_t n) {
  const auto w = text::words(s);
  std::vector<std::string> kept(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(std::min(n, w.size())));
  return text::join(kept, " ");
}

std::string last_words(std::string_view s, std::size_t n) {
  const auto w = text::words(s);
  const std::size_t from = w.size() > n ? w.size() - n : 0;
  std::vector<std::string> kept(w.begin() + static_cast<std::ptrdiff_t>(from), w.end());
  return text::join(kept, " ");
}

std::string between(std::string_view s, std::string_view open, std::string_view close) {
  const auto a = s.find(open);
  if (a == std::string_view::npos) return std::string(s);
  const auto b = s.find(close, a + open.size());
  if (b == std::string_view::npos) return std::string(s.substr(a + open.size()));
  return std::string(s.substr(a + open.size(), b - a - open.size()));
}

std::string task_goal(std::string_view first_user) {
  constexpr std::string_view kMarker = "Your task is to:";
  const auto pos = first_user.find(kMarker);
  if (pos == std::string_view::npos) return "finish the task";
  std::string goal(text::trim(first_user.substr(pos + kMarker.size())));
  if (const auto nl = goal.find('\n'); nl != std::string::npos) goal.resize(nl);
  while (!goal.empty() && goal.back() == '.') goal.pop_back();
  return goal;
}

std::string rationale(std::string_view action) {
  const auto cmd = env::ActionCommand::parse(action);
  if (!cmd) return "This is the most direct move available from here.";
  const auto& a = cmd->args;
  switch (cmd->verb) {
    case env::Verb::go_to:
      return "Nothing more I need is reachable here, so I should move to the " + a[0] + " next.";
    case env::Verb::take:
      return "The " + a[0] + " is right there on the " + a[1] + ", and I have to pick it up before I can carry it anywhere.";
    case env::Verb::put:
      return "I am holding the " + a[0] + " and standing next to the " + a[1] + ", so placing it there completes that part of the goal.";
    case env::Verb::open:
      return "The " + a[0] + " is closed, and I cannot reach anything inside it until it is open.";
    case env::Verb::close:
      return "The goal wants the " + a[0] + " shut once the item is inside, so I should close it now.";
    case env::Verb::examine: return "I am not sure about the " + a[0] + " yet, so a closer look is worth one step.";
    case env::Verb::focus_on: return "The task explicitly asks me to focus on the " + a[0] + " once it is in place.";
    case env::Verb::wait: return "There is nothing useful to change right now, so waiting is the safest choice.";
  }
  return {};
}

std::string synthesize_reasoning(std::string_view user_content) {
  constexpr std::string_view kMarker = "Input Trajectory:\n";
  const auto pos = user_content.rfind(kMarker);
  if (pos == std::string_view::npos) throw Error(ErrorKind::backend, "heuristic teacher: no input trajectory");
  json msgs;
  try {
    msgs = json::parse(user_content.substr(pos + kMarker.size()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::backend, std::string("heuristic teacher: unreadable trajectory: ") + e.what());
  }
  if (!msgs.is_array() || msgs.empty()) throw Error(ErrorKind::backend, "heuristic teacher: empty trajectory");
  const std::string first_user = msgs.front().value("content", "");
  std::string last_obs;
  std::string action;
  int actions = 0;
  for (const auto& m : msgs) {
    const std::string role = m.value("role", "");
    const std::string content = m.value("content", "");
    if (role == "assistant") {
      ++actions;
      for (auto line : text::split_lines(content)) {
        if (text::starts_with_ci(text::trim(line), "Action:")) action = std::string(text::trim(text::trim(line).substr(7)));
      }
    } else if (role == "user") {
      last_obs = content;
    }
  }
  if (action.empty()) throw Error(ErrorKind::backend, "heuristic teacher: no final action");
  std::string obs_line(text::trim(text::split_lines(last_obs).empty() ? std::string_view{} : text::split_lines(last_obs)[0]));
  std::string out = "Okay, let me see. The task is to " + task_goal(first_user) + ". ";
  if (!obs_line.empty()) out += "Right now the observation says: " + first_words(obs_line, 24) + " ";
  out += actions > 1 ? "I have already taken " + std::to_string(actions - 1) + " actions, so I should keep the remaining plan short. "
                     : "This is my first move, so I should start with whatever gets me closest to the goal. ";
  out += rationale(action) + " ";
  out += "So the next step is clear. Therefore, I will " + action + ".";
  return out;
}

std::string distill_reasoning(std::string_view user_content) {
  const std::string inner = between(user_content, "<reasoning>", "</reasoning>");
  const std::size_t n = text::words(inner).size();
  return "<reasoning>" + last_words(inner, std::max<std::size_t>(1, n / 2)) + "</reasoning>";
}

env::Difficulty requested_difficulty(std::string_view prompt) {
  constexpr std::string_view kMarker = "Set difficulty: ";
  const auto pos = prompt.find(kMarker);
  if (pos == std::string_view::npos) return env::Difficulty::easy;
  const auto rest = prompt.substr(pos + kMarker.size());
  const auto end = rest.find_first_of(" (\n");
  return env::parse_difficulty(rest.substr(0, end));
}

std::string synthesize_skeleton(std::string_view prompt, std::uint64_t call) {
  const env::Difficulty difficulty = requested_difficulty(prompt);
  const std::uint64_t base = std::stoull(sha256_hex(prompt).substr(0, 15), nullptr, 16);
  const auto seed = static_cast<std::int64_t>(mix_seed(base, call) % 1'000'000'000ULL);
  const env::TaskSpec spec = env::generate_task(difficulty, seed);
  const auto plan = env::solve_optimal(spec.world);
  env::MiniWorld world;
  nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
  auto push = [&](std::string_view role, const std::string& content) {
    msgs.push_back(nlohmann::ordered_json{{"role", role}, {"content", content}});
  };
  push("user", prompts::builtin("miniworld_system").system);
  push("assistant", "OK");
  push("user", world.reset(spec));
  for (const auto& a : plan.actions) {
    const std::string action = a.canonical();
    push("assistant", "Thought: " + plan_sentence(action) + "\nAction: " + action);
    push("user", world.step(a).observation);
  }
  return "```json\n" + msgs.dump(2) + "\n```";
}

}  // namespace

std::string plan_sentence(std::string_view action) {
  const auto cmd = env::ActionCommand::parse(action);
  if (!cmd) return "Try something else.";
  const auto& a = cmd->args;
  switch (cmd->verb) {
    case env::Verb::go_to: return "Head to the " + a[0] + ".";
    case env::Verb::take: return "Pick up the " + a[0] + " from the " + a[1] + ".";
    case env::Verb::put: return "Put the " + a[0] + " in/on the " + a[1] + ".";
    case env::Verb::open: return "Open the " + a[0] + " to reach inside.";
    case env::Verb::close: return "Close the " + a[0] + ".";
    case env::Verb::examine: return "Look at the " + a[0] + ".";
    case env::Verb::focus_on: return "Focus on the " + a[0] + ".";
    case env::Verb::wait: return "Wait.";
  }
  return {};
}

std::string HeuristicTeacher::complete(const std::vector<ChatMessage>& messages) {
  if (messages.size() < 2) throw Error(ErrorKind::backend, "heuristic teacher: expected system and user messages");
  const std::string& system = messages.front().content;
  const std::string& user = messages.back().content;
  static const std::string distill_system = prompts::builtin("distillation").system;
  static const std::string synth_system = prompts::builtin("quaternion_synthesis").system;
  static const std::string skeleton_system = prompts::builtin("skeleton").system;
  if (system == distill_system) return distill_reasoning(user);
  if (system == synth_system) return synthesize_reasoning(user);
  if (system == skeleton_system) return synthesize_skeleton(user, skeleton_calls_++);
  throw Error(ErrorKind::backend, "heuristic teacher: unrecognised prompt");
}

void to_json(json& j, const TeacherConfig& c) {
  j = json{{"kind", c.kind}};
  if (c.kind == "remote_chat") j["remote"] = c.remote;
}

void from_json(const json& j, TeacherConfig& c) {
  c.kind = detail::optional_field<std::string>(j, "kind", "heuristic");
  if (c.kind != "heuristic" && c.kind != "remote_chat") {
    throw Error(ErrorKind::config, "kind: unknown teacher kind '" + c.kind + "'");
  }
  if (j.contains("remote")) c.remote = j.at("remote").get<policy::BackendConfig>();
  c.remote.kind = policy::BackendKind::remote_chat;
}

std::unique_ptr<Teacher> make_teacher(const TeacherConfig& cfg) {
  if (cfg.kind == "heuristic") return std::make_unique<HeuristicTeacher>();
  if (cfg.kind == "remote_chat") return std::make_unique<RemoteTeacher>(cfg.remote, policy::make_http_transport(cfg.remote));
  throw Error(ErrorKind::config, "unknown teacher kind '" + cfg.kind + "'");
}

}  // namespace plansmith::teacher
