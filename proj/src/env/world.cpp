#include <algorithm>
#include <set>

#include "../json_util.hpp"
#include "plansmith/env.hpp"
#include "plansmith/error.hpp"
#include "plansmith/text.hpp"

namespace plansmith::env {

using nlohmann::json;

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "Easy";
    case Difficulty::medium: return "Medium";
    case Difficulty::hard: return "Hard";
  }
  return "Easy";
}

std::string_view to_string(TaskCategory c) {
  switch (c) {
    case TaskCategory::move: return "move";
    case TaskCategory::contain: return "contain";
    case TaskCategory::process: return "process";
    case TaskCategory::compound: return "compound";
  }
  return "move";
}

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::go_to: return "go_to";
    case Verb::take: return "take";
    case Verb::put: return "put";
    case Verb::open: return "open";
    case Verb::close: return "close";
    case Verb::examine: return "examine";
    case Verb::focus_on: return "focus_on";
    case Verb::wait: return "wait";
  }
  return "wait";
}

Difficulty parse_difficulty(std::string_view s) {
  auto l = text::to_lower(s);
  if (l == "easy") return Difficulty::easy;
  if (l == "medium") return Difficulty::medium;
  if (l == "hard") return Difficulty::hard;
  throw Error(ErrorKind::config, "unknown difficulty '" + std::string(s) + "'");
}

TaskCategory parse_category(std::string_view s) {
  auto l = text::to_lower(s);
  if (l == "move") return TaskCategory::move;
  if (l == "contain") return TaskCategory::contain;
  if (l == "process") return TaskCategory::process;
  if (l == "compound") return TaskCategory::compound;
  throw Error(ErrorKind::config, "unknown task category '" + std::string(s) + "'");
}

Difficulty stratum_for_length(int length, const StratumThresholds& t) {
  if (length <= t.easy_max) return Difficulty::easy;
  if (length <= t.medium_max) return Difficulty::medium;
  return Difficulty::hard;
}

void TaskInstruction::validate(const StratumThresholds& t) const {
  if (task_id.empty()) throw Error(ErrorKind::validation, "task_id is empty");
  if (text::trim(text).empty()) throw Error(ErrorKind::validation, "task " + task_id + ": empty text");
  if (optimal_length < 1) {
    throw Error(ErrorKind::validation, "task " + task_id + ": optimal_length must be >= 1");
  }
  if (stratum_for_length(optimal_length, t) != difficulty) {
    throw Error(ErrorKind::validation,
                "task " + task_id + ": difficulty " + std::string(to_string(difficulty)) +
                    " inconsistent with optimal_length " + std::to_string(optimal_length));
  }
}

// ---------------------------------------------------------------------------
// WorldState

const Receptacle* WorldState::find_receptacle(std::string_view name) const {
  auto it = std::find_if(receptacles.begin(), receptacles.end(),
                         [&](const Receptacle& r) { return r.name == name; });
  return it == receptacles.end() ? nullptr : &*it;
}

Receptacle* WorldState::find_receptacle(std::string_view name) {
  auto it = std::find_if(receptacles.begin(), receptacles.end(),
                         [&](const Receptacle& r) { return r.name == name; });
  return it == receptacles.end() ? nullptr : &*it;
}

const std::string* WorldState::location_of(std::string_view object) const {
  for (const auto& [name, loc] : objects) {
    if (name == object) return &loc;
  }
  return nullptr;
}

std::optional<std::string> WorldState::held_object() const {
  for (const auto& [name, loc] : objects) {
    if (loc == kInventory) return name;
  }
  return std::nullopt;
}

bool WorldState::goal_satisfied() const {
  if (goal.empty()) return false;
  for (const auto& clause : goal) {
    const auto* loc = location_of(clause.object);
    if (!loc || *loc != clause.receptacle) return false;
    if (clause.require_closed) {
      const auto* r = find_receptacle(clause.receptacle);
      if (!r || r->open) return false;
    }
    if (clause.require_focus && focused != clause.object) return false;
  }
  return true;
}

void WorldState::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::validation, "world: " + msg); };
  std::set<std::string> room_set(rooms.begin(), rooms.end());
  if (room_set.size() != rooms.size()) fail("duplicate room names");
  if (!room_set.count(agent_room)) fail("agent_room '" + agent_room + "' is not a room");
  std::set<std::string> recep_names;
  for (const auto& r : receptacles) {
    if (!recep_names.insert(r.name).second) fail("duplicate receptacle '" + r.name + "'");
    if (!room_set.count(r.room)) fail("receptacle '" + r.name + "' in unknown room");
    if (!r.openable && !r.open) fail("non-openable receptacle '" + r.name + "' is closed");
  }
  std::set<std::string> object_names;
  int held = 0;
  for (const auto& [name, loc] : objects) {
    if (!object_names.insert(name).second) fail("object '" + name + "' has more than one location");
    if (loc == kInventory) {
      ++held;
    } else if (!recep_names.count(loc)) {
      fail("object '" + name + "' at unknown location '" + loc + "'");
    }
  }
  if (held > 1) fail("more than one object in inventory");
  for (const auto& g : goal) {
    if (!object_names.count(g.object)) fail("goal references unknown object '" + g.object + "'");
    if (!recep_names.count(g.receptacle)) {
      fail("goal references unknown receptacle '" + g.receptacle + "'");
    }
  }
  if (max_steps < 1) fail("max_steps must be positive");
  if (steps_taken < 0 || steps_taken > max_steps) fail("steps_taken out of range");
}

std::string WorldState::fingerprint() const {
  json j = *this;
  j.erase("steps_taken");
  return j.dump();
}

// ---------------------------------------------------------------------------
// ActionCommand

namespace {

std::string collapse(std::string_view s) {
  std::vector<std::string> parts;
  for (auto w : text::words(s)) parts.emplace_back(text::to_lower(w));
  return text::join(parts, " ");
}

bool strip_prefix(std::string_view& s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) return false;
  s.remove_prefix(prefix.size());
  return true;
}

}  // namespace

std::optional<ActionCommand> ActionCommand::parse(std::string_view raw) {
  const std::string norm = collapse(raw);
  std::string_view s = norm;
  ActionCommand cmd;
  cmd.raw = std::string(text::trim(raw));
  if (s == "wait") {
    cmd.verb = Verb::wait;
    return cmd;
  }
  auto single = [&](Verb v) -> std::optional<ActionCommand> {
    if (s.empty()) return std::nullopt;
    cmd.verb = v;
    cmd.args = {std::string(s)};
    return cmd;
  };
  if (strip_prefix(s, "go to ")) return single(Verb::go_to);
  if (strip_prefix(s, "open ")) return single(Verb::open);
  if (strip_prefix(s, "close ")) return single(Verb::close);
  if (strip_prefix(s, "examine ")) return single(Verb::examine);
  if (strip_prefix(s, "focus on ")) return single(Verb::focus_on);
  if (strip_prefix(s, "take ")) {
    auto pos = s.find(" from ");
    if (pos == std::string_view::npos || pos == 0) return std::nullopt;
    auto recep = s.substr(pos + 6);
    if (recep.empty()) return std::nullopt;
    cmd.verb = Verb::take;
    cmd.args = {std::string(s.substr(0, pos)), std::string(recep)};
    return cmd;
  }
  if (strip_prefix(s, "put ")) {
    for (std::string_view sep : {" in/on ", " in ", " on "}) {
      auto pos = s.find(sep);
      if (pos == std::string_view::npos || pos == 0) continue;
      auto recep = s.substr(pos + sep.size());
      if (recep.empty()) return std::nullopt;
      cmd.verb = Verb::put;
      cmd.args = {std::string(s.substr(0, pos)), std::string(recep)};
      return cmd;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

ActionCommand ActionCommand::make(Verb verb, std::vector<std::string> args) {
  ActionCommand cmd;
  cmd.verb = verb;
  cmd.args = std::move(args);
  cmd.raw = cmd.canonical();
  return cmd;
}

std::string ActionCommand::canonical() const {
  auto arg = [&](std::size_t i) { return i < args.size() ? args[i] : std::string(); };
  switch (verb) {
    case Verb::go_to: return "go to " + arg(0);
    case Verb::take: return "take " + arg(0) + " from " + arg(1);
    case Verb::put: return "put " + arg(0) + " in/on " + arg(1);
    case Verb::open: return "open " + arg(0);
    case Verb::close: return "close " + arg(0);
    case Verb::examine: return "examine " + arg(0);
    case Verb::focus_on: return "focus on " + arg(0);
    case Verb::wait: return "wait";
  }
  return "wait";
}

// ---------------------------------------------------------------------------
// Observations

namespace {

bool accessible(const Receptacle& r) { return !r.openable || r.open; }

std::vector<std::string> contents_of(const WorldState& w, std::string_view recep) {
  std::vector<std::string> out;
  for (const auto& [name, loc] : w.objects) {
    if (loc == recep) out.push_back(name);
  }
  return out;
}

std::string contents_line(const WorldState& w, const Receptacle& r) {
  auto items = contents_of(w, r.name);
  std::string line = (r.openable ? "In the " : "On the ") + r.name + ": ";
  line += items.empty() ? std::string("nothing") : text::join(items, ", ");
  return line + ".";
}

bool visible(const WorldState& w, std::string_view object) {
  const auto* loc = w.location_of(object);
  if (!loc) return false;
  if (*loc == kInventory) return true;
  const auto* r = w.find_receptacle(*loc);
  return r && r->room == w.agent_room && accessible(*r);
}

const Receptacle* local_receptacle(const WorldState& w, std::string_view name) {
  const auto* r = w.find_receptacle(name);
  return (r && r->room == w.agent_room) ? r : nullptr;
}

}  // namespace

std::string describe_room(const WorldState& w, std::string_view room) {
  std::vector<std::string> here;
  std::vector<std::string> lines;
  for (const auto& r : w.receptacles) {
    if (r.room != room) continue;
    here.push_back(r.openable ? r.name + (r.open ? " (open)" : " (closed)") : r.name);
  }
  std::string first = "You are in the " + std::string(room) + ". Receptacles here: ";
  first += here.empty() ? std::string("none") : text::join(here, ", ");
  lines.push_back(first + ".");
  for (const auto& r : w.receptacles) {
    if (r.room == room && accessible(r)) lines.push_back(contents_line(w, r));
  }
  if (auto held = w.held_object()) lines.push_back("You are holding: " + *held + ".");
  std::vector<std::string> others;
  for (const auto& r : w.rooms) {
    if (r != room) others.push_back(r);
  }
  lines.push_back("Other rooms: " + (others.empty() ? std::string("none") : text::join(others, ", ")) + ".");
  return text::join(lines, "\n");
}

std::string initial_observation(const WorldState& world, std::string_view instruction_text) {
  return describe_room(world, world.agent_room) + "\nYour task is to: " + std::string(instruction_text) + ".";
}

std::string goal_text(const std::vector<GoalClause>& goal) {
  std::vector<std::string> parts;
  for (const auto& g : goal) {
    std::string p = g.require_closed ? "put the " + g.object + " in the " + g.receptacle
                                     : "put the " + g.object + " in/on the " + g.receptacle;
    if (g.require_closed) p += " and close the " + g.receptacle;
    if (g.require_focus) p += " and focus on the " + g.object;
    parts.push_back(std::move(p));
  }
  if (parts.size() <= 1) return parts.empty() ? std::string() : parts.front();
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += (i + 1 == parts.size()) ? ", and then " : ", then ";
    out += parts[i];
  }
  return out;
}

std::vector<std::string> grounded_actions(const WorldState& w) {
  std::vector<std::string> out;
  for (const auto& room : w.rooms) out.push_back("go to " + room);
  for (const auto& [obj, loc] : w.objects) {
    for (const auto& r : w.receptacles) out.push_back("take " + obj + " from " + r.name);
  }
  for (const auto& [obj, loc] : w.objects) {
    for (const auto& r : w.receptacles) out.push_back("put " + obj + " in/on " + r.name);
  }
  for (const auto& r : w.receptacles) {
    if (r.openable) {
      out.push_back("open " + r.name);
      out.push_back("close " + r.name);
    }
  }
  for (const auto& r : w.receptacles) out.push_back("examine " + r.name);
  for (const auto& [obj, loc] : w.objects) out.push_back("examine " + obj);
  for (const auto& [obj, loc] : w.objects) out.push_back("focus on " + obj);
  out.push_back("wait");
  return out;
}

// ---------------------------------------------------------------------------
// MiniWorld

std::string MiniWorld::reset(const TaskSpec& task) {
  task.world.validate();
  state_ = task.world;
  state_.steps_taken = 0;
  instruction_text_ = task.instruction.text;
  started_ = true;
  done_ = false;
  return initial_observation(state_, instruction_text_);
}

std::string MiniWorld::reset(const TaskInstruction& task) {
  auto parsed = parse_task_id(task.task_id);
  if (!parsed) {
    throw Error(ErrorKind::config, "unknown task_id schema '" + task.task_id + "'");
  }
  auto spec = generate_task(parsed->first, parsed->second, options_);
  if (spec.instruction.text != task.text) {
    throw Error(ErrorKind::config, "task '" + task.task_id + "' does not match its generated world");
  }
  return reset(spec);
}

StepOutcome MiniWorld::step(std::string_view raw_action) {
  if (auto cmd = ActionCommand::parse(raw_action)) return step(*cmd);
  // Unparseable text is an invalid action: it consumes a step and changes nothing.
  check_steppable();
  return finish(false, {});
}

StepOutcome MiniWorld::step(const ActionCommand& action) {
  check_steppable();
  std::string observation;
  const bool ok = apply(action, observation);
  return finish(ok, std::move(observation));
}

void MiniWorld::check_steppable() const {
  if (!started_) throw Error(ErrorKind::protocol, "step called before reset");
  if (done_) throw Error(ErrorKind::protocol, "step called after episode finished");
}

StepOutcome MiniWorld::finish(bool ok, std::string observation) {
  StepOutcome out;
  ++state_.steps_taken;
  out.invalid = !ok;
  out.observation = ok ? std::move(observation) : std::string(kNothingHappened);
  if (ok && state_.goal_satisfied()) {
    out.reward = 1;
    out.done = true;
  }
  if (state_.steps_taken >= state_.max_steps) out.done = true;
  out.score = out.reward;
  done_ = out.done;
  return out;
}

std::vector<std::string> MiniWorld::action_templates() const {
  return state_.action_templates.empty() ? grounded_actions(state_) : state_.action_templates;
}

bool MiniWorld::apply(const ActionCommand& a, std::string& obs) {
  WorldState& w = state_;
  auto arg = [&](std::size_t i) -> const std::string& {
    static const std::string empty;
    return i < a.args.size() ? a.args[i] : empty;
  };
  switch (a.verb) {
    case Verb::go_to: {
      if (std::find(w.rooms.begin(), w.rooms.end(), arg(0)) == w.rooms.end()) return false;
      if (arg(0) == w.agent_room) return false;
      w.agent_room = arg(0);
      obs = describe_room(w, w.agent_room);
      return true;
    }
    case Verb::take: {
      const auto* r = local_receptacle(w, arg(1));
      if (!r || !accessible(*r) || w.held_object()) return false;
      for (auto& [name, loc] : w.objects) {
        if (name == arg(0) && loc == r->name) {
          loc = std::string(kInventory);
          obs = "You pick up the " + name + " from the " + r->name + ".";
          return true;
        }
      }
      return false;
    }
    case Verb::put: {
      const auto* r = local_receptacle(w, arg(1));
      if (!r || !accessible(*r)) return false;
      for (auto& [name, loc] : w.objects) {
        if (name == arg(0) && loc == kInventory) {
          loc = r->name;
          obs = "You put the " + name + " in/on the " + r->name + ".";
          return true;
        }
      }
      return false;
    }
    case Verb::open:
    case Verb::close: {
      const bool opening = a.verb == Verb::open;
      auto* r = w.find_receptacle(arg(0));
      if (!r || r->room != w.agent_room || !r->openable || r->open == opening) return false;
      r->open = opening;
      if (!opening) {
        obs = "You close the " + r->name + ".";
      } else {
        auto items = contents_of(w, r->name);
        obs = "You open the " + r->name + ". ";
        obs += items.empty() ? std::string("It is empty.") : "In it, you see: " + text::join(items, ", ") + ".";
      }
      return true;
    }
    case Verb::examine: {
      if (const auto* r = local_receptacle(w, arg(0))) {
        obs = accessible(*r) ? contents_line(w, *r) : "The " + r->name + " is closed.";
        return true;
      }
      if (!visible(w, arg(0))) return false;
      const auto* loc = w.location_of(arg(0));
      obs = *loc == kInventory ? "You are carrying the " + arg(0) + "."
                               : "You see nothing special about the " + arg(0) + ". It is in/on the " + *loc + ".";
      return true;
    }
    case Verb::focus_on: {
      if (!visible(w, arg(0))) return false;
      w.focused = arg(0);
      obs = "You focus on the " + arg(0) + ".";
      return true;
    }
    case Verb::wait:
      obs = "You wait.";
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Task ids

std::string make_task_id(Difficulty d, std::int64_t seed) {
  return "mw-" + text::to_lower(to_string(d)) + "-" + std::to_string(seed);
}

std::optional<std::pair<Difficulty, std::int64_t>> parse_task_id(std::string_view id) {
  if (id.substr(0, 3) != "mw-") return std::nullopt;
  id.remove_prefix(3);
  auto dash = id.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto band = id.substr(0, dash);
  auto num = id.substr(dash + 1);
  if (num.empty()) return std::nullopt;
  Difficulty d;
  if (band == "easy") d = Difficulty::easy;
  else if (band == "medium") d = Difficulty::medium;
  else if (band == "hard") d = Difficulty::hard;
  else return std::nullopt;
  std::size_t i = (num[0] == '-') ? 1 : 0;
  if (i == num.size()) return std::nullopt;
  for (; i < num.size(); ++i) {
    if (num[i] < '0' || num[i] > '9') return std::nullopt;
  }
  try {
    return std::make_pair(d, static_cast<std::int64_t>(std::stoll(std::string(num))));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const TaskInstruction& t) {
  j = json{{"task_id", t.task_id},
           {"text", t.text},
           {"category", to_string(t.category)},
           {"difficulty", to_string(t.difficulty)},
           {"optimal_length", t.optimal_length},
           {"seed", t.seed}};
}

void from_json(const json& j, TaskInstruction& t) {
  using detail::require;
  t.task_id = require<std::string>(j, "task_id");
  t.text = require<std::string>(j, "text");
  try {
    t.category = parse_category(require<std::string>(j, "category"));
    t.difficulty = parse_difficulty(require<std::string>(j, "difficulty"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    throw Error(ErrorKind::parse, e.what());
  }
  t.optimal_length = require<int>(j, "optimal_length");
  t.seed = require<std::int64_t>(j, "seed");
}

void to_json(json& j, const WorldState& w) {
  json receps = json::array();
  for (const auto& r : w.receptacles) {
    receps.push_back({{"name", r.name}, {"room", r.room}, {"openable", r.openable}, {"open", r.open}});
  }
  json objs = json::array();
  for (const auto& [name, loc] : w.objects) objs.push_back({{"name", name}, {"location", loc}});
  json goal = json::array();
  for (const auto& g : w.goal) {
    goal.push_back({{"object", g.object},
                    {"receptacle", g.receptacle},
                    {"require_closed", g.require_closed},
                    {"require_focus", g.require_focus}});
  }
  j = json{{"rooms", w.rooms},
           {"receptacles", receps},
           {"objects", objs},
           {"agent_room", w.agent_room},
           {"goal", goal},
           {"focused", w.focused},
           {"steps_taken", w.steps_taken},
           {"max_steps", w.max_steps},
           {"action_templates", w.action_templates}};
}

void from_json(const json& j, WorldState& w) {
  using detail::optional_field;
  using detail::require;
  w.rooms = require<std::vector<std::string>>(j, "rooms");
  w.receptacles.clear();
  for (const auto& r : require<json>(j, "receptacles")) {
    w.receptacles.push_back({require<std::string>(r, "name"), require<std::string>(r, "room"),
                             require<bool>(r, "openable"), require<bool>(r, "open")});
  }
  w.objects.clear();
  for (const auto& o : require<json>(j, "objects")) {
    w.objects.emplace_back(require<std::string>(o, "name"), require<std::string>(o, "location"));
  }
  w.agent_room = require<std::string>(j, "agent_room");
  w.goal.clear();
  for (const auto& g : require<json>(j, "goal")) {
    w.goal.push_back({require<std::string>(g, "object"), require<std::string>(g, "receptacle"),
                      optional_field<bool>(g, "require_closed", false),
                      optional_field<bool>(g, "require_focus", false)});
  }
  w.focused = optional_field<std::string>(j, "focused", "");
  w.steps_taken = optional_field<int>(j, "steps_taken", 0);
  w.max_steps = optional_field<int>(j, "max_steps", 40);
  w.action_templates = optional_field<std::vector<std::string>>(j, "action_templates", {});
}

void to_json(json& j, const TaskSpec& t) { j = json{{"instruction", t.instruction}, {"world", t.world}}; }

void from_json(const json& j, TaskSpec& t) {
  t.instruction = detail::require<TaskInstruction>(j, "instruction");
  t.world = detail::require<WorldState>(j, "world");
}

}  // namespace plansmith::env
