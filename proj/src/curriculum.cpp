#include "plansmith/curriculum.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "plansmith/context.hpp"
#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"
#include "plansmith/policy.hpp"
#include "plansmith/prompts.hpp"
#include "plansmith/text.hpp"

namespace plansmith::curriculum {

using nlohmann::json;

void to_json(json& j, const TaskSkeleton& s) {
  j = json{{"messages", s.messages},
           {"category", s.category},
           {"category_topic", s.category_topic},
           {"difficulty", env::to_string(s.difficulty)},
           {"target_length", s.target_length},
           {"validated", s.validated}};
}

bool TerminalActions::matches(std::string_view action) const {
  const std::string a = text::to_lower(text::trim(action));
  for (const auto& v : verbs) {
    if (a == v || (a.size() > v.size() && a.compare(0, v.size(), v) == 0 && a[v.size()] == ' ')) return true;
  }
  return false;
}

TerminalActions TerminalActions::miniworld() { return {{"put", "close", "focus on"}}; }
TerminalActions TerminalActions::scienceworld() { return {{"focus on", "wait", "wait1"}}; }

std::vector<ChatMessage> skeleton_prompt(const SkeletonRequest& request) {
  static const prompts::Template tmpl = prompts::builtin("skeleton");
  return prompts::render(tmpl, {{"category", request.category},
                                {"category_topic", request.category_topic},
                                {"difficulty", std::string(env::to_string(request.difficulty))},
                                {"target_length", std::to_string(request.target_length)},
                                {"trajectory_examples", text::join(request.exemplars, "\n\n")}});
}

std::string render_skeleton_exemplar(const Trajectory& traj, std::string_view system_prompt) {
  using nlohmann::ordered_json;
  std::vector<ordered_json> msgs;
  msgs.push_back({{"role", "user"}, {"content", system_prompt}});
  msgs.push_back({{"role", "assistant"}, {"content", "OK"}});
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& q = traj.steps[i];
    msgs.push_back({{"role", "user"},
                    {"content", i == 0 ? first_user_content(traj.instruction.text, q.observation) : q.observation}});
    msgs.push_back({{"role", "assistant"}, {"content", history_assistant_content(q.short_thought, q.action)}});
  }
  std::string out = "[\n";
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    out += "  " + msgs[i].dump();
    out += i + 1 < msgs.size() ? ",\n" : "\n";
  }
  return out + "]";
}

std::string extract_fenced_json(std::string_view response) {
  constexpr std::string_view kOpen = "```json";
  const auto open = response.find(kOpen);
  if (open == std::string_view::npos) throw Error(ErrorKind::parse, "unfenced");
  const auto body = open + kOpen.size();
  const auto close = response.find("```", body);
  if (close == std::string_view::npos) throw Error(ErrorKind::parse, "unfenced");
  return std::string(response.substr(body, close - body));
}

namespace {

std::string action_of(const ChatMessage& m) {
  try {
    return policy::parse_output(m.content).action_raw;
  } catch (const Error&) {
    return {};
  }
}

std::string object_of(std::string_view action) {
  const std::string a = text::to_lower(text::trim(action));
  auto after = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (a.rfind(prefix, 0) != 0) return std::nullopt;
    return std::string_view(a).substr(prefix.size());
  };
  auto cut = [](std::string_view rest, std::initializer_list<std::string_view> seps) {
    std::size_t best = rest.size();
    for (auto sep : seps) best = std::min(best, rest.find(sep));
    return std::string(text::trim(rest.substr(0, best)));
  };
  if (auto r = after("take ")) return cut(*r, {" from "});
  if (auto r = after("pick up ")) return cut(*r, {});
  if (auto r = after("put ")) return cut(*r, {" in/on ", " into ", " in ", " on "});
  if (auto r = after("move ")) return cut(*r, {" to "});
  if (auto r = after("focus on ")) return cut(*r, {});
  return {};
}

}  // namespace

int count_objects(const std::vector<ChatMessage>& messages) {
  std::set<std::string> objects;
  for (std::size_t i = 3; i < messages.size(); i += 2) {
    if (messages[i].role != Role::assistant) continue;
    if (auto obj = object_of(action_of(messages[i])); !obj.empty()) objects.insert(obj);
  }
  return static_cast<int>(objects.size());
}

bool objects_in_band(int objects, env::Difficulty difficulty) {
  switch (difficulty) {
    case env::Difficulty::easy: return objects >= 1 && objects <= 2;
    case env::Difficulty::medium: return objects >= 2 && objects <= 3;
    case env::Difficulty::hard: return objects > 3;
  }
  return false;
}

std::string validate_skeleton(const std::vector<ChatMessage>& m, env::Difficulty difficulty,
                              const TerminalActions& terminal) {
  if (m.size() < 4) return "too few messages";
  if (m[0].role != Role::user) return "message 1 must be the user system prompt";
  if (m[1].role != Role::assistant || text::trim(m[1].content) != "OK") return "message 2 must be assistant \"OK\"";
  for (std::size_t i = 2; i < m.size(); ++i) {
    const Role want = i % 2 == 0 ? Role::user : Role::assistant;
    if (m[i].role != want) return "roles do not alternate at message " + std::to_string(i + 1);
  }
  std::string last_action;
  for (std::size_t i = 3; i < m.size(); i += 2) {
    try {
      last_action = policy::parse_output(m[i].content).action_raw;
    } catch (const Error& e) {
      return "message " + std::to_string(i + 1) + ": " + e.what();
    }
  }
  if (!terminal.matches(last_action)) return "final action '" + last_action + "' is not terminal";
  const int objects = count_objects(m);
  if (!objects_in_band(objects, difficulty)) {
    return std::to_string(objects) + " distinct objects is outside the " + std::string(env::to_string(difficulty)) +
           " band";
  }
  return {};
}

TaskSkeleton parse_skeleton(std::string_view response, const SkeletonRequest& request,
                            const TerminalActions& terminal) {
  const std::string body = extract_fenced_json(response);
  TaskSkeleton s;
  try {
    const json j = json::parse(body);
    if (!j.is_array()) throw Error(ErrorKind::parse, "skeleton is not a JSON list");
    s.messages = j.get<std::vector<ChatMessage>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("invalid JSON: ") + e.what());
  }
  s.category = request.category;
  s.category_topic = request.category_topic;
  s.difficulty = request.difficulty;
  s.target_length = request.target_length;
  if (const auto reason = validate_skeleton(s.messages, request.difficulty, terminal); !reason.empty()) {
    throw Error(ErrorKind::parse, reason);
  }
  s.validated = true;
  return s;
}

SkeletonBatch synthesize_skeletons(teacher::Teacher& teacher, const SkeletonRequest& request,
                                   const SkeletonOptions& options) {
  if (request.exemplars.empty()) throw Error(ErrorKind::validation, "skeleton synthesis needs at least one exemplar");
  SkeletonBatch batch;
  const auto prompt = skeleton_prompt(request);
  for (int k = 0; k < request.n; ++k) {
    bool ok = false;
    for (int attempt = 1; attempt <= 1 + options.max_retries && !ok; ++attempt) {
      ++batch.teacher_calls;
      try {
        batch.skeletons.push_back(parse_skeleton(teacher.complete(prompt), request, options.terminal));
        ok = true;
      } catch (const Error& e) {
        batch.rejections.push_back({k, attempt, e.what()});
      }
    }
    if (!ok) batch.partial = true;
  }
  return batch;
}

Trajectory populate(const TaskSkeleton& skeleton, teacher::Teacher& teacher, std::span<const Trajectory> seeds,
                    const PopulateOptions& options) {
  if (!skeleton.validated) throw Error(ErrorKind::validation, "populate: skeleton is not validated");
  const auto& m = skeleton.messages;
  Trajectory t;
  t.instruction.text = m[2].content;
  t.instruction.category = env::TaskCategory::compound;
  t.source = TrajectorySource::skeleton;
  for (std::size_t i = 3, step = 1; i < m.size(); i += 2, ++step) {
    policy::PolicyOutput out;
    try {
      out = policy::parse_output(m[i].content);
    } catch (const Error& e) {
      throw Error(ErrorKind::validation, "skeleton step " + std::to_string(step) + ": " + e.what());
    }
    PlanningQuaternion q;
    q.step_index = static_cast<int>(step);
    q.observation = step == 1 ? std::string() : m[i - 1].content;
    q.short_thought = text::normalize_lines(out.short_thought);
    q.action = out.action_raw;
    t.steps.push_back(std::move(q));
  }
  const int length = static_cast<int>(t.steps.size());
  t.instruction.optimal_length = length;
  t.instruction.difficulty = env::stratum_for_length(length, options.thresholds);
  t.instruction.task_id = "skel-" + sha256_hex(json(m).dump()).substr(0, 16);

  const std::string examples = flywheel::render_examples_section(seeds, options.n_examples);
  for (std::size_t s = 0; s < t.steps.size(); ++s) {
    auto& q = t.steps[s];
    const std::string response =
        teacher.complete(flywheel::synthesis_prompt(examples, flywheel::render_target_messages(t, s + 1)));
    std::string reasoning = flywheel::reasoning_text(response);
    if (reasoning.empty()) throw Error(ErrorKind::validation, "skeleton step " + std::to_string(s + 1) + ": no reasoning");
    q.long_thought = std::move(reasoning);
    const int short_tokens = context::count_tokens(q.short_thought);
    if (short_tokens == 0 || !flywheel::within_budget(short_tokens, context::count_tokens(q.long_thought), options.distill)) {
      q.short_thought = flywheel::distill(q.long_thought, teacher, options.distill).short_thought;
    }
  }
  t.final_reward = 1;
  t.final_score = 1.0;
  return std::move(flywheel::assemble_quaternions({std::move(t)}).front());
}

// ---------------------------------------------------------------------------

Buckets stratify(std::span<const Trajectory> trajs, const env::StratumThresholds& thresholds) {
  Buckets b;
  for (const auto& t : trajs) {
    switch (env::stratum_for_length(t.certified_length(), thresholds)) {
      case env::Difficulty::easy: b.easy.push_back(t); break;
      case env::Difficulty::medium: b.medium.push_back(t); break;
      case env::Difficulty::hard: b.hard.push_back(t); break;
    }
  }
  return b;
}

CurriculumSchedule schedule(const Buckets& buckets, const ScheduleOptions& options) {
  if (buckets.size() == 0) throw Error(ErrorKind::scheduling, "all curriculum buckets are empty");
  CurriculumSchedule s;
  s.seed = options.seed;
  s.thresholds = options.thresholds;
  const std::vector<std::pair<env::Difficulty, const std::vector<Trajectory>*>> strata = {
      {env::Difficulty::easy, &buckets.easy},
      {env::Difficulty::medium, &buckets.medium},
      {env::Difficulty::hard, &buckets.hard}};
  std::vector<const Trajectory*> pool;
  for (const auto& [stratum, bucket] : strata) {
    if (bucket->empty()) continue;
    if (!options.cumulative) pool.clear();
    Phase p;
    p.stratum = stratum;
    p.epoch_hint = options.epochs;
    for (const auto& t : *bucket) {
      pool.push_back(&t);
      p.new_ids.push_back(t.trajectory_id);
    }
    std::vector<const Trajectory*> slice = pool;
    std::mt19937_64 rng(mix_seed(options.seed, s.phases.size()));
    for (std::size_t i = slice.size(); i > 1; --i) std::swap(slice[i - 1], slice[rng() % i]);
    for (const auto* t : slice) {
      p.trajectory_ids.push_back(t->trajectory_id);
      p.max_length = std::max(p.max_length, t->certified_length());
    }
    s.phases.push_back(std::move(p));
  }
  return s;
}

json to_json(const CurriculumSchedule& s) {
  json phases = json::array();
  for (const auto& p : s.phases) {
    phases.push_back({{"stratum", env::to_string(p.stratum)},
                      {"trajectory_ids", p.trajectory_ids},
                      {"new_ids", p.new_ids},
                      {"epoch_hint", p.epoch_hint},
                      {"max_length", p.max_length}});
  }
  return {{"phases", phases},
          {"thresholds", {{"easy_max", s.thresholds.easy_max}, {"medium_max", s.thresholds.medium_max}}},
          {"seed", s.seed}};
}

}  // namespace plansmith::curriculum
