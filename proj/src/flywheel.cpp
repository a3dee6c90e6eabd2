#include "plansmith/flywheel.hpp"

#include <atomic>
#include <cmath>
#include <fstream>

#include "json_util.hpp"
#include "plansmith/context.hpp"
#include "plansmith/error.hpp"
#include "plansmith/parallel.hpp"
#include "plansmith/policy.hpp"
#include "plansmith/prompts.hpp"
#include "plansmith/text.hpp"

namespace plansmith::flywheel {

using nlohmann::json;
using nlohmann::ordered_json;

void to_json(json& j, const SeedEpisode& s) {
  j = json{{"episode_id", s.episode_id},
           {"instruction", s.instruction},
           {"transcript", s.transcript},
           {"success", s.success},
           {"source_model", s.source_model}};
}

void from_json(const json& j, SeedEpisode& s) {
  s.episode_id = detail::require<std::string>(j, "episode_id");
  s.instruction = detail::require<env::TaskInstruction>(j, "instruction");
  s.transcript = detail::require<std::vector<ChatMessage>>(j, "transcript");
  s.success = detail::require<bool>(j, "success");
  s.source_model = detail::optional_field<std::string>(j, "source_model", "");
}

std::vector<SeedEpisode> load_seed_episodes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open seed fixture " + path.string());
  std::vector<SeedEpisode> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<SeedEpisode>());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curation

namespace {

struct Drop {
  int step;
  std::string reason;
};

Trajectory convert(const SeedEpisode& ep) {
  const auto& msgs = ep.transcript;
  std::size_t i = 0;
  if (i < msgs.size() && msgs[i].role == Role::system) ++i;
  if (i >= msgs.size() || msgs[i].role != Role::user) throw Drop{0, "transcript does not start with a user message"};
  std::string first = msgs[i].content;
  const std::string prefix = ep.instruction.text + "\n\n";
  if (first.rfind(prefix, 0) == 0) {
    first = first.substr(prefix.size());
  } else if (first == ep.instruction.text) {
    first.clear();
  }
  Trajectory t;
  t.instruction = ep.instruction;
  t.source = TrajectorySource::seed;
  std::string observation = std::move(first);
  ++i;
  int step = 0;
  for (; i < msgs.size(); i += 2) {
    ++step;
    if (msgs[i].role != Role::assistant) throw Drop{step, "expected an assistant message"};
    policy::PolicyOutput out;
    try {
      out = policy::parse_output(msgs[i].content);
    } catch (const Error& e) {
      throw Drop{step, e.what()};
    }
    if (out.long_thought.empty()) throw Drop{step, "missing reasoning block"};
    PlanningQuaternion q;
    q.step_index = step;
    q.observation = observation;
    q.long_thought = out.long_thought;
    q.action = out.action_raw;
    t.steps.push_back(std::move(q));
    if (i + 1 < msgs.size()) {
      if (msgs[i + 1].role != Role::user) throw Drop{step, "expected a user message after the action"};
      observation = msgs[i + 1].content;
    }
  }
  if (t.steps.empty()) throw Drop{0, "transcript has no assistant turns"};
  t.final_reward = 1;
  t.final_score = 1.0;
  return t;
}

}  // namespace

CurationResult curate_seeds(std::span<const SeedEpisode> episodes) {
  CurationResult r;
  for (const auto& ep : episodes) {
    if (!ep.success) {
      ++r.unsuccessful;
      continue;
    }
    try {
      Trajectory t = convert(ep);
      for (auto& q : t.steps) {
        q.token_usage = {context::count_tokens(q.long_thought), 0, context::count_tokens(q.action)};
      }
      t.rehash();
      r.trajectories.push_back(std::move(t));
    } catch (const Drop& d) {
      r.dropped.push_back({ep.episode_id, d.step, d.reason});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Distillation

int token_budget(int long_tokens, const DistillOptions& options) {
  const double scaled = options.rho * static_cast<double>(long_tokens);
  const int budget = std::max(static_cast<int>(std::floor(scaled + 1e-9)), options.floor_tokens);
  return std::min(budget, long_tokens);
}

bool within_budget(int short_tokens, int long_tokens, const DistillOptions& options) {
  return short_tokens <= token_budget(long_tokens, options);
}

std::vector<ChatMessage> distillation_prompt(std::string_view long_thought) {
  static const prompts::Template tmpl = prompts::builtin("distillation");
  return prompts::render(tmpl, {{"reasoning_content", "<reasoning>" + std::string(long_thought) + "</reasoning>"}});
}

namespace {

std::string strip_markers(std::string_view response) {
  std::string_view s = response;
  if (const auto open = s.find("<reasoning>"); open != std::string_view::npos) {
    s = s.substr(open + 11);
    if (const auto close = s.find("</reasoning>"); close != std::string_view::npos) s = s.substr(0, close);
  }
  return std::string(s);
}

std::string single_line(std::string_view s, std::size_t max_words = std::string::npos) {
  const auto w = text::words(s);
  std::vector<std::string> kept(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(std::min(max_words, w.size())));
  return text::join(kept, " ");
}

}  // namespace

std::string reasoning_text(std::string_view response) { return text::normalize_lines(strip_markers(response)); }

DistillationResult distill(std::string_view long_thought, teacher::Teacher& teacher, const DistillOptions& options) {
  if (text::trim(long_thought).empty()) throw Error(ErrorKind::validation, "distill: long thought is empty");
  DistillationResult r;
  r.long_thought = text::normalize_lines(long_thought);
  const int long_tokens = context::count_tokens(r.long_thought);
  const int budget = token_budget(long_tokens, options);
  const auto prompt = distillation_prompt(r.long_thought);
  std::string candidate;
  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    r.attempts = attempt;
    candidate = single_line(strip_markers(teacher.complete(prompt)));
    const int n = context::count_tokens(candidate);
    if (n > 0 && n <= budget) {
      r.short_thought = std::move(candidate);
      r.accepted = true;
      return r;
    }
  }
  r.short_thought = single_line(candidate.empty() ? r.long_thought : candidate, static_cast<std::size_t>(budget));
  r.accepted = true;
  r.truncated = true;
  return r;
}

std::vector<Trajectory> distill_trajectories(std::vector<Trajectory> trajs, teacher::Teacher& teacher,
                                             const DistillOptions& options, DistillStats* stats) {
  struct Job {
    std::size_t traj;
    std::size_t step;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (std::size_t s = 0; s < trajs[i].steps.size(); ++s) {
      const auto& q = trajs[i].steps[s];
      if (q.short_thought.empty() && !q.long_thought.empty()) jobs.push_back({i, s});
    }
  }
  std::vector<DistillationResult> results(jobs.size());
  parallel_for(jobs.size(), teacher.concurrency_limit(), [&](std::size_t k) {
    results[k] = distill(trajs[jobs[k].traj].steps[jobs[k].step].long_thought, teacher, options);
  });
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    trajs[jobs[k].traj].steps[jobs[k].step].short_thought = results[k].short_thought;
    if (stats) {
      ++stats->steps;
      stats->teacher_calls += results[k].attempts;
      stats->truncated += results[k].truncated ? 1 : 0;
    }
  }
  return trajs;
}

// ---------------------------------------------------------------------------
// Expansion

namespace {

std::string render_messages(const std::vector<ordered_json>& msgs) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    out += "  " + msgs[i].dump();
    out += i + 1 < msgs.size() ? ",\n" : "\n";
  }
  out += "]";
  return out;
}

}  // namespace

std::string render_target_messages(const Trajectory& traj, std::size_t step) {
  if (step < 1 || step > traj.steps.size()) throw Error(ErrorKind::validation, "target step out of range");
  std::vector<ordered_json> msgs;
  for (std::size_t i = 0; i < step; ++i) {
    const auto& q = traj.steps[i];
    msgs.push_back({{"role", "user"},
                    {"content", i == 0 ? first_user_content(traj.instruction.text, q.observation) : q.observation}});
    const bool last = i + 1 == step;
    msgs.push_back({{"role", "assistant"},
                    {"content", last ? "Action: " + q.action : history_assistant_content(q.short_thought, q.action)}});
  }
  return render_messages(msgs);
}

std::string render_examples_section(std::span<const Trajectory> seeds, int n_examples) {
  std::string out;
  const std::size_t n = std::min<std::size_t>(seeds.size(), static_cast<std::size_t>(std::max(0, n_examples)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seed = seeds[i];
    const std::size_t step = (seed.steps.size() + 1) / 2;
    out += "\nExample " + std::to_string(i + 1) + " trajectory:\n";
    out += render_target_messages(seed, step);
    out += "\nExample " + std::to_string(i + 1) + " reasoning:\n";
    out += seed.steps[step - 1].long_thought;
    out += '\n';
  }
  return out;
}

std::vector<ChatMessage> synthesis_prompt(std::string_view examples_section, std::string_view target_messages) {
  static const prompts::Template tmpl = prompts::builtin("quaternion_synthesis");
  return prompts::render(tmpl, {{"examples_section", std::string(examples_section)},
                                {"target_messages", std::string(target_messages)}});
}

ExpansionResult expand(std::span<const Trajectory> seeds, std::span<const Trajectory> targets,
                       teacher::Teacher& teacher, int n_target, const ExpandOptions& options) {
  ExpansionResult r;
  const std::size_t n = std::min<std::size_t>(targets.size(), static_cast<std::size_t>(std::max(0, n_target)));
  if (n == 0) return r;
  if (seeds.empty()) throw Error(ErrorKind::validation, "expand: at least one seed exemplar is required");
  const std::string examples = render_examples_section(seeds, options.n_examples);

  std::vector<std::optional<Trajectory>> slots(n);
  std::vector<std::string> errors(n);
  std::atomic<int> calls{0};
  parallel_for(n, teacher.concurrency_limit(), [&](std::size_t i) {
    Trajectory t = targets[i];
    try {
      for (std::size_t s = 0; s < t.steps.size(); ++s) {
        ++calls;
        std::string e =
            reasoning_text(teacher.complete(synthesis_prompt(examples, render_target_messages(t, s + 1))));
        if (e.empty()) throw Error(ErrorKind::backend, "teacher returned no reasoning for step " + std::to_string(s + 1));
        t.steps[s].long_thought = std::move(e);
      }
    } catch (const Error& err) {
      errors[i] = "target " + std::to_string(i) + ": " + err.what();
      return;
    }
    t.source = TrajectorySource::synthetic_expansion;
    t.rehash();
    slots[i] = std::move(t);
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      r.trajectories.push_back(std::move(*slots[i]));
    } else {
      ++r.skipped;
      r.errors.push_back(std::move(errors[i]));
    }
  }
  r.teacher_calls = calls;
  return r;
}

Trajectory plan_trajectory(const env::TaskSpec& task) {
  const auto plan = env::solve_optimal(task.world);
  env::MiniWorld world;
  std::string obs = world.reset(task);
  Trajectory t;
  t.instruction = task.instruction;
  int reward = 0;
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    PlanningQuaternion q;
    q.step_index = static_cast<int>(i) + 1;
    q.observation = obs;
    q.action = plan.actions[i].canonical();
    q.token_usage.action_tokens = context::count_tokens(q.action);
    t.steps.push_back(std::move(q));
    const auto outcome = world.step(plan.actions[i]);
    obs = outcome.observation;
    reward = outcome.reward;
  }
  t.final_reward = reward;
  t.final_score = reward;
  t.source = TrajectorySource::rollout;
  t.rehash();
  return t;
}

// ---------------------------------------------------------------------------
// Assembly and export

std::vector<Trajectory> assemble_quaternions(std::vector<Trajectory> trajs) {
  std::string problems;
  for (auto& t : trajs) {
    std::vector<std::string> missing;
    for (auto& q : t.steps) {
      q.long_thought = text::normalize_lines(q.long_thought);
      q.short_thought = text::normalize_lines(q.short_thought);
      q.action = std::string(text::trim(q.action));
      if (q.long_thought.empty() || q.short_thought.empty()) missing.push_back(std::to_string(q.step_index));
      q.token_usage = {context::count_tokens(q.long_thought), context::count_tokens(q.short_thought),
                       context::count_tokens(q.action)};
    }
    if (!missing.empty()) {
      problems += "\n  trajectory " + t.trajectory_id + ": steps " + text::join(missing, ", ");
    }
    t.rehash();
  }
  if (!problems.empty()) throw Error(ErrorKind::assembly, "incomplete planning quaternions:" + problems);
  for (const auto& t : trajs) t.validate();
  return trajs;
}

void check_exemplar_shape(const SFTExemplar& ex) {
  const auto& m = ex.input_messages;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::validation, "exemplar " + ex.trajectory_id + "#" + std::to_string(ex.target_step) + ": " + msg);
  };
  if (ex.target_step < 1) fail("target_step must be positive");
  if (m.size() != 2 * static_cast<std::size_t>(ex.target_step)) fail("expected 2N input messages");
  if (m.front().role != Role::system) fail("first message must be the system prompt");
  for (std::size_t i = 1; i < m.size(); ++i) {
    const Role want = i % 2 == 1 ? Role::user : Role::assistant;
    if (m[i].role != want) fail("roles do not alternate at message " + std::to_string(i));
  }
  if (m.back().role != Role::user) fail("last input message must be a user turn");
}

std::size_t export_sft(const DatasetVersion& dataset, const std::filesystem::path& path,
                       std::string_view system_prompt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  std::size_t count = 0;
  for (const auto& t : dataset.trajectories) {
    for (const auto& ex : to_exemplars(t, system_prompt)) {
      check_exemplar_shape(ex);
      out << exemplar_json(ex).dump() << '\n';
      ++count;
    }
  }
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
  return count;
}

}  // namespace plansmith::flywheel
