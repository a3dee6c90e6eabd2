#include "plansmith/refine.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>
#include <random>

#include "plansmith/context.hpp"
#include "plansmith/error.hpp"
#include "plansmith/eval.hpp"
#include "plansmith/hash.hpp"
#include "plansmith/parallel.hpp"

namespace plansmith::refine {

using nlohmann::json;

namespace {

constexpr std::string_view kInvalidOutput = "(invalid output)";

}  // namespace

json to_json(const EpisodeResult& e) {
  return {{"trajectory", e.trajectory},
          {"success", e.success},
          {"reward", e.reward},
          {"score", e.score},
          {"steps_used", e.steps_used},
          {"reasoning_tokens_per_step", e.reasoning_tokens_per_step},
          {"failure_reason", e.failure_reason},
          {"invalid_outputs", e.invalid_outputs},
          {"context_truncated", e.context_truncated},
          {"task_index", e.task_index}};
}

std::vector<std::size_t> episode_tasks(std::size_t n_tasks, int n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n_tasks);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, 0x7461736b));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  std::vector<std::size_t> out;
  for (int i = 0; i < n; ++i) out.push_back(perm[static_cast<std::size_t>(i) % n_tasks]);
  return out;
}

EpisodeResult run_episode(const policy::PolicyBackend& policy, const env::TaskSpec& task,
                          const policy::EpisodeSettings& settings, const RolloutOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  EpisodeResult r;
  Trajectory& t = r.trajectory;
  t.instruction = task.instruction;
  t.source = TrajectorySource::rollout;
  t.iteration = options.iteration;

  env::MiniWorld world;
  std::string obs = world.reset(task);
  std::vector<context::HistoryStep> history;
  context::AssembleOptions assemble_opts{options.system_prompt, options.context_budget, {}};
  try {
    auto agent = policy.begin_episode(task, settings);
    while (!world.done()) {
      const auto ctx = context::assemble(task.instruction.text, history, obs, assemble_opts);
      r.context_truncated = r.context_truncated || ctx.truncated;
      const policy::PolicyOutput out = agent->generate(ctx);
      const std::string action = out.invalid ? std::string(kInvalidOutput) : out.action_raw;
      if (out.invalid) ++r.invalid_outputs;

      PlanningQuaternion q;
      q.step_index = static_cast<int>(t.steps.size()) + 1;
      q.observation = obs;
      q.long_thought = out.long_thought;
      q.short_thought = out.short_thought;
      q.action = action;
      q.token_usage = {context::count_tokens(q.long_thought), context::count_tokens(q.short_thought),
                       context::count_tokens(q.action)};
      history.push_back({q.step_index, q.observation, q.short_thought, q.action});
      r.reasoning_tokens_per_step.push_back(q.token_usage.long_tokens + q.token_usage.short_tokens);
      t.steps.push_back(std::move(q));

      const env::StepOutcome step = world.step(out.invalid ? std::string_view{} : std::string_view(action));
      obs = step.observation;
      r.reward = step.reward;
      r.score = step.reward;
    }
  } catch (const Error& e) {
    r.failure_reason = std::string(to_string(e.kind())) + ": " + e.what();
    r.reward = 0;
    r.score = 0.0;
  }
  r.success = r.reward == 1;
  r.steps_used = static_cast<int>(t.steps.size());
  t.final_reward = r.reward;
  t.final_score = r.score;
  t.rehash();
  r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<EpisodeResult> rollout(const policy::PolicyBackend& policy, std::span<const env::TaskSpec> tasks,
                                   const RolloutOptions& options) {
  if (options.n <= 0) return {};
  if (tasks.empty()) throw Error(ErrorKind::validation, "rollout: task pool is empty");
  const auto assignment = episode_tasks(tasks.size(), options.n, options.seed);
  std::vector<EpisodeResult> results(assignment.size());
  const int limit = options.concurrency.value_or(policy.config().concurrency_limit);
  parallel_for(assignment.size(), limit, [&](std::size_t i) {
    const policy::EpisodeSettings settings{mix_seed(options.seed, i), options.temperature};
    results[i] = run_episode(policy, tasks[assignment[i]], settings, options);
    results[i].task_index = assignment[i];
  });
  return results;
}

std::vector<Trajectory> gate(std::span<const EpisodeResult> episodes) {
  std::vector<Trajectory> out;
  for (const auto& e : episodes) {
    if (e.reward == 1) out.push_back(e.trajectory);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::miniworld: return "miniworld";
    case Profile::alfworld: return "alfworld";
    case Profile::scienceworld: return "scienceworld";
    case Profile::webshop: return "webshop";
  }
  return "miniworld";
}

Profile parse_profile(std::string_view s) {
  if (s == "miniworld") return Profile::miniworld;
  if (s == "alfworld") return Profile::alfworld;
  if (s == "scienceworld") return Profile::scienceworld;
  if (s == "webshop") return Profile::webshop;
  throw Error(ErrorKind::config, "unknown environment profile '" + std::string(s) + "'");
}

int default_iterations(Profile p) { return p == Profile::scienceworld ? 2 : 1; }

PolicyFactory named_factory(std::string_view name, const policy::BackendConfig& base) {
  if (name == "memorizing") {
    return [base](const DatasetVersion& d) {
      std::vector<Trajectory> memory;
      for (const auto& t : d.trajectories) {
        if (t.final_reward == 1) memory.push_back(t);
      }
      return policy::make_memorizing_backend(std::move(memory), base);
    };
  }
  if (name == "scripted") return [base](const DatasetVersion&) { return policy::make_scripted_backend(base); };
  if (name == "random") return [base](const DatasetVersion&) { return policy::make_random_backend(base); };
  throw Error(ErrorKind::config, "unknown policy factory '" + std::string(name) + "'");
}

json to_json(const IterationMetrics& m) {
  return {{"k", m.k}, {"sr", m.sr}, {"successes", m.successes}, {"dataset_size", m.dataset_size}};
}

RefinementResult iterate(const DatasetVersion& d0, const RefinementConfig& cfg, DatasetStore& store,
                         const PolicyFactory& factory) {
  if (cfg.K < 1) throw Error(ErrorKind::config, "K: must be at least 1");
  if (cfg.task_pool.empty()) throw Error(ErrorKind::config, "task_pool: must not be empty");
  RefinementResult result;
  result.final_version = d0;
  result.dataset_sizes.push_back(static_cast<int>(d0.size()));
  const int n = cfg.rollouts_per_iteration > 0 ? cfg.rollouts_per_iteration : static_cast<int>(cfg.task_pool.size());

  auto make_policy = [&](const DatasetVersion& d) -> std::unique_ptr<policy::PolicyBackend> {
    try {
      auto p = factory(d);
      if (!p) throw Error(ErrorKind::backend, "policy factory returned no backend");
      return p;
    } catch (const std::exception& e) {
      result.aborted = true;
      result.abort_reason = std::string("policy factory failed on v") + std::to_string(d.version) + ": " + e.what();
      return nullptr;
    }
  };

  const auto reject_dir = store.root() / "rejects";
  for (int k = 0; k < cfg.K; ++k) {
    auto policy = make_policy(result.final_version);
    if (!policy) return result;
    RolloutOptions ro;
    ro.n = n;
    ro.temperature = cfg.temperature;
    ro.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(k));
    ro.iteration = k;
    ro.system_prompt = cfg.system_prompt;
    ro.context_budget = cfg.context_budget;
    const auto episodes = rollout(*policy, cfg.task_pool, ro);
    std::vector<Trajectory> successes;
    std::vector<Trajectory> rejects;
    for (auto& t : gate(episodes)) {
      // A successful rollout that breaks a data invariant is kept for audit only.
      try {
        t.validate();
        successes.push_back(std::move(t));
      } catch (const Error&) {
        rejects.push_back(std::move(t));
      }
    }
    for (const auto& e : episodes) {
      if (e.reward != 1) rejects.push_back(e.trajectory);
    }
    std::filesystem::create_directories(reject_dir);
    write_jsonl(rejects, reject_dir / ("iter-" + std::to_string(k) + ".jsonl"));

    result.final_version = store.merge(result.final_version, successes);
    IterationMetrics m;
    m.k = k;
    m.successes = static_cast<int>(std::count_if(episodes.begin(), episodes.end(), [](const auto& e) { return e.reward == 1; }));
    m.episodes = static_cast<int>(episodes.size());
    m.sr = eval::percent(m.successes, m.episodes);
    m.dataset_size = static_cast<int>(result.final_version.size());
    result.metrics.push_back(m);
    result.dataset_sizes.push_back(m.dataset_size);
  }

  if (cfg.final_evaluation) {
    auto policy = make_policy(result.final_version);
    if (!policy) return result;
    RolloutOptions ro;
    ro.n = n;
    ro.temperature = cfg.eval_temperature;
    ro.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(cfg.K));
    ro.iteration = cfg.K;
    ro.system_prompt = cfg.system_prompt;
    ro.context_budget = cfg.context_budget;
    result.final_sr = eval::success_rate(rollout(*policy, cfg.task_pool, ro));
  }
  return result;
}

}  // namespace plansmith::refine
