#include "plansmith/cli.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "plansmith/config.hpp"
#include "plansmith/curriculum.hpp"
#include "plansmith/error.hpp"
#include "plansmith/eval.hpp"
#include "plansmith/flywheel.hpp"
#include "plansmith/hash.hpp"
#include "plansmith/prompts.hpp"
#include "plansmith/refine.hpp"
#include "plansmith/teacher.hpp"
#include "plansmith/text.hpp"

namespace plansmith::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::string> backend;
  std::optional<int> K;
  std::optional<double> temperature;
  std::optional<int> max_steps;
  std::string format = "text";
  std::optional<std::string> dataset;
  std::optional<int> easy, medium, hard, n;
  std::optional<std::string> raw;
};

// Collects what a subcommand produced, for the run manifest.
struct Run {
  std::string subcommand;
  std::vector<std::string> argv;
  config::PipelineConfig cfg;
  fs::path out;
  std::vector<fs::path> outputs;
  json extra = json::object();
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  out << content;
}

// Git object-style digest: sha256 over "blob <size>\0<bytes>".
std::string blob_hash(const fs::path& p) {
  const std::string bytes = read_file(p);
  std::string framed = "blob " + std::to_string(bytes.size());
  framed.push_back('\0');
  return sha256_hex(framed + bytes);
}

void write_manifest(const Run& run) {
  json outputs = json::object();
  for (const auto& p : run.outputs) {
    if (fs::is_regular_file(p)) outputs[p.lexically_normal().string()] = blob_hash(p);
  }
  json m = {{"subcommand", run.subcommand},
            {"argv", run.argv},
            {"config", config::to_json(run.cfg)},
            {"seeds", {{"pipeline", run.cfg.seed}}},
            {"outputs", outputs},
            {"created_at", utc_timestamp()}};
  for (const auto& [k, v] : run.extra.items()) m[k] = v;
  write_file(run.out / ("run-" + run.subcommand + ".json"), m.dump(2) + "\n");
}

void add_version_outputs(Run& run, const DatasetVersion& d) {
  run.outputs.push_back(d.storage_path / "manifest.json");
  run.outputs.push_back(d.storage_path / "trajectories.jsonl");
}

std::optional<int> parse_version_token(std::string s) {
  if (s.rfind("D_", 0) == 0) s = s.substr(2);
  else if (!s.empty() && (s[0] == 'v' || s[0] == 'V')) s = s.substr(1);
  if (s.empty() || s.size() > 9) return std::nullopt;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  }
  return std::stoi(s);
}

DatasetVersion resolve_dataset(DatasetStore& store, const std::optional<std::string>& spec) {
  if (!spec) {
    if (!store.latest_version()) throw Error(ErrorKind::io, "no dataset version in " + store.root().string());
    return store.latest();
  }
  if (auto v = parse_version_token(*spec)) return store.open(*v);
  const fs::path p(*spec);
  if (fs::exists(p / "manifest.json")) {
    if (auto v = parse_version_token(p.filename().string())) return DatasetStore(p.parent_path()).open(*v);
  }
  throw Error(ErrorKind::config, "--dataset: cannot resolve '" + *spec + "'");
}

std::string system_prompt(const config::PipelineConfig& cfg) {
  return prompts::system_prompt_for(cfg.env.profile, cfg.paths.prompt_assets);
}

std::unique_ptr<policy::PolicyBackend> make_policy(const config::PipelineConfig& cfg, const DatasetVersion& d) {
  switch (cfg.agent.kind) {
    case policy::BackendKind::memorizing: return refine::named_factory("memorizing", cfg.agent)(d);
    case policy::BackendKind::scripted: return policy::make_scripted_backend(cfg.agent);
    case policy::BackendKind::random: return policy::make_random_backend(cfg.agent);
    case policy::BackendKind::remote_chat:
      return policy::make_remote_backend(cfg.agent, policy::make_http_transport(cfg.agent));
  }
  throw Error(ErrorKind::config, "backends.agent.kind: unsupported");
}

DatasetVersion policy_dataset(const config::PipelineConfig& cfg, DatasetStore& store, const Options& o) {
  if (cfg.agent.kind == policy::BackendKind::memorizing || o.dataset) return resolve_dataset(store, o.dataset);
  return {};
}

std::vector<refine::EpisodeResult> run_rollouts(const config::PipelineConfig& cfg, const policy::PolicyBackend& policy,
                                                const std::vector<env::TaskSpec>& pool, int n, double temperature,
                                                std::uint64_t seed) {
  refine::RolloutOptions ro;
  ro.n = n;
  ro.temperature = temperature;
  ro.seed = seed;
  ro.system_prompt = system_prompt(cfg);
  ro.context_budget = cfg.refine.context_budget;
  return refine::rollout(policy, pool, ro);
}

void write_episodes(const fs::path& p, const std::vector<refine::EpisodeResult>& episodes) {
  std::string body;
  for (const auto& e : episodes) body += refine::to_json(e).dump() + "\n";
  write_file(p, body);
}

std::string format_ext(eval::Format f) {
  switch (f) {
    case eval::Format::json: return "json";
    case eval::Format::csv: return "csv";
    case eval::Format::text: return "txt";
  }
  return "txt";
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_gen_tasks(Run& run, const Options& o, std::ostream& out) {
  const auto& cfg = run.cfg;
  config::TaskPool pool = cfg.refine.task_pool;
  if (o.easy) pool.easy = *o.easy;
  if (o.medium) pool.medium = *o.medium;
  if (o.hard) pool.hard = *o.hard;
  if (pool.easy < 0 || pool.medium < 0 || pool.hard < 0) throw Error(ErrorKind::config, "--easy/--medium/--hard: must be non-negative");
  const auto tasks = config::make_pool(pool, cfg.seed, cfg.generator_options());
  std::string body;
  for (const auto& t : tasks) body += json(t).dump() + "\n";
  const auto path = run.out / "tasks.jsonl";
  write_file(path, body);
  run.outputs.push_back(path);
  out << "generated " << tasks.size() << " tasks -> " << path.string() << "\n";
}

void cmd_bootstrap(Run& run, const Options&, std::ostream& out) {
  const auto& cfg = run.cfg;
  const auto& b = cfg.bootstrap;
  if (cfg.paths.seed_fixture.empty()) throw Error(ErrorKind::config, "paths.seed_fixture: required for bootstrap");
  auto teacher = teacher::make_teacher(cfg.teacher);
  const flywheel::DistillOptions distill{b.rho, b.floor_tokens, b.max_attempts};

  const auto episodes = flywheel::load_seed_episodes(cfg.paths.seed_fixture);
  auto curated = flywheel::curate_seeds(episodes);
  if (b.seeds > 0 && curated.trajectories.size() > static_cast<std::size_t>(b.seeds)) {
    curated.trajectories.resize(static_cast<std::size_t>(b.seeds));
  }
  if (curated.trajectories.empty()) throw Error(ErrorKind::validation, "no usable seed episodes in the fixture");

  const int third = b.n_target / 3;
  const config::TaskPool target_pool{b.n_target - 2 * third, third, third, 0xb0075};
  std::vector<Trajectory> targets;
  for (const auto& task : config::make_pool(target_pool, cfg.seed, cfg.generator_options())) {
    targets.push_back(flywheel::plan_trajectory(task));
  }
  const auto expansion = flywheel::expand(curated.trajectories, targets, *teacher, b.n_target, {b.n_examples});

  flywheel::DistillStats seed_stats, expand_stats;
  auto seeds = flywheel::distill_trajectories(curated.trajectories, *teacher, distill, &seed_stats);
  auto expanded = flywheel::distill_trajectories(expansion.trajectories, *teacher, distill, &expand_stats);
  std::vector<Trajectory> all = std::move(seeds);
  all.insert(all.end(), std::make_move_iterator(expanded.begin()), std::make_move_iterator(expanded.end()));
  all = flywheel::assemble_quaternions(std::move(all));

  DatasetStore store(cfg.paths.dataset_root);
  const auto d0 = store.create(all);
  add_version_outputs(run, d0);

  json dropped = json::array();
  for (const auto& d : curated.dropped) dropped.push_back({{"episode_id", d.episode_id}, {"step", d.step}, {"reason", d.reason}});
  const json report = {{"dataset_version", d0.version},
                       {"seed_episodes", episodes.size()},
                       {"unsuccessful", curated.unsuccessful},
                       {"dropped", dropped},
                       {"seeds", curated.trajectories.size()},
                       {"expanded", expansion.trajectories.size()},
                       {"expansion_skipped", expansion.skipped},
                       {"expansion_errors", expansion.errors},
                       {"distill_teacher_calls", seed_stats.teacher_calls + expand_stats.teacher_calls},
                       {"distill_truncated", seed_stats.truncated + expand_stats.truncated},
                       {"total", d0.size()}};
  const auto path = run.out / "bootstrap.json";
  write_file(path, report.dump(2) + "\n");
  run.outputs.push_back(path);
  run.extra["dataset"] = {{"output", d0.version}};
  out << "D_" << d0.version << ": " << d0.size() << " trajectories (" << curated.trajectories.size() << " seed, "
      << expansion.trajectories.size() << " expanded)\n";
}

void cmd_curriculum(Run& run, const Options& o, std::ostream& out) {
  const auto& cfg = run.cfg;
  const auto& c = cfg.curriculum;
  DatasetStore store(cfg.paths.dataset_root);
  const auto base = resolve_dataset(store, o.dataset);
  auto teacher = teacher::make_teacher(cfg.teacher);
  const std::string sys = system_prompt(cfg);

  std::vector<std::string> exemplars;
  std::vector<Trajectory> seed_pool;
  for (const auto& t : base.trajectories) {
    if (t.source == TrajectorySource::seed) seed_pool.push_back(t);
  }
  if (seed_pool.empty()) seed_pool = base.trajectories;
  for (std::size_t i = 0; i < seed_pool.size() && exemplars.size() < static_cast<std::size_t>(c.exemplars); ++i) {
    exemplars.push_back(curriculum::render_skeleton_exemplar(seed_pool[i], sys));
  }
  if (exemplars.empty()) throw Error(ErrorKind::validation, "dataset has no trajectories to use as skeleton exemplars");

  curriculum::SkeletonOptions sk_opts;
  sk_opts.terminal = {cfg.env.terminal_actions};
  sk_opts.max_retries = c.max_retries;
  curriculum::PopulateOptions pop;
  pop.distill = {cfg.bootstrap.rho, cfg.bootstrap.floor_tokens, cfg.bootstrap.max_attempts};
  pop.n_examples = cfg.bootstrap.n_examples;
  pop.thresholds = cfg.env.thresholds;

  const std::tuple<env::Difficulty, int, int> bands[] = {{env::Difficulty::easy, c.easy, c.easy_length},
                                                         {env::Difficulty::medium, c.medium, c.medium_length},
                                                         {env::Difficulty::hard, c.hard, c.hard_length}};
  std::vector<Trajectory> added;
  json rejections = json::array();
  int teacher_calls = 0;
  std::size_t band_index = 0;
  for (const auto& [difficulty, count, length] : bands) {
    if (count <= 0) continue;
    const auto& cat = c.categories[band_index++ % c.categories.size()];
    curriculum::SkeletonRequest req{cat.name, cat.topic, difficulty, length, exemplars, count};
    const auto batch = curriculum::synthesize_skeletons(*teacher, req, sk_opts);
    teacher_calls += batch.teacher_calls;
    for (const auto& r : batch.rejections) {
      rejections.push_back({{"difficulty", env::to_string(difficulty)}, {"index", r.index}, {"attempt", r.attempt}, {"reason", r.reason}});
    }
    for (const auto& s : batch.skeletons) {
      try {
        added.push_back(curriculum::populate(s, *teacher, seed_pool, pop));
      } catch (const Error& e) {
        rejections.push_back({{"difficulty", env::to_string(difficulty)}, {"stage", "populate"}, {"reason", e.what()}});
      }
    }
  }

  std::vector<Trajectory> everything = base.trajectories;
  everything.insert(everything.end(), added.begin(), added.end());
  const auto buckets = curriculum::stratify(everything, cfg.env.thresholds);
  const auto sched = curriculum::schedule(buckets, {cfg.seed, c.epochs, c.cumulative, cfg.env.thresholds});
  const auto next = store.merge(base, added);
  add_version_outputs(run, next);

  const auto sched_path = run.out / "schedule.json";
  write_file(sched_path, curriculum::to_json(sched).dump(2) + "\n");
  const json report = {{"base_version", base.version},
                       {"dataset_version", next.version},
                       {"added", added.size()},
                       {"teacher_calls", teacher_calls},
                       {"rejections", rejections},
                       {"buckets", {{"Easy", buckets.easy.size()}, {"Medium", buckets.medium.size()}, {"Hard", buckets.hard.size()}}}};
  const auto report_path = run.out / "curriculum.json";
  write_file(report_path, report.dump(2) + "\n");
  run.outputs.push_back(sched_path);
  run.outputs.push_back(report_path);
  run.extra["dataset"] = {{"input", base.version}, {"output", next.version}};
  out << "D_" << next.version << ": " << next.size() << " trajectories (+" << added.size() << " from skeletons), "
      << sched.phases.size() << " phases\n";
}

void cmd_refine(Run& run, const Options& o, std::ostream& out) {
  const auto& cfg = run.cfg;
  DatasetStore store(cfg.paths.dataset_root);
  const auto base = resolve_dataset(store, o.dataset);
  refine::RefinementConfig rc;
  rc.K = cfg.iterations();
  rc.rollouts_per_iteration = cfg.refine.rollouts_per_iteration;
  rc.temperature = o.temperature.value_or(cfg.refine.temperature);
  rc.eval_temperature = cfg.eval.temperature;
  rc.task_pool = config::make_pool(cfg.refine.task_pool, cfg.seed, cfg.generator_options());
  rc.seed = cfg.seed;
  rc.system_prompt = system_prompt(cfg);
  rc.context_budget = cfg.refine.context_budget;
  const auto result = refine::iterate(base, rc, store, [&cfg](const DatasetVersion& d) { return make_policy(cfg, d); });

  std::string lines;
  for (const auto& m : result.metrics) {
    const std::string line = refine::to_json(m).dump();
    out << line << "\n";
    lines += line + "\n";
  }
  const auto metrics_path = run.out / "metrics.jsonl";
  write_file(metrics_path, lines);
  json summary = {{"base_version", base.version},
                  {"final_version", result.final_version.version},
                  {"dataset_sizes", result.dataset_sizes},
                  {"aborted", result.aborted},
                  {"abort_reason", result.abort_reason}};
  if (result.final_sr) summary["final_sr"] = text::fixed(*result.final_sr, 2);
  const auto summary_path = run.out / "refine.json";
  write_file(summary_path, summary.dump(2) + "\n");
  run.outputs.push_back(metrics_path);
  run.outputs.push_back(summary_path);
  add_version_outputs(run, result.final_version);
  for (int k = 0; k < static_cast<int>(result.metrics.size()); ++k) {
    run.outputs.push_back(store.root() / "rejects" / ("iter-" + std::to_string(k) + ".jsonl"));
  }
  run.extra["dataset"] = {{"input", base.version}, {"output", result.final_version.version}};
  if (result.aborted) throw Error(ErrorKind::backend, result.abort_reason);
}

void cmd_rollout(Run& run, const Options& o, std::ostream& out) {
  const auto& cfg = run.cfg;
  DatasetStore store(cfg.paths.dataset_root);
  const auto d = policy_dataset(cfg, store, o);
  const auto policy = make_policy(cfg, d);
  const auto pool = config::make_pool(cfg.refine.task_pool, cfg.seed, cfg.generator_options());
  const int n = o.n.value_or(static_cast<int>(pool.size()));
  const auto episodes = run_rollouts(cfg, *policy, pool, n, o.temperature.value_or(cfg.refine.temperature), cfg.seed);
  const auto path = run.out / "episodes.jsonl";
  write_episodes(path, episodes);
  run.outputs.push_back(path);
  out << n << " episodes";
  if (!episodes.empty()) out << ", SR " << text::fixed(eval::success_rate(episodes), 2);
  out << " -> " << path.string() << "\n";
}

eval::EvalReport evaluate_policy(const config::PipelineConfig& cfg, const Options& o, DatasetStore& store,
                                 std::vector<refine::EpisodeResult>* keep = nullptr) {
  const auto d = policy_dataset(cfg, store, o);
  const auto policy = make_policy(cfg, d);
  const auto pool = config::make_pool(cfg.eval.tasks, cfg.seed, cfg.generator_options());
  const int n = o.n.value_or(static_cast<int>(pool.size()));
  auto episodes = run_rollouts(cfg, *policy, pool, n, o.temperature.value_or(cfg.eval.temperature), mix_seed(cfg.seed, 0xe7a1));
  const auto report = eval::evaluate(episodes, cfg.env.thresholds);
  if (keep) *keep = std::move(episodes);
  return report;
}

void cmd_eval(Run& run, const Options& o, std::ostream& out) {
  const auto format = eval::parse_format(o.format);
  DatasetStore store(run.cfg.paths.dataset_root);
  std::vector<refine::EpisodeResult> episodes;
  const auto report = evaluate_policy(run.cfg, o, store, &episodes);
  const std::string rendered = eval::render_report(report, format);
  out << rendered;
  const auto path = run.out / ("eval-report." + format_ext(format));
  write_file(path, rendered);
  run.outputs.push_back(path);
  if (o.raw) {
    write_episodes(*o.raw, episodes);
    run.outputs.push_back(*o.raw);
  }
}

void cmd_export_sft(Run& run, const Options& o, std::ostream& out) {
  DatasetStore store(run.cfg.paths.dataset_root);
  const auto d = resolve_dataset(store, o.dataset);
  const auto path = run.out / "sft.jsonl";
  const auto count = flywheel::export_sft(d, path, system_prompt(run.cfg));
  run.outputs.push_back(path);
  run.extra["dataset"] = {{"input", d.version}};
  out << count << " exemplars from D_" << d.version << " -> " << path.string() << "\n";
}

void cmd_report(Run& run, const Options& o, std::ostream& out) {
  const auto format = eval::parse_format(o.format);
  if (run.cfg.paths.baselines.empty()) throw Error(ErrorKind::config, "paths.baselines: required for report");
  auto rows = eval::load_baselines(run.cfg.paths.baselines);
  if (o.dataset) {
    DatasetStore store(run.cfg.paths.dataset_root);
    const auto r = evaluate_policy(run.cfg, o, store);
    const auto policy_id = make_policy(run.cfg, resolve_dataset(store, o.dataset))->id();
    rows.push_back({policy_id, "-", static_cast<long long>(eval::round2(r.mean_thought_tokens) + 0.5), r.successes,
                    r.n_episodes});
  }
  const std::string rendered = eval::render_table(rows, format);
  out << rendered;
  const auto path = run.out / ("report." + format_ext(format));
  write_file(path, rendered);
  run.outputs.push_back(path);
}

config::PipelineConfig resolve_config(const Options& o) {
  config::PipelineConfig cfg = o.config_path ? config::load(*o.config_path) : config::default_config();
  if (o.seed) cfg.seed = *o.seed;
  if (o.backend) {
    try {
      cfg.agent.kind = policy::parse_backend_kind(*o.backend);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, std::string("--backend: ") + e.what());
    }
  }
  if (o.K) cfg.refine.K = *o.K;
  if (o.max_steps) cfg.env.max_steps = *o.max_steps;
  if (o.temperature && !(*o.temperature >= 0.0 && *o.temperature <= 2.0)) {
    throw Error(ErrorKind::config, "--temperature: must lie in [0, 2]");
  }
  (void)eval::parse_format(o.format);
  cfg.validate();
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"plansmith: planning-trajectory data pipeline", "plansmith"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Pipeline config (JSON)");
  app.add_option("--seed", o.seed, "Pipeline seed override");
  app.add_option("--out", o.out, "Output directory for reports and run manifests");
  app.add_option("--backend", o.backend, "Agent backend: memorizing, scripted, random, remote_chat");
  app.add_option("--K", o.K, "Refinement iterations");
  app.add_option("--temperature", o.temperature, "Sampling temperature for the stage");
  app.add_option("--max-steps", o.max_steps, "Episode step limit");
  app.add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "text", "csv"}));
  app.add_option("--dataset", o.dataset, "Dataset version (1, v1, D_1) or version directory");
  app.fallthrough();

  using Handler = void (*)(Run&, const Options&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"gen-tasks", "Generate a batch of MiniWorld tasks", cmd_gen_tasks},
      {"bootstrap", "Seed curation, expansion and distillation into D_0", cmd_bootstrap},
      {"curriculum", "Skeleton synthesis, stratification and scheduling", cmd_curriculum},
      {"refine", "Rollout, gate and merge for K iterations", cmd_refine},
      {"rollout", "Run episodes and write them as JSONL", cmd_rollout},
      {"eval", "Evaluate the agent on the evaluation pool", cmd_eval},
      {"export-sft", "Write fused-context SFT exemplars", cmd_export_sft},
      {"report", "Render the token/success comparison table", cmd_report}};
  std::map<CLI::App*, std::pair<std::string, Handler>> handlers;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "gen-tasks") {
      sub->add_option("--easy", o.easy, "Easy tasks");
      sub->add_option("--medium", o.medium, "Medium tasks");
      sub->add_option("--hard", o.hard, "Hard tasks");
    }
    if (name == "rollout" || name == "eval" || name == "report") sub->add_option("--n", o.n, "Episode count");
    if (name == "eval") sub->add_option("--raw", o.raw, "Also write raw episodes (JSONL) for plotting");
    handlers[sub] = {name, fn};
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const auto& [name, handler] = handlers.at(const_cast<CLI::App*>(chosen));
  try {
    Run r{name, args, resolve_config(o), fs::path(o.out), {}, json::object()};
    fs::create_directories(r.out);
    handler(r, o, out);
    write_manifest(r);
    return kExitOk;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) {
      err << "error: config: " << e.what() << "\n";
      return kExitConfig;
    }
    err << "error: stage " << name << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: stage " << name << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace plansmith::cli
