#include "plansmith/config.hpp"

#include <fstream>
#include <set>

#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"

#ifndef PLANSMITH_ASSET_DIR
#define PLANSMITH_ASSET_DIR "assets"
#endif

namespace plansmith::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw Error(ErrorKind::config, path + ": " + msg); }

// Typed access to one JSON object with dotted-path error messages.
class Reader {
 public:
  Reader(const json& j, std::string path, std::set<std::string> known) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& [key, _] : j.items()) {
      if (!known.contains(key)) fail(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const std::string& key) const { return j_.at(key); }

  template <typename T>
  void get(const std::string& key, T& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(field(key), "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(field(key), "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(field(key), "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(field(key), "expected a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(field(key), e.what());
    }
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) const {
    std::string s;
    get(key, s);
    if (!has(key)) return;
    std::filesystem::path p(s);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

 private:
  const json& j_;
  std::string path_;
};

void read_pool(const Reader& parent, const std::string& key, TaskPool& pool) {
  if (!parent.has(key)) return;
  Reader r(parent.at(key), parent.field(key), {"easy", "medium", "hard", "salt"});
  r.get("easy", pool.easy);
  r.get("medium", pool.medium);
  r.get("hard", pool.hard);
  r.get("salt", pool.salt);
}

json pool_json(const TaskPool& p) { return {{"easy", p.easy}, {"medium", p.medium}, {"hard", p.hard}, {"salt", p.salt}}; }

template <typename Fn>
void prefixed(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    fail(prefix, e.what());
  } catch (const json::exception& e) {
    fail(prefix, e.what());
  }
}

void check_pool(const TaskPool& p, const std::string& path) {
  if (p.easy < 0 || p.medium < 0 || p.hard < 0) fail(path, "counts must be non-negative");
}

}  // namespace

int PipelineConfig::iterations() const { return refine.K.value_or(refine::default_iterations(profile())); }

refine::Profile PipelineConfig::profile() const { return refine::parse_profile(env.profile); }

env::GeneratorOptions PipelineConfig::generator_options() const {
  env::GeneratorOptions g;
  g.max_steps = env.max_steps;
  g.thresholds = env.thresholds;
  return g;
}

void PipelineConfig::validate() const {
  prefixed("env.profile", [&] { (void)profile(); });
  if (env.max_steps < 1) fail("env.max_steps", "must be positive");
  if (env.terminal_actions.empty()) fail("env.terminal_actions", "must not be empty");
  if (env.thresholds.easy_max < 1) fail("env.thresholds.easy_max", "must be positive");
  if (env.thresholds.easy_max >= env.thresholds.medium_max) fail("env.thresholds", "easy_max must be below medium_max");
  prefixed("backends.agent", [&] { agent.validate(); });
  if (teacher.kind == "remote_chat") prefixed("backends.teacher.remote", [&] { teacher.remote.validate(); });

  if (!(bootstrap.rho > 0.0 && bootstrap.rho <= 1.0)) fail("stages.bootstrap.rho", "must lie in (0, 1]");
  if (bootstrap.floor_tokens < 0) fail("stages.bootstrap.floor_tokens", "must be non-negative");
  if (bootstrap.max_attempts < 1) fail("stages.bootstrap.max_attempts", "must be positive");
  if (bootstrap.n_target < 0) fail("stages.bootstrap.n_target", "must be non-negative");
  if (bootstrap.seeds < 0) fail("stages.bootstrap.seeds", "must be non-negative");
  if (bootstrap.n_examples < 1) fail("stages.bootstrap.n_examples", "must be positive");

  if (curriculum.easy < 0 || curriculum.medium < 0 || curriculum.hard < 0) fail("stages.curriculum", "skeleton counts must be non-negative");
  if (curriculum.categories.empty()) fail("stages.curriculum.categories", "must not be empty");
  if (curriculum.max_retries < 0) fail("stages.curriculum.max_retries", "must be non-negative");
  if (curriculum.epochs < 1) fail("stages.curriculum.epochs", "must be positive");

  if (refine.K && *refine.K < 1) fail("stages.refine.K", "must be at least 1");
  if (refine.rollouts_per_iteration < 0) fail("stages.refine.rollouts_per_iteration", "must be non-negative");
  if (!(refine.temperature >= 0.0 && refine.temperature <= 2.0)) fail("stages.refine.temperature", "must lie in [0, 2]");
  check_pool(refine.task_pool, "stages.refine.task_pool");
  if (refine.task_pool.total() == 0) fail("stages.refine.task_pool", "must contain at least one task");
  if (!(eval.temperature >= 0.0 && eval.temperature <= 2.0)) fail("stages.eval.temperature", "must lie in [0, 2]");
  check_pool(eval.tasks, "stages.eval.tasks");
  if (eval.tasks.total() == 0) fail("stages.eval.tasks", "must contain at least one task");

  if (paths.dataset_root.empty()) fail("paths.dataset_root", "required");
  auto must_exist = [](const std::filesystem::path& p, const char* field) {
    if (!p.empty() && !std::filesystem::exists(p)) fail(field, "does not exist: " + p.string());
  };
  must_exist(paths.prompt_assets, "paths.prompt_assets");
  must_exist(paths.seed_fixture, "paths.seed_fixture");
  must_exist(paths.baselines, "paths.baselines");
}

PipelineConfig default_config() {
  PipelineConfig c;
  c.agent.kind = policy::BackendKind::memorizing;
  const std::filesystem::path assets(PLANSMITH_ASSET_DIR);
  c.paths.dataset_root = "datasets";
  c.paths.seed_fixture = assets / "fixtures" / "seeds.jsonl";
  c.paths.baselines = assets / "fixtures" / "token_baselines.json";
  return c;
}

PipelineConfig from_json(const json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c = default_config();
  c.paths.dataset_root = base_dir.empty() ? c.paths.dataset_root : base_dir / c.paths.dataset_root;
  Reader root(j, "", {"seed", "env", "backends", "stages", "paths"});
  root.get("seed", c.seed);

  if (root.has("env")) {
    Reader r(root.at("env"), "env", {"profile", "max_steps", "terminal_actions", "thresholds"});
    r.get("profile", c.env.profile);
    r.get("max_steps", c.env.max_steps);
    r.get("terminal_actions", c.env.terminal_actions);
    if (r.has("thresholds")) {
      Reader t(r.at("thresholds"), "env.thresholds", {"easy_max", "medium_max"});
      t.get("easy_max", c.env.thresholds.easy_max);
      t.get("medium_max", c.env.thresholds.medium_max);
    }
  }

  if (root.has("backends")) {
    Reader r(root.at("backends"), "backends", {"agent", "teacher"});
    if (r.has("agent")) prefixed("backends.agent", [&] { c.agent = r.at("agent").get<policy::BackendConfig>(); });
    if (r.has("teacher")) prefixed("backends.teacher", [&] { c.teacher = r.at("teacher").get<teacher::TeacherConfig>(); });
  }

  if (root.has("stages")) {
    Reader stages(root.at("stages"), "stages", {"bootstrap", "curriculum", "refine", "eval"});
    if (stages.has("bootstrap")) {
      Reader r(stages.at("bootstrap"), "stages.bootstrap",
               {"rho", "floor_tokens", "max_attempts", "n_target", "seeds", "n_examples"});
      r.get("rho", c.bootstrap.rho);
      r.get("floor_tokens", c.bootstrap.floor_tokens);
      r.get("max_attempts", c.bootstrap.max_attempts);
      r.get("n_target", c.bootstrap.n_target);
      r.get("seeds", c.bootstrap.seeds);
      r.get("n_examples", c.bootstrap.n_examples);
    }
    if (stages.has("curriculum")) {
      Reader r(stages.at("curriculum"), "stages.curriculum",
               {"skeletons", "categories", "target_lengths", "max_retries", "exemplars", "epochs", "cumulative"});
      if (r.has("skeletons")) {
        Reader s(r.at("skeletons"), "stages.curriculum.skeletons", {"easy", "medium", "hard"});
        s.get("easy", c.curriculum.easy);
        s.get("medium", c.curriculum.medium);
        s.get("hard", c.curriculum.hard);
      }
      if (r.has("target_lengths")) {
        Reader s(r.at("target_lengths"), "stages.curriculum.target_lengths", {"easy", "medium", "hard"});
        s.get("easy", c.curriculum.easy_length);
        s.get("medium", c.curriculum.medium_length);
        s.get("hard", c.curriculum.hard_length);
      }
      if (r.has("categories")) {
        const json& arr = r.at("categories");
        if (!arr.is_array()) fail("stages.curriculum.categories", "expected a list");
        c.curriculum.categories.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
          Reader cat(arr[i], "stages.curriculum.categories[" + std::to_string(i) + "]", {"name", "topic"});
          SkeletonCategory sc;
          cat.get("name", sc.name);
          cat.get("topic", sc.topic);
          if (sc.name.empty()) fail(cat.field("name"), "required");
          c.curriculum.categories.push_back(std::move(sc));
        }
      }
      r.get("max_retries", c.curriculum.max_retries);
      r.get("exemplars", c.curriculum.exemplars);
      r.get("epochs", c.curriculum.epochs);
      r.get("cumulative", c.curriculum.cumulative);
    }
    if (stages.has("refine")) {
      Reader r(stages.at("refine"), "stages.refine",
               {"K", "rollouts_per_iteration", "temperature", "task_pool", "context_budget"});
      if (r.has("K")) {
        int k = 0;
        r.get("K", k);
        c.refine.K = k;
      }
      r.get("rollouts_per_iteration", c.refine.rollouts_per_iteration);
      r.get("temperature", c.refine.temperature);
      read_pool(r, "task_pool", c.refine.task_pool);
      if (r.has("context_budget")) {
        int b = 0;
        r.get("context_budget", b);
        c.refine.context_budget = b;
      }
    }
    if (stages.has("eval")) {
      Reader r(stages.at("eval"), "stages.eval", {"temperature", "tasks"});
      r.get("temperature", c.eval.temperature);
      read_pool(r, "tasks", c.eval.tasks);
    }
  }

  if (root.has("paths")) {
    Reader r(root.at("paths"), "paths", {"dataset_root", "prompt_assets", "seed_fixture", "baselines"});
    r.path("dataset_root", c.paths.dataset_root, base_dir);
    r.path("prompt_assets", c.paths.prompt_assets, base_dir);
    r.path("seed_fixture", c.paths.seed_fixture, base_dir);
    r.path("baselines", c.paths.baselines, base_dir);
  }
  c.validate();
  return c;
}

PipelineConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "config: " + std::string(e.what()));
  }
  return from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  json curriculum_cats = json::array();
  for (const auto& cat : c.curriculum.categories) curriculum_cats.push_back({{"name", cat.name}, {"topic", cat.topic}});
  json refine = {{"rollouts_per_iteration", c.refine.rollouts_per_iteration},
                 {"temperature", c.refine.temperature},
                 {"task_pool", pool_json(c.refine.task_pool)},
                 {"K", c.iterations()}};
  if (c.refine.context_budget) refine["context_budget"] = *c.refine.context_budget;
  return {
      {"seed", c.seed},
      {"env",
       {{"profile", c.env.profile},
        {"max_steps", c.env.max_steps},
        {"terminal_actions", c.env.terminal_actions},
        {"thresholds", {{"easy_max", c.env.thresholds.easy_max}, {"medium_max", c.env.thresholds.medium_max}}}}},
      {"backends", {{"agent", c.agent}, {"teacher", c.teacher}}},
      {"stages",
       {{"bootstrap",
         {{"rho", c.bootstrap.rho},
          {"floor_tokens", c.bootstrap.floor_tokens},
          {"max_attempts", c.bootstrap.max_attempts},
          {"n_target", c.bootstrap.n_target},
          {"seeds", c.bootstrap.seeds},
          {"n_examples", c.bootstrap.n_examples}}},
        {"curriculum",
         {{"skeletons", {{"easy", c.curriculum.easy}, {"medium", c.curriculum.medium}, {"hard", c.curriculum.hard}}},
          {"target_lengths",
           {{"easy", c.curriculum.easy_length}, {"medium", c.curriculum.medium_length}, {"hard", c.curriculum.hard_length}}},
          {"categories", curriculum_cats},
          {"max_retries", c.curriculum.max_retries},
          {"exemplars", c.curriculum.exemplars},
          {"epochs", c.curriculum.epochs},
          {"cumulative", c.curriculum.cumulative}}},
        {"refine", refine},
        {"eval", {{"temperature", c.eval.temperature}, {"tasks", pool_json(c.eval.tasks)}}}}},
      {"paths",
       {{"dataset_root", c.paths.dataset_root.string()},
        {"prompt_assets", c.paths.prompt_assets.string()},
        {"seed_fixture", c.paths.seed_fixture.string()},
        {"baselines", c.paths.baselines.string()}}}};
}

std::vector<env::TaskSpec> make_pool(const TaskPool& pool, std::uint64_t seed, const env::GeneratorOptions& options) {
  std::vector<env::TaskSpec> out;
  const std::uint64_t base = mix_seed(seed, pool.salt);
  const std::pair<env::Difficulty, int> bands[] = {
      {env::Difficulty::easy, pool.easy}, {env::Difficulty::medium, pool.medium}, {env::Difficulty::hard, pool.hard}};
  for (const auto& [difficulty, count] : bands) {
    for (int i = 0; i < count; ++i) {
      const auto s = mix_seed(mix_seed(base, static_cast<std::uint64_t>(difficulty)), static_cast<std::uint64_t>(i));
      out.push_back(env::generate_task(difficulty, static_cast<std::int64_t>(s % 1'000'000'000ULL), options));
    }
  }
  return out;
}

}  // namespace plansmith::config
