#include <array>
#include <random>

#include "plansmith/env.hpp"
#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"

namespace plansmith::env {

namespace {

constexpr std::array<std::string_view, 8> kRooms = {"kitchen", "hallway", "bedroom", "bathroom",
                                                    "study",   "garage",  "pantry",  "attic"};
constexpr std::array<std::string_view, 8> kSurfaces = {"table", "counter", "shelf", "desk",
                                                       "sofa",  "bed",     "sink",  "stool"};
constexpr std::array<std::string_view, 8> kContainers = {"cabinet", "drawer", "fridge", "safe",
                                                         "box",     "chest",  "locker", "microwave"};
constexpr std::array<std::string_view, 20> kObjects = {
    "mug",   "apple", "key",    "book",   "spoon", "pen",   "cup",    "plate", "towel", "soap",
    "coin",  "bottle", "candle", "phone", "watch", "bowl",  "knife",  "remote", "glass", "egg"};

// Uniform draws via modulo keep generation reproducible across standard
// libraries (std::uniform_int_distribution is implementation-defined).
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  int below(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  bool chance(int percent) { return below(100) < percent; }

  template <std::size_t N>
  std::vector<std::string> sample(const std::array<std::string_view, N>& pool, int k) {
    std::vector<std::string> items(pool.begin(), pool.end());
    for (int i = 0; i < k; ++i) std::swap(items[i], items[i + below(static_cast<int>(N) - i)]);
    items.resize(k);
    return items;
  }

 private:
  std::mt19937_64 rng_;
};

struct Band {
  int rooms;
  int receptacles_min;
  int receptacles_extra;
  int containers_max;
};

Band band_for(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return {2, 3, 2, 2};
    case Difficulty::medium: return {3, 4, 2, 3};
    case Difficulty::hard: return {4, 6, 2, 3};
  }
  return {2, 3, 2, 2};
}

struct Draft {
  WorldState world;
  TaskCategory category;
};

Draft draft_world(Difficulty difficulty, Draw& draw, int max_steps) {
  const Band band = band_for(difficulty);
  Draft out;
  WorldState& w = out.world;
  w.max_steps = max_steps;
  w.rooms = draw.sample(kRooms, band.rooms);

  const int n_recep = band.receptacles_min + draw.below(band.receptacles_extra);
  const int n_cont = 1 + draw.below(band.containers_max);
  auto containers = draw.sample(kContainers, n_cont);
  auto surfaces = draw.sample(kSurfaces, n_recep - n_cont);
  std::vector<std::pair<std::string, bool>> receps;
  for (auto& s : surfaces) receps.emplace_back(std::move(s), false);
  for (auto& c : containers) receps.emplace_back(std::move(c), true);
  for (std::size_t i = 0; i < receps.size(); ++i) {
    std::swap(receps[i], receps[i + draw.below(static_cast<int>(receps.size() - i))]);
  }
  for (std::size_t i = 0; i < receps.size(); ++i) {
    // Every room gets at least one receptacle.
    const auto& room = i < w.rooms.size() ? w.rooms[i] : w.rooms[draw.below(band.rooms)];
    const bool openable = receps[i].second;
    w.receptacles.push_back({receps[i].first, room, openable, openable ? draw.chance(30) : true});
  }

  int n_goal = 1;
  switch (difficulty) {
    case Difficulty::easy: n_goal = 1; break;
    case Difficulty::medium: n_goal = 2 + draw.below(2); break;
    case Difficulty::hard: n_goal = 4; break;
  }
  const int n_distract = 1 + draw.below(2);
  auto names = draw.sample(kObjects, n_goal + n_distract);
  for (const auto& name : names) {
    w.objects.emplace_back(name, w.receptacles[draw.below(static_cast<int>(w.receptacles.size()))].name);
  }
  w.agent_room = w.rooms[draw.below(band.rooms)];

  std::vector<std::string> openables;
  for (const auto& r : w.receptacles) {
    if (r.openable) openables.push_back(r.name);
  }
  auto pick_target = [&](const std::string& current, bool want_container) -> std::string {
    std::vector<std::string> options;
    for (const auto& r : w.receptacles) {
      if (r.name != current && (!want_container || r.openable)) options.push_back(r.name);
    }
    if (options.empty()) return {};
    return options[draw.below(static_cast<int>(options.size()))];
  };

  if (n_goal == 1) {
    const int kind = draw.below(3);
    out.category = kind == 0 ? TaskCategory::move : kind == 1 ? TaskCategory::contain : TaskCategory::process;
  } else {
    out.category = TaskCategory::compound;
  }
  const int focus_slot = (out.category == TaskCategory::process) ? 0
                         : (out.category == TaskCategory::compound && draw.chance(30)) ? draw.below(n_goal)
                                                                                        : -1;
  for (int i = 0; i < n_goal; ++i) {
    const auto& [obj, loc] = w.objects[i];
    bool contain = out.category == TaskCategory::contain ||
                   (out.category == TaskCategory::compound && draw.chance(difficulty == Difficulty::hard ? 60 : 40));
    std::string target = pick_target(loc, contain);
    if (target.empty()) {
      contain = false;
      target = pick_target(loc, false);
    }
    w.goal.push_back({obj, target, contain, i == focus_slot});
  }
  if (out.category == TaskCategory::contain && !w.goal.front().require_closed) {
    out.category = TaskCategory::move;
  }
  return out;
}

}  // namespace

TaskSpec generate_task(Difficulty difficulty, std::int64_t seed, const GeneratorOptions& options) {
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    const std::uint64_t stream =
        mix_seed(static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(difficulty) * 1'000'003ULL + attempt);
    Draw draw(stream);
    Draft draft = draft_world(difficulty, draw, options.max_steps);
    if (draft.world.goal_satisfied()) continue;
    int length = 0;
    try {
      length = static_cast<int>(solve_optimal(draft.world).actions.size());
    } catch (const Error&) {
      continue;
    }
    if (stratum_for_length(length, options.thresholds) != difficulty || length > options.max_steps) continue;

    TaskSpec spec;
    spec.world = std::move(draft.world);
    spec.instruction.task_id = make_task_id(difficulty, seed);
    spec.instruction.text = goal_text(spec.world.goal);
    spec.instruction.category = draft.category;
    spec.instruction.difficulty = difficulty;
    spec.instruction.optimal_length = length;
    spec.instruction.seed = seed;
    return spec;
  }
  throw Error(ErrorKind::generation, "no " + std::string(to_string(difficulty)) + " world for seed " +
                                         std::to_string(seed) + " within " +
                                         std::to_string(options.max_attempts) + " attempts");
}

}  // namespace plansmith::env
