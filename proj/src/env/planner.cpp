#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <unordered_map>

#include "plansmith/env.hpp"
#include "plansmith/error.hpp"

namespace plansmith::env {

namespace {

// Only goal objects (and anything already in hand) are tracked. Receptacles
// have unbounded capacity, so moving any other object can only cost steps;
// examine and wait never change the world. Pruning them keeps BFS exact.
//
// Packed state layout (low to high): room:3 | focus:4 | open mask:16 | 4 bits per object.
constexpr int kRoomBits = 3;
constexpr int kFocusBits = 4;
constexpr int kOpenBits = 16;
constexpr int kLocBits = 4;
constexpr std::uint64_t kInventorySlot = 15;
constexpr std::size_t kMaxObjects = 8;

struct Layout {
  const WorldState* world = nullptr;
  std::vector<std::string> objects;     // tracked objects
  std::vector<int> recep_room;          // receptacle index -> room index
  std::vector<int> open_bit;            // receptacle index -> bit in open mask, -1 if not openable
  std::vector<int> focus_target;        // tracked object indices that must be focused
  struct Target {
    int object;
    int recep;
    bool closed;
    bool focus;
  };
  std::vector<Target> goal;
};

struct Decoded {
  int room = 0;
  int focus = 0;  // 0 = none of the tracked objects, else index + 1
  std::uint32_t open = 0;
  std::array<std::int8_t, kMaxObjects> loc{};  // receptacle index, or kInventorySlot
  std::size_t n = 0;
};

std::uint64_t encode(const Decoded& d) {
  std::uint64_t key = static_cast<std::uint64_t>(d.room);
  key |= static_cast<std::uint64_t>(d.focus) << kRoomBits;
  key |= static_cast<std::uint64_t>(d.open) << (kRoomBits + kFocusBits);
  int shift = kRoomBits + kFocusBits + kOpenBits;
  for (std::size_t i = 0; i < d.n; ++i) {
    key |= static_cast<std::uint64_t>(d.loc[i]) << shift;
    shift += kLocBits;
  }
  return key;
}

Decoded decode(std::uint64_t key, std::size_t n_objects) {
  Decoded d;
  d.room = static_cast<int>(key & ((1u << kRoomBits) - 1));
  d.focus = static_cast<int>((key >> kRoomBits) & ((1u << kFocusBits) - 1));
  d.open = static_cast<std::uint32_t>((key >> (kRoomBits + kFocusBits)) & ((1u << kOpenBits) - 1));
  int shift = kRoomBits + kFocusBits + kOpenBits;
  d.n = n_objects;
  for (std::size_t i = 0; i < n_objects; ++i) {
    d.loc[i] = static_cast<std::int8_t>((key >> shift) & ((1u << kLocBits) - 1));
    shift += kLocBits;
  }
  return d;
}

[[noreturn]] void planner_error(const std::string& msg) { throw Error(ErrorKind::planner, msg); }

int index_of(const std::vector<std::string>& v, std::string_view s) {
  auto it = std::find(v.begin(), v.end(), s);
  return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

Layout make_layout(const WorldState& w) {
  Layout L;
  L.world = &w;
  if (w.rooms.size() > (1u << kRoomBits)) planner_error("too many rooms for the planner");
  if (w.receptacles.size() >= kInventorySlot) planner_error("too many receptacles for the planner");
  int bits = 0;
  for (const auto& r : w.receptacles) {
    L.recep_room.push_back(index_of(w.rooms, r.room));
    L.open_bit.push_back(r.openable ? bits++ : -1);
  }
  if (bits > kOpenBits) planner_error("too many openable receptacles for the planner");
  for (const auto& g : w.goal) {
    if (index_of(L.objects, g.object) < 0) L.objects.push_back(g.object);
  }
  if (auto held = w.held_object(); held && index_of(L.objects, *held) < 0) L.objects.push_back(*held);
  if (L.objects.size() > kMaxObjects || L.objects.size() + 1 >= (1u << kFocusBits)) {
    planner_error("too many goal objects for the planner");
  }
  std::vector<std::string> recep_names;
  for (const auto& r : w.receptacles) recep_names.push_back(r.name);
  for (const auto& g : w.goal) {
    const int obj = index_of(L.objects, g.object);
    const int rec = index_of(recep_names, g.receptacle);
    if (rec < 0) planner_error("goal references unknown receptacle '" + g.receptacle + "'");
    L.goal.push_back({obj, rec, g.require_closed, g.require_focus});
    if (g.require_focus) L.focus_target.push_back(obj);
  }
  return L;
}

Decoded initial_state(const Layout& L) {
  const WorldState& w = *L.world;
  Decoded d;
  d.room = index_of(w.rooms, w.agent_room);
  for (std::size_t i = 0; i < w.receptacles.size(); ++i) {
    if (L.open_bit[i] >= 0 && w.receptacles[i].open) d.open |= 1u << L.open_bit[i];
  }
  d.focus = 0;
  d.n = L.objects.size();
  for (std::size_t i = 0; i < L.objects.size(); ++i) {
    if (w.focused == L.objects[i]) d.focus = static_cast<int>(i) + 1;
    const std::string* loc = w.location_of(L.objects[i]);
    if (!loc) planner_error("goal references unknown object '" + L.objects[i] + "'");
    if (*loc == kInventory) {
      d.loc[i] = static_cast<std::int8_t>(kInventorySlot);
    } else {
      const Receptacle* r = w.find_receptacle(*loc);
      d.loc[i] = static_cast<std::int8_t>(r - w.receptacles.data());
    }
  }
  return d;
}

bool satisfied(const Layout& L, const Decoded& d) {
  if (L.goal.empty()) return false;
  for (const auto& g : L.goal) {
    if (d.loc[g.object] != g.recep) return false;
    if (g.closed && (d.open >> L.open_bit[g.recep] & 1u)) return false;
    if (g.focus && d.focus != g.object + 1) return false;
  }
  return true;
}

bool accessible(const Layout& L, const Decoded& d, int recep) {
  return L.open_bit[recep] < 0 || (d.open >> L.open_bit[recep] & 1u);
}

struct Edge {
  Verb verb;
  int a;  // room / receptacle / object index
  int b;  // receptacle index for take/put
};

template <typename Visit>
void successors(const Layout& L, const Decoded& d, Visit&& visit) {
  const WorldState& w = *L.world;
  const int n_recep = static_cast<int>(w.receptacles.size());
  for (int r = 0; r < static_cast<int>(w.rooms.size()); ++r) {
    if (r == d.room) continue;
    Decoded n = d;
    n.room = r;
    visit(n, Edge{Verb::go_to, r, -1});
  }
  for (int c = 0; c < n_recep; ++c) {
    if (L.recep_room[c] != d.room || L.open_bit[c] < 0) continue;
    Decoded n = d;
    const bool is_open = d.open >> L.open_bit[c] & 1u;
    n.open ^= 1u << L.open_bit[c];
    visit(n, Edge{is_open ? Verb::close : Verb::open, c, -1});
  }
  int held = -1;
  for (std::size_t i = 0; i < d.n; ++i) {
    if (d.loc[i] == static_cast<int>(kInventorySlot)) held = static_cast<int>(i);
  }
  if (held < 0) {
    for (std::size_t i = 0; i < d.n; ++i) {
      const int c = d.loc[i];
      if (L.recep_room[c] != d.room || !accessible(L, d, c)) continue;
      Decoded n = d;
      n.loc[i] = static_cast<std::int8_t>(kInventorySlot);
      visit(n, Edge{Verb::take, static_cast<int>(i), c});
    }
  } else {
    for (int c = 0; c < n_recep; ++c) {
      if (L.recep_room[c] != d.room || !accessible(L, d, c)) continue;
      Decoded n = d;
      n.loc[held] = static_cast<std::int8_t>(c);
      visit(n, Edge{Verb::put, held, c});
    }
  }
  for (int obj : L.focus_target) {
    if (d.focus == obj + 1) continue;
    const int c = d.loc[obj];
    const bool vis = c == static_cast<int>(kInventorySlot) ||
                     (L.recep_room[c] == d.room && accessible(L, d, c));
    if (!vis) continue;
    Decoded n = d;
    n.focus = obj + 1;
    visit(n, Edge{Verb::focus_on, obj, -1});
  }
}

ActionCommand to_command(const Layout& L, const Edge& e) {
  const WorldState& w = *L.world;
  switch (e.verb) {
    case Verb::go_to: return ActionCommand::make(Verb::go_to, {w.rooms[e.a]});
    case Verb::open: return ActionCommand::make(Verb::open, {w.receptacles[e.a].name});
    case Verb::close: return ActionCommand::make(Verb::close, {w.receptacles[e.a].name});
    case Verb::take:
      return ActionCommand::make(Verb::take, {L.objects[e.a], w.receptacles[e.b].name});
    case Verb::put:
      return ActionCommand::make(Verb::put, {L.objects[e.a], w.receptacles[e.b].name});
    case Verb::focus_on: return ActionCommand::make(Verb::focus_on, {L.objects[e.a]});
    default: break;
  }
  return ActionCommand::make(Verb::wait, {});
}

}  // namespace

Plan solve_optimal(const WorldState& initial, const PlannerOptions& options) {
  initial.validate();
  if (initial.goal.empty()) planner_error("world has no goal");
  const Layout L = make_layout(initial);
  const Decoded start = initial_state(L);
  if (satisfied(L, start)) planner_error("goal already satisfied in the initial state");

  struct Parent {
    std::uint64_t prev;
    Edge edge;
  };
  std::unordered_map<std::uint64_t, Parent> parents;
  parents.reserve(1 << 14);
  const std::uint64_t start_key = encode(start);
  parents.emplace(start_key, Parent{start_key, Edge{Verb::wait, -1, -1}});
  std::deque<std::uint64_t> frontier{start_key};
  Plan plan;
  std::uint64_t goal_key = 0;
  bool found = false;

  while (!frontier.empty() && !found) {
    const std::uint64_t key = frontier.front();
    frontier.pop_front();
    ++plan.nodes_expanded;
    if (plan.nodes_expanded > options.max_nodes) {
      planner_error("node budget exhausted after " + std::to_string(options.max_nodes) + " expansions");
    }
    const Decoded d = decode(key, L.objects.size());
    successors(L, d, [&](const Decoded& next, const Edge& e) {
      if (found) return;
      const std::uint64_t nk = encode(next);
      if (!parents.emplace(nk, Parent{key, e}).second) return;
      if (satisfied(L, next)) {
        goal_key = nk;
        found = true;
        return;
      }
      frontier.push_back(nk);
    });
  }
  if (!found) planner_error("task is unsolvable");

  for (std::uint64_t k = goal_key; k != start_key;) {
    const Parent& p = parents.at(k);
    plan.actions.push_back(to_command(L, p.edge));
    k = p.prev;
  }
  std::reverse(plan.actions.begin(), plan.actions.end());
  return plan;
}

Plan solve_optimal(const TaskInstruction& task, const GeneratorOptions& gen, const PlannerOptions& options) {
  auto parsed = parse_task_id(task.task_id);
  if (!parsed) throw Error(ErrorKind::config, "unknown task_id schema '" + task.task_id + "'");
  return solve_optimal(generate_task(parsed->first, parsed->second, gen).world, options);
}

}  // namespace plansmith::env
