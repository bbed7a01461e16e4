#pragma once

// 6x6 explicit-control-flow gridworld. The agent issues verb-noun commands to
// a worker that walks one cell per step (breadth-first search, bridging water
// with wood) and interacts when it stands on the target cell.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowsim/instruction.hpp"
#include "flowsim/interpreter.hpp"
#include "flowsim/rng.hpp"

namespace flowsim::minecraft {

inline constexpr int kSide = 6;
inline constexpr int kCells = kSide * kSide;
inline constexpr int kTimeLimitPerLine = 30;

enum class Cell : std::uint8_t { Empty, Iron, Gold, Wood, Merchant, Wall, Water };

inline constexpr Cell cell_of(Resource r) { return static_cast<Cell>(index_of(r) + 1); }
inline constexpr Cell cell_of(Comparand c) { return static_cast<Cell>(index_of(c) + 1); }

inline constexpr int row_of(int cell) { return cell / kSide; }
inline constexpr int col_of(int cell) { return cell % kSide; }

// Walls only ever sit on cells whose row and column are both even, which
// keeps the remaining cells connected.
inline constexpr bool even_indexed(int cell) { return row_of(cell) % 2 == 0 && col_of(cell) % 2 == 0; }

using Command = Subtask;

inline std::array<Command, 9> all_commands() {
  std::array<Command, 9> out{};
  std::size_t i = 0;
  for (Verb v : kVerbs)
    for (Resource r : kResources) out[i++] = {v, r};
  return out;
}

// A completed mine, sell or inspect. The mine a sell command performs to
// fetch a missing resource is not reported.
struct Interaction {
  Verb verb;
  Resource target;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

enum class Cause { None, Success, OutOfOrder, Timeout };

inline std::string to_string(Cause c) {
  switch (c) {
    case Cause::None: return "none";
    case Cause::Success: return "success";
    case Cause::OutOfOrder: return "out_of_order";
    case Cause::Timeout: return "timeout";
  }
  return "none";
}

struct World {
  std::array<Cell, kCells> grid{};
  int worker = 0;
  std::array<int, 3> inventory{};  // indexed by Resource
  CfInstruction instruction;
  int step = 0;
  std::uint64_t seed = 0;
};

// On-map counts indexed by Comparand.
inline std::array<int, 4> entity_counts(const std::array<Cell, kCells>& grid) {
  std::array<int, 4> counts{};
  for (Cell c : grid)
    if (c >= Cell::Iron && c <= Cell::Merchant) ++counts[static_cast<int>(c) - 1];
  return counts;
}

inline int time_limit(std::size_t instruction_length) {
  return kTimeLimitPerLine * static_cast<int>(instruction_length);
}

// ---------------------------------------------------------------------------
// Worker navigation

struct RouteDecision {
  enum class Kind { Interact, Move, Stall } kind = Kind::Stall;
  int cell = -1;  // destination cell of a move; the worker's cell otherwise
  friend bool operator==(const RouteDecision&, const RouteDecision&) = default;
};

// Cell kind the worker is heading for under cmd: sell goes to a merchant only
// once the resource is in the inventory.
inline Cell route_goal(const World& world, const Command& cmd) {
  if (cmd.verb == Verb::Sell && world.inventory[index_of(cmd.target)] > 0) return Cell::Merchant;
  return cell_of(cmd.target);
}

// Shortest path over the 4-neighbourhood. Walls block; water can be entered
// while the path so far has used fewer water cells than the wood held.
// The nearest goal wins, ties go to the row-major smaller cell.
inline RouteDecision worker_route(const World& world, const Command& cmd) {
  const Cell goal = route_goal(world, cmd);
  if (world.grid[world.worker] == goal) return {RouteDecision::Kind::Interact, world.worker};
  const int wood = world.inventory[index_of(Resource::Wood)];
  const int layers = wood + 1;
  std::vector<int> dist(static_cast<std::size_t>(kCells * layers), -1);
  std::vector<int> parent(dist.size(), -1);
  auto state = [&](int cell, int used) { return static_cast<std::size_t>(used * kCells + cell); };
  std::vector<std::size_t> frontier{state(world.worker, 0)};
  dist[frontier[0]] = 0;
  int best = -1;  // state index
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const std::size_t s = frontier[head];
    const int cell = static_cast<int>(s % kCells);
    const int used = static_cast<int>(s / kCells);
    if (best >= 0 && dist[s] >= dist[static_cast<std::size_t>(best)]) break;
    constexpr int kDr[4] = {-1, 1, 0, 0};
    constexpr int kDc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int r = row_of(cell) + kDr[k], c = col_of(cell) + kDc[k];
      if (r < 0 || r >= kSide || c < 0 || c >= kSide) continue;
      const int next = r * kSide + c;
      const Cell kind = world.grid[next];
      if (kind == Cell::Wall) continue;
      const int next_used = used + (kind == Cell::Water ? 1 : 0);
      if (next_used > wood) continue;
      const std::size_t ns = state(next, next_used);
      if (dist[ns] >= 0) continue;
      dist[ns] = dist[s] + 1;
      parent[ns] = static_cast<int>(s);
      frontier.push_back(ns);
      if (kind == goal) {
        const auto better = [&](std::size_t a, std::size_t b) {
          const int ca = static_cast<int>(a % kCells), cb = static_cast<int>(b % kCells);
          if (ca != cb) return ca < cb;
          return a / kCells < b / kCells;
        };
        if (best < 0 || better(ns, static_cast<std::size_t>(best))) best = static_cast<int>(ns);
      }
    }
  }
  if (best < 0) return {RouteDecision::Kind::Stall, world.worker};
  std::size_t s = static_cast<std::size_t>(best);
  while (parent[s] != static_cast<int>(state(world.worker, 0)) && parent[s] >= 0) s = static_cast<std::size_t>(parent[s]);
  return {RouteDecision::Kind::Move, static_cast<int>(s % kCells)};
}

// ---------------------------------------------------------------------------
// Observation

enum Channel { kIron, kGold, kWood, kMerchant, kWall, kWater, kWorker, kNumChannels };
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames{
    "iron", "gold", "wood", "merchant", "wall", "water", "worker"};

// Grid planes, inventory and the encoded instruction. Nothing here depends
// on how far the instruction has been executed.
struct Observation {
  std::array<std::array<std::uint8_t, kCells>, kNumChannels> planes{};
  std::array<int, 3> inventory{};
  std::vector<Triple> instruction;
};

inline Observation observe(const World& world) {
  Observation obs;
  for (int i = 0; i < kCells; ++i) {
    const Cell c = world.grid[i];
    if (c != Cell::Empty) obs.planes[static_cast<int>(c) - 1][i] = 1;
  }
  obs.planes[kWorker][world.worker] = 1;
  obs.inventory = world.inventory;
  obs.instruction = encode(world.instruction);
  return obs;
}

inline std::array<int, 4> entity_counts(const Observation& obs) {
  std::array<int, 4> counts{};
  for (int k = 0; k < 4; ++k)
    for (std::uint8_t v : obs.planes[k]) counts[k] += v;
  return counts;
}

inline char glyph(Cell c) {
  constexpr std::string_view kGlyphs = ".igwm#~";
  return kGlyphs[static_cast<int>(c)];
}

// One row per line; the worker shows as '@'.
inline std::string render(const World& world) {
  std::string out;
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      const int cell = r * kSide + c;
      out += cell == world.worker ? '@' : glyph(world.grid[cell]);
    }
    out += '\n';
  }
  return out;
}

inline std::string canonical_state(const World& world) {
  std::string s;
  for (Cell c : world.grid) s += glyph(c);
  s += '|' + std::to_string(world.worker);
  for (int v : world.inventory) s += ',' + std::to_string(v);
  s += '|' + std::to_string(world.step);
  return s;
}

// ---------------------------------------------------------------------------
// Episode dynamics

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct StepResult {
  Observation observation;
  int reward = 0;
  bool done = false;
  Cause cause = Cause::None;
  std::optional<Interaction> event;
};

class Env {
 public:
  explicit Env(World world) : world_(std::move(world)), table_(world_.instruction) {
    limit_ = time_limit(world_.instruction.size());
    try {
      pc_ = resolve(0);
    } catch (const NonTerminatingControlFlow&) {
      stuck_ = true;
    }
  }

  const World& world() const { return world_; }
  Observation observation() const { return observe(world_); }
  bool done() const { return cause_ != Cause::None; }
  Cause cause() const { return cause_; }
  int limit() const { return limit_; }

  // Hidden progress of the episode: the line of the next required subtask,
  // or L once the instruction is complete. Not part of the observation.
  std::size_t program_counter() const { return pc_; }
  bool program_stuck() const { return stuck_; }

  std::optional<Command> required_command() const {
    if (stuck_ || pc_ >= world_.instruction.size()) return std::nullopt;
    return world_.instruction[pc_].subtask;
  }

  StepResult step(const Command& cmd) {
    if (done()) throw UsageError("step called after the episode ended");
    ++world_.step;
    StepResult out;
    const RouteDecision route = worker_route(world_, cmd);
    if (route.kind == RouteDecision::Kind::Move) {
      Cell& dest = world_.grid[route.cell];
      if (dest == Cell::Water) {
        --world_.inventory[index_of(Resource::Wood)];
        dest = Cell::Empty;
      }
      world_.worker = route.cell;
    }
    if (route.kind != RouteDecision::Kind::Stall && world_.grid[world_.worker] == route_goal(world_, cmd))
      out.event = interact(cmd);

    if (out.event) {
      const auto required = required_command();
      if (required && *required == Command{out.event->verb, out.event->target}) {
        try {
          pc_ = resolve(pc_ + 1);
        } catch (const NonTerminatingControlFlow&) {
          stuck_ = true;
        }
        if (!stuck_ && pc_ >= world_.instruction.size()) {
          cause_ = Cause::Success;
          out.reward = 1;
        }
      } else if (out.event->verb != Verb::Inspect) {
        cause_ = Cause::OutOfOrder;
      }
    }
    if (!done() && world_.step >= limit_) cause_ = Cause::Timeout;
    out.done = done();
    out.cause = cause_;
    out.observation = observe(world_);
    return out;
  }

 private:
  std::size_t resolve(std::size_t pc) const {
    const auto counts = entity_counts(world_.grid);
    return cf_step(world_.instruction, table_, pc,
                   [&](const Condition& c) { return eval_condition(c, counts); });
  }

  // Worker stands on the goal cell of cmd.
  std::optional<Interaction> interact(const Command& cmd) {
    Cell& here = world_.grid[world_.worker];
    int& held = world_.inventory[index_of(cmd.target)];
    switch (cmd.verb) {
      case Verb::Mine:
        here = Cell::Empty;
        ++held;
        return Interaction{Verb::Mine, cmd.target};
      case Verb::Inspect:
        return Interaction{Verb::Inspect, cmd.target};
      case Verb::Sell:
        if (here == Cell::Merchant) {
          --held;
          return Interaction{Verb::Sell, cmd.target};
        }
        here = Cell::Empty;
        ++held;
        return std::nullopt;
    }
    return std::nullopt;
  }

  World world_;
  ControlFlowTable table_;
  std::size_t pc_ = 0;
  bool stuck_ = false;
  int limit_ = 0;
  Cause cause_ = Cause::None;
};

// ---------------------------------------------------------------------------
// Spawning

inline constexpr int kMaxResamples = 50;
inline constexpr int kWaterThreshold = 30;

struct SpawnOptions {
  // Kind never placed (keeps "more <excluded> than ..." false).
  std::optional<Comparand> excluded;
  // Kind that must appear at least once.
  std::optional<Comparand> required;
};

struct SpawnStats {
  int n = 0;
  int resamples = 0;
  bool water_placed = false;
  bool water_removed = false;
};

struct SpawnResult {
  std::optional<World> world;  // nullopt: resample budget spent, draw a new instruction
  SpawnStats stats;
};

// Replays the subtask order implied by on-map counts and checks that every
// subtask has the resources it needs, without placing anything.
inline bool population_feasible(const CfInstruction& instr, std::array<int, 4> counts) {
  const ControlFlowTable table(instr);
  std::array<int, 3> held{};
  const int cap = time_limit(instr.size());
  int performed = 0;
  auto eval = [&](const Condition& c) { return eval_condition(c, counts); };
  try {
    std::size_t pc = cf_step(instr, table, 0, eval);
    if (pc >= instr.size()) return false;
    while (pc < instr.size()) {
      if (++performed > cap) return false;
      const Subtask s = instr[pc].subtask;
      int& on_map = counts[index_of(as_comparand(s.target))];
      int& inv = held[index_of(s.target)];
      switch (s.verb) {
        case Verb::Mine:
          if (on_map == 0) return false;
          --on_map;
          ++inv;
          break;
        case Verb::Inspect:
          if (on_map == 0) return false;
          break;
        case Verb::Sell:
          if (counts[index_of(Comparand::Merchant)] == 0) return false;
          if (inv > 0) {
            --inv;
          } else {
            if (on_map == 0) return false;
            --on_map;
          }
          break;
      }
      pc = cf_step(instr, table, pc + 1, eval);
    }
  } catch (const NonTerminatingControlFlow&) {
    return false;
  }
  return true;
}

// Runs the deterministic worker through the required subtasks; true when the
// instruction completes within the time limit.
inline bool completes_with_worker(const World& world) {
  Env env(world);
  while (!env.done()) {
    const auto cmd = env.required_command();
    if (!cmd) return false;
    env.step(*cmd);
  }
  return env.cause() == Cause::Success;
}

namespace detail {

inline bool wood_reachable(const std::array<Cell, kCells>& grid, int worker) {
  std::array<bool, kCells> seen{};
  std::vector<int> frontier{worker};
  seen[worker] = true;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const int cell = frontier[head];
    if (grid[cell] == Cell::Wood) return true;
    const int r = row_of(cell), c = col_of(cell);
    const int next[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (const auto& rc : next) {
      if (rc[0] < 0 || rc[0] >= kSide || rc[1] < 0 || rc[1] >= kSide) continue;
      const int n = rc[0] * kSide + rc[1];
      if (seen[n] || grid[n] == Cell::Water || grid[n] == Cell::Wall) continue;
      seen[n] = true;
      frontier.push_back(n);
    }
  }
  return false;
}

}  // namespace detail

// Draws n ~ U{0..36} entities, checks feasibility, places water (n <= 30),
// entities, the worker and walls, and checks the placed world with the
// deterministic worker. Infeasible draws are resampled up to 50 times.
inline SpawnResult spawn(Rng& rng, const CfInstruction& instr, const SpawnOptions& options = {}) {
  if (!validate(instr)) throw std::invalid_argument("spawn: invalid instruction");
  std::vector<Cell> kinds;
  for (Comparand c : kComparands)
    if (!options.excluded || *options.excluded != c) kinds.push_back(cell_of(c));

  SpawnResult result;
  for (int attempt = 0; attempt <= kMaxResamples; ++attempt) {
    SpawnStats& st = result.stats;
    st.resamples = attempt;
    st.water_placed = st.water_removed = false;
    st.n = static_cast<int>(rng.uniform_int(0, kCells));
    std::vector<Cell> population(static_cast<std::size_t>(st.n));
    for (Cell& c : population) c = rng.pick(kinds);

    World world;
    world.instruction = instr;
    std::array<int, 4> counts{};
    for (Cell c : population) ++counts[static_cast<int>(c) - 1];
    if (options.required && counts[index_of(*options.required)] == 0) continue;
    if (!population_feasible(instr, counts)) continue;

    if (st.n <= kWaterThreshold) {
      st.water_placed = true;
      const bool horizontal = rng.bernoulli(0.5);
      const int line = static_cast<int>(rng.uniform_int(0, kSide - 1));
      for (int k = 0; k < kSide; ++k)
        world.grid[horizontal ? line * kSide + k : k * kSide + line] = Cell::Water;
    }
    std::vector<int> open;
    for (int i = 0; i < kCells; ++i)
      if (world.grid[i] == Cell::Empty) open.push_back(i);
    rng.shuffle(open);
    for (std::size_t k = 0; k < population.size(); ++k) world.grid[open[k]] = population[k];
    // With every cell taken the worker shares a cell with an entity.
    world.worker = population.size() < open.size() ? open[population.size()]
                                                   : open[rng.index(population.size())];
    if (st.water_placed && !detail::wood_reachable(world.grid, world.worker)) {
      st.water_removed = true;
      for (Cell& c : world.grid)
        if (c == Cell::Water) c = Cell::Empty;
    }
    for (int i = 0; i < kCells; ++i)
      if (even_indexed(i) && world.grid[i] == Cell::Empty && i != world.worker) world.grid[i] = Cell::Wall;

    if (!completes_with_worker(world)) continue;
    result.world = std::move(world);
    return result;
  }
  return result;
}

}  // namespace flowsim::minecraft
