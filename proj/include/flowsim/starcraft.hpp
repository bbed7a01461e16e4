#pragma once

// 6x6 implicit-control-flow gridworld: build trees, three probes, an
// autoregressive command assembly, and stochastic attacks and ambushes.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "flowsim/generators.hpp"
#include "flowsim/instruction.hpp"
#include "flowsim/interpreter.hpp"
#include "flowsim/rng.hpp"

namespace flowsim::starcraft {

inline constexpr int kSide = 6;
inline constexpr int kCells = kSide * kSide;
inline constexpr int kProbes = 3;
inline constexpr int kTimeLimitPerLine = 30;
inline constexpr double kAttackRate = 0.1;
inline constexpr double kAmbushRate = 0.1;
inline constexpr int kEmpty = -1;

inline constexpr int row_of(int cell) { return cell / kSide; }
inline constexpr int col_of(int cell) { return cell % kSide; }

inline int time_limit(std::size_t instruction_length) {
  return kTimeLimitPerLine * static_cast<int>(instruction_length);
}

// ---------------------------------------------------------------------------
// Action tokens

struct SelectProbe { int probe; };
struct SelectCoord { int cell; };
struct SelectBuilding { int building; };
struct SelectUnit { int unit; };
struct Commit {};

using ActionToken = std::variant<SelectProbe, SelectCoord, SelectBuilding, SelectUnit, Commit>;

inline std::string to_string(const ActionToken& tok) {
  struct {
    std::string operator()(const SelectProbe& t) const { return "probe " + std::to_string(t.probe); }
    std::string operator()(const SelectCoord& t) const { return "coord " + std::to_string(t.cell); }
    std::string operator()(const SelectBuilding& t) const { return "building " + std::to_string(t.building); }
    std::string operator()(const SelectUnit& t) const { return "unit " + std::to_string(t.unit); }
    std::string operator()(const Commit&) const { return "commit"; }
  } visitor;
  return std::visit(visitor, tok);
}

inline ActionToken parse_token(std::string_view text) {
  const auto words = flowsim::detail::lower_words(text);
  if (words.size() == 1 && words[0] == "commit") return Commit{};
  if (words.size() == 2) {
    int value = 0;
    try {
      std::size_t used = 0;
      value = std::stoi(words[1], &used);
      if (used != words[1].size()) throw ParseError("");
    } catch (const std::exception&) {
      throw ParseError("bad token argument in '" + std::string(text) + "'");
    }
    if (words[0] == "probe") return SelectProbe{value};
    if (words[0] == "coord") return SelectCoord{value};
    if (words[0] == "building") return SelectBuilding{value};
    if (words[0] == "unit") return SelectUnit{value};
  }
  throw ParseError("cannot parse token '" + std::string(text) + "'");
}

// Syntactic command shapes, independent of any world state.
struct CommandShapes {
  int build = 0;  // probe, building, coordinate
  int go_to = 0;  // probe, coordinate
  int train = 0;  // coordinate, unit
};

inline CommandShapes enumerate_command_shapes() {
  CommandShapes n;
  for (int p = 0; p < kProbes; ++p)
    for (int c = 0; c < kCells; ++c) {
      ++n.go_to;
      for (int b = 0; b < kNumBuildings; ++b) ++n.build;
    }
  for (int c = 0; c < kCells; ++c)
    for (int u = 0; u < kNumUnits; ++u) ++n.train;
  return n;
}

// ---------------------------------------------------------------------------
// World

struct ProbeTask {
  int destination;
  int building;  // kNone for a plain go-to
  friend bool operator==(const ProbeTask&, const ProbeTask&) = default;
};

struct Probe {
  int cell = 0;
  std::optional<ProbeTask> task;
  friend bool operator==(const Probe&, const Probe&) = default;
};

struct World {
  std::array<int, kCells> grid{};  // building type per cell, kEmpty when free
  std::array<Probe, kProbes> probes{};
  std::array<int, kNumUnits> units{};  // alive produced units per type
  BuildTree tree;                      // hidden from the observation
  ScInstruction instruction;
  int ambush = kNone;                  // unit type ambushed this step
  int step = 0;
  std::uint64_t seed = 0;
  int nexus_cell = 0;

  World() { grid.fill(kEmpty); }
};

inline std::array<int, kNumBuildings> building_counts(const World& w) {
  std::array<int, kNumBuildings> counts{};
  for (int b : w.grid)
    if (b != kEmpty) ++counts[b];
  return counts;
}

// Nexus on a uniform cell, U{0..36} further buildings of the 13 other types on
// distinct uniform cells (capped by the 35 cells left), probes at the Nexus.
inline World spawn(Rng& rng, const BuildTree& tree, ScInstruction instruction = {}) {
  if (!tree.acyclic()) throw std::invalid_argument("spawn: cyclic build tree");
  World w;
  w.tree = tree;
  w.instruction = std::move(instruction);
  std::vector<int> cells(kCells);
  for (int i = 0; i < kCells; ++i) cells[i] = i;
  rng.shuffle(cells);
  w.nexus_cell = cells[0];
  w.grid[w.nexus_cell] = kNexus;
  const int endowment = std::min<int>(static_cast<int>(rng.uniform_int(0, kCells)), kCells - 1);
  for (int k = 0; k < endowment; ++k)
    w.grid[cells[1 + k]] = static_cast<int>(rng.uniform_int(1, kNumBuildings - 1));
  for (Probe& p : w.probes) p.cell = w.nexus_cell;
  return w;
}

inline ScSnapshot snapshot(const World& w) { return {building_counts(w), w.units}; }

// Enough free cells for every building the initial plan has to construct.
inline bool spawn_feasible(const World& w, const ScDecoded& decoded) {
  int free_cells = 0;
  for (int b : w.grid) free_cells += b == kEmpty;
  int builds = 0;
  for (const ScCommand& c : sc_plan(decoded, snapshot(w))) builds += std::holds_alternative<BuildCommand>(c);
  return builds <= free_cells;
}

// Train commands that would resolve legally in this world.
inline int legal_train_count(const World& w) {
  int n = 0;
  for (int cell = 0; cell < kCells; ++cell) {
    if (w.grid[cell] == kEmpty) continue;
    for (int u = 0; u < kNumUnits; ++u) n += w.tree.producer[u] == w.grid[cell];
  }
  return n;
}

// With p = 0.1 an attack removes a uniformly random nonempty subset of the
// non-Nexus buildings; independently with p = 0.1 an ambush removes one unit
// of a uniformly chosen alive type and reports the type.
// Both coins are drawn every step so the stream stays aligned.
struct Disruption {
  bool attacked = false;
  bool ambushed = false;
};

inline Disruption roll_disruptions(World& w, Rng& rng) {
  Disruption d;
  d.attacked = rng.bernoulli(kAttackRate);
  d.ambushed = rng.bernoulli(kAmbushRate);
  w.ambush = kNone;
  if (d.attacked) {
    std::vector<int> targets;
    for (int c = 0; c < kCells; ++c)
      if (w.grid[c] != kEmpty && w.grid[c] != kNexus) targets.push_back(c);
    if (!targets.empty()) {
      std::vector<bool> hit(targets.size());
      bool any = false;
      while (!any)
        for (std::size_t i = 0; i < targets.size(); ++i) any |= (hit[i] = rng.bernoulli(0.5));
      for (std::size_t i = 0; i < targets.size(); ++i)
        if (hit[i]) w.grid[targets[i]] = kEmpty;
    }
  }
  if (d.ambushed) {
    std::vector<int> alive;
    for (int u = 0; u < kNumUnits; ++u)
      if (w.units[u] > 0) alive.push_back(u);
    if (!alive.empty()) {
      const int u = rng.pick(alive);
      --w.units[u];
      w.ambush = u;
    }
  }
  return d;
}

enum class Cause { None, Success, Timeout };

inline std::string to_string(Cause c) {
  switch (c) {
    case Cause::None: return "none";
    case Cause::Success: return "success";
    case Cause::Timeout: return "timeout";
  }
  return "none";
}

inline bool all_required_alive(const World& w, const ScDecoded& decoded) {
  for (int u : decoded.required_units)
    if (w.units[u] == 0) return false;
  return true;
}

struct DoneCheck {
  int reward = 0;
  bool done = false;
  Cause cause = Cause::None;
};

inline DoneCheck check_done(const World& w, const ScDecoded& decoded) {
  if (all_required_alive(w, decoded)) return {1, true, Cause::Success};
  if (w.step >= time_limit(w.instruction.size())) return {0, true, Cause::Timeout};
  return {};
}

// ---------------------------------------------------------------------------
// Observation

// Building planes, probe occupancy, unit counts (units have no position),
// ambush message, probe idleness and the encoded instruction.
struct Observation {
  std::array<std::array<std::uint8_t, kCells>, kNumBuildings> buildings{};
  std::array<std::uint8_t, kCells> probes{};
  std::array<int, kNumUnits> units{};
  int ambush = kNone;
  std::array<bool, kProbes> probe_idle{};
  std::array<int, kProbes> probe_cell{};
  std::vector<int> instruction;
};

inline Observation observe(const World& w) {
  Observation obs;
  for (int c = 0; c < kCells; ++c)
    if (w.grid[c] != kEmpty) obs.buildings[w.grid[c]][c] = 1;
  for (int p = 0; p < kProbes; ++p) {
    ++obs.probes[w.probes[p].cell];
    obs.probe_idle[p] = !w.probes[p].task.has_value();
    obs.probe_cell[p] = w.probes[p].cell;
  }
  obs.units = w.units;
  obs.ambush = w.ambush;
  obs.instruction = encode(w.instruction);
  return obs;
}

inline int building_at(const Observation& obs, int cell) {
  for (int b = 0; b < kNumBuildings; ++b)
    if (obs.buildings[b][cell]) return b;
  return kEmpty;
}

// Buildings as letters a..n (Nexus = 'a'), '.' free; probe counts listed after.
inline std::string render(const World& w) {
  std::string out;
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      const int b = w.grid[r * kSide + c];
      out += b == kEmpty ? '.' : static_cast<char>('a' + b);
    }
    out += '\n';
  }
  out += "probes:";
  for (const Probe& p : w.probes) out += ' ' + std::to_string(p.cell);
  out += " units:";
  for (int u = 0; u < kNumUnits; ++u)
    if (w.units[u] > 0) out += ' ' + std::string(kUnitNames[u]) + 'x' + std::to_string(w.units[u]);
  out += '\n';
  return out;
}

inline std::string canonical_state(const World& w) {
  std::string s;
  for (int b : w.grid) s += b == kEmpty ? '.' : static_cast<char>('a' + b);
  for (const Probe& p : w.probes) {
    s += '|' + std::to_string(p.cell);
    if (p.task) s += ':' + std::to_string(p.task->destination) + ':' + std::to_string(p.task->building);
  }
  s += '|';
  for (int n : w.units) s += std::to_string(n) + ',';
  s += '|' + std::to_string(w.ambush) + '|' + std::to_string(w.step);
  return s;
}

// ---------------------------------------------------------------------------
// Episode dynamics

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// How a token sequence resolved: a command, a deliberate wait (commit with
// nothing selected) or a no-op caused by an illegal choice.
enum class Resolution { Build, GoTo, Train, Wait, NoOp };

inline std::string to_string(Resolution r) {
  switch (r) {
    case Resolution::Build: return "build";
    case Resolution::GoTo: return "goto";
    case Resolution::Train: return "train";
    case Resolution::Wait: return "wait";
    case Resolution::NoOp: return "noop";
  }
  return "noop";
}

struct StepResult {
  Observation observation;
  int reward = 0;
  bool done = false;
  Cause cause = Cause::None;
  Resolution resolution = Resolution::NoOp;
  Disruption disruption;
};

struct EnvOptions {
  bool disruptions = true;
};

class Env {
 public:
  Env(World world, Rng disruption_rng, EnvOptions options = {})
      : world_(std::move(world)), rng_(disruption_rng), options_(options),
        decoded_(sc_decode(world_.instruction)) {}

  const World& world() const { return world_; }
  const ScDecoded& decoded() const { return decoded_; }
  Observation observation() const { return observe(world_); }
  bool done() const { return cause_ != Cause::None; }
  Cause cause() const { return cause_; }

  // Feeds one token. Returns nullopt while the command is still being
  // assembled; otherwise the command resolved and one time step passed.
  std::optional<StepResult> step_token(const ActionToken& tok) {
    if (done()) throw UsageError("token after the episode ended");
    const std::optional<Resolution> r = std::visit([&](const auto& t) { return feed(t); }, tok);
    if (!r) return std::nullopt;
    assembly_ = Start{};
    return advance(*r);
  }

 private:
  struct Start {};
  struct ProbeChosen { int probe; };
  struct ProbeBuilding { int probe; int building; };
  struct CoordChosen { int cell; };
  using Assembly = std::variant<Start, ProbeChosen, ProbeBuilding, CoordChosen>;

  static bool valid_cell(int c) { return c >= 0 && c < kCells; }

  bool prerequisite_alive(int building) const {
    const int pre = world_.tree.prerequisite[building];
    return pre == kNone || building_counts(world_)[pre] > 0;
  }

  std::optional<Resolution> feed(const SelectProbe& t) {
    if (!std::holds_alternative<Start>(assembly_) || t.probe < 0 || t.probe >= kProbes) return Resolution::NoOp;
    assembly_ = ProbeChosen{t.probe};
    return std::nullopt;
  }

  std::optional<Resolution> feed(const SelectBuilding& t) {
    const auto* chosen = std::get_if<ProbeChosen>(&assembly_);
    if (!chosen || t.building < 0 || t.building >= kNumBuildings) return Resolution::NoOp;
    assembly_ = ProbeBuilding{chosen->probe, t.building};
    return std::nullopt;
  }

  std::optional<Resolution> feed(const SelectCoord& t) {
    if (!valid_cell(t.cell)) return Resolution::NoOp;
    if (std::holds_alternative<Start>(assembly_)) {
      if (world_.grid[t.cell] == kEmpty) return Resolution::NoOp;
      assembly_ = CoordChosen{t.cell};
      return std::nullopt;
    }
    if (const auto* chosen = std::get_if<ProbeChosen>(&assembly_)) {
      world_.probes[chosen->probe].task = ProbeTask{t.cell, kNone};
      return Resolution::GoTo;
    }
    if (const auto* build = std::get_if<ProbeBuilding>(&assembly_)) {
      if (world_.grid[t.cell] != kEmpty || !prerequisite_alive(build->building)) return Resolution::NoOp;
      world_.probes[build->probe].task = ProbeTask{t.cell, build->building};
      return Resolution::Build;
    }
    return Resolution::NoOp;
  }

  std::optional<Resolution> feed(const SelectUnit& t) {
    const auto* chosen = std::get_if<CoordChosen>(&assembly_);
    if (!chosen || t.unit < 0 || t.unit >= kNumUnits) return Resolution::NoOp;
    if (world_.tree.producer[t.unit] != world_.grid[chosen->cell]) return Resolution::NoOp;
    pending_train_ = t.unit;
    return Resolution::Train;
  }

  std::optional<Resolution> feed(const Commit&) {
    return std::holds_alternative<Start>(assembly_) ? Resolution::Wait : Resolution::NoOp;
  }

  // One time step: training completes, probes move one cell (row first) and
  // build on arrival if the cell is still free and the prerequisite stands,
  // then disruptions roll and termination is checked.
  StepResult advance(Resolution r) {
    StepResult out;
    out.resolution = r;
    if (pending_train_ != kNone) {
      ++world_.units[pending_train_];
      pending_train_ = kNone;
    }
    for (Probe& p : world_.probes) {
      if (!p.task) continue;
      const int dest = p.task->destination;
      if (p.cell != dest) {
        int r0 = row_of(p.cell), c0 = col_of(p.cell);
        if (r0 != row_of(dest)) r0 += r0 < row_of(dest) ? 1 : -1;
        else c0 += c0 < col_of(dest) ? 1 : -1;
        p.cell = r0 * kSide + c0;
      }
      if (p.cell == dest) {
        const int b = p.task->building;
        if (b != kNone && world_.grid[dest] == kEmpty && prerequisite_alive(b)) world_.grid[dest] = b;
        p.task.reset();
      }
    }
    ++world_.step;
    if (options_.disruptions) {
      out.disruption = roll_disruptions(world_, rng_);
    } else {
      world_.ambush = kNone;
    }
    const DoneCheck d = check_done(world_, decoded_);
    cause_ = d.cause;
    out.reward = d.reward;
    out.done = d.done;
    out.cause = d.cause;
    out.observation = observe(world_);
    return out;
  }

  World world_;
  Rng rng_;
  EnvOptions options_;
  ScDecoded decoded_;
  Assembly assembly_ = Start{};
  int pending_train_ = kNone;
  Cause cause_ = Cause::None;
};

}  // namespace flowsim::starcraft
