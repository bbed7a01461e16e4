#pragma once

// Ground-truth execution semantics: structured if/else/while stepping for
// control-flow instructions, and the build-order decoding and planning rules.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "flowsim/generators.hpp"
#include "flowsim/instruction.hpp"

namespace flowsim {

class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when condition resolution keeps cycling without reaching a subtask.
class NonTerminatingControlFlow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TraceExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Jump targets for every control-flow line of a well-formed instruction.
class ControlFlowTable {
 public:
  ControlFlowTable() = default;

  explicit ControlFlowTable(std::span<const CfLine> lines)
      : on_false_(lines.size(), 0), jump_(lines.size(), 0) {
    if (!validate(lines)) throw StructureError("malformed nesting");
    struct Open {
      std::size_t header;
      std::optional<std::size_t> else_line;
    };
    std::vector<Open> stack;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      switch (lines[i].kind) {
        case LineKind::Subtask: break;
        case LineKind::If:
        case LineKind::While: stack.push_back({i, std::nullopt}); break;
        case LineKind::Else: stack.back().else_line = i; break;
        case LineKind::EndIf: {
          const Open open = stack.back();
          stack.pop_back();
          on_false_[open.header] = open.else_line ? *open.else_line + 1 : i + 1;
          if (open.else_line) jump_[*open.else_line] = i + 1;
          jump_[i] = i + 1;
          break;
        }
        case LineKind::EndWhile: {
          const Open open = stack.back();
          stack.pop_back();
          on_false_[open.header] = i + 1;
          jump_[i] = open.header;
          break;
        }
      }
    }
  }

  // Where an if/while goes when its condition is false.
  std::size_t on_false(std::size_t line) const { return on_false_.at(line); }
  // Where else, endif and endwhile transfer control.
  std::size_t jump(std::size_t line) const { return jump_.at(line); }
  std::size_t size() const { return on_false_.size(); }

 private:
  std::vector<std::size_t> on_false_;
  std::vector<std::size_t> jump_;
};

// Visits of control lines allowed in one resolution when the evaluator is
// constant over the call: a loop back to an already visited header repeats
// forever, and there are at most L distinct lines to pass.
inline std::size_t default_control_budget(std::size_t length) { return 2 * length + 2; }

// Resolves control flow starting at `pc` until it rests on a subtask line or
// at L (program complete). Conditions are evaluated as they are met.
template <class CondEval>
std::size_t cf_step(std::span<const CfLine> lines, const ControlFlowTable& table, std::size_t pc,
                    CondEval&& eval, std::optional<std::size_t> control_budget = std::nullopt) {
  const std::size_t budget = control_budget.value_or(default_control_budget(lines.size()));
  std::size_t visits = 0;
  while (pc < lines.size()) {
    const CfLine& line = lines[pc];
    if (line.is_subtask()) return pc;
    if (++visits > budget) throw NonTerminatingControlFlow("control flow does not reach a subtask");
    switch (line.kind) {
      case LineKind::If:
      case LineKind::While: pc = eval(line.condition) ? pc + 1 : table.on_false(pc); break;
      case LineKind::Else:
      case LineKind::EndIf:
      case LineKind::EndWhile: pc = table.jump(pc); break;
      case LineKind::Subtask: break;
    }
  }
  return lines.size();
}

// count(lhs) > count(rhs); counts are indexed by Comparand.
inline bool eval_condition(const Condition& cond, const std::array<int, 4>& counts) {
  return counts[index_of(cond.lhs)] > counts[index_of(cond.rhs)];
}

// The legal subtask order when condition evaluations return `outcomes` in turn.
inline std::vector<Subtask> required_sequence(std::span<const CfLine> lines, const std::vector<bool>& outcomes) {
  const ControlFlowTable table(lines);
  std::size_t consumed = 0;
  auto eval = [&](const Condition&) {
    if (consumed >= outcomes.size()) throw TraceExhausted("condition trace exhausted");
    return outcomes[consumed++];
  };
  // Every revisit of a while header consumes an outcome, so this bound is never
  // hit before the trace runs out.
  const std::size_t budget = (outcomes.size() + 1) * (lines.size() + 1);
  std::vector<Subtask> out;
  std::size_t pc = cf_step(lines, table, 0, eval, budget);
  while (pc < lines.size()) {
    out.push_back(lines[pc].subtask);
    pc = cf_step(lines, table, pc + 1, eval, budget);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Build orders

struct ScDecoded {
  std::array<int, kNumBuildings> prerequisite;  // kNone when no prerequisite is stated
  std::array<int, kNumUnits> producer;          // kNone for units not in the order
  std::array<bool, kNumBuildings> mentioned{};
  std::vector<int> required_units;              // instruction order, no repeats

  ScDecoded() {
    prerequisite.fill(kNone);
    producer.fill(kNone);
  }
};

// building->building states a prerequisite; a unit is produced by the nearest
// preceding building line. A unit line with no building before it is produced
// by the Nexus, which exists in every episode.
inline ScDecoded sc_decode(std::span<const ScLine> lines) {
  if (!validate(lines)) throw DecodeError("invalid build order");
  ScDecoded out;
  int nearest = kNone;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const ScLine& l = lines[i];
    if (l.is_building()) {
      out.mentioned[l.id] = true;
      if (i > 0 && lines[i - 1].is_building()) {
        const int pre = lines[i - 1].id;
        if (pre == l.id) throw DecodeError("building listed as its own prerequisite");
        int& slot = out.prerequisite[l.id];
        if (slot != kNone && slot != pre) throw DecodeError("conflicting prerequisites");
        slot = pre;
      }
      nearest = l.id;
    } else {
      const int producer = nearest == kNone ? kNexus : nearest;
      int& slot = out.producer[l.id];
      if (slot == kNone) {
        slot = producer;
        out.required_units.push_back(l.id);
      } else if (slot != producer) {
        throw DecodeError("conflicting producers for a unit");
      }
    }
  }
  for (int b = 0; b < kNumBuildings; ++b) {
    int steps = 0;
    for (int cur = out.prerequisite[b]; cur != kNone; cur = out.prerequisite[cur])
      if (++steps > kNumBuildings) throw DecodeError("cyclic prerequisites");
  }
  return out;
}

struct BuildCommand {
  int building;
  friend bool operator==(const BuildCommand&, const BuildCommand&) = default;
};
struct TrainCommand {
  int unit;
  friend bool operator==(const TrainCommand&, const TrainCommand&) = default;
};
using ScCommand = std::variant<BuildCommand, TrainCommand>;
using ScPlan = std::vector<ScCommand>;

struct ScSnapshot {
  std::array<int, kNumBuildings> buildings{};  // alive count per type
  std::array<int, kNumUnits> units{};
};

// For each missing required unit (instruction order): the missing part of its
// producer's chain, deepest missing ancestor first, then the unit itself.
// A building already alive or already planned is not repeated.
inline ScPlan sc_plan(const ScDecoded& decoded, const ScSnapshot& world) {
  ScPlan plan;
  std::array<bool, kNumBuildings> planned{};
  for (int u : decoded.required_units) {
    if (world.units[u] > 0) continue;
    std::vector<int> missing;
    for (int b = decoded.producer[u]; b != kNone && world.buildings[b] == 0 && !planned[b];
         b = decoded.prerequisite[b])
      missing.push_back(b);
    for (auto it = missing.rbegin(); it != missing.rend(); ++it) {
      plan.push_back(BuildCommand{*it});
      planned[*it] = true;
    }
    plan.push_back(TrainCommand{u});
  }
  return plan;
}

}  // namespace flowsim
