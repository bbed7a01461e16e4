#pragma once

// Policies for both domains: the ground-truth oracle, random and scripted
// players, and two pointer-driven players that follow the oracle's program
// counter through a movable pointer.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowsim/interpreter.hpp"
#include "flowsim/minecraft.hpp"
#include "flowsim/pointer_kernel.hpp"
#include "flowsim/rng.hpp"
#include "flowsim/starcraft.hpp"

namespace flowsim::minecraft {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const Observation& first) = 0;
  // last: the interaction the worker completed on the previous step, if any.
  virtual Command act(const Observation& obs, const std::optional<Interaction>& last) = 0;
  virtual std::optional<std::size_t> program_counter() const { return std::nullopt; }
};

// Tracks the program counter from the instruction in the observation, the
// on-map counts and the worker's completion reports.
class ProgramTracker {
 public:
  void reset(const Observation& obs) {
    instruction_ = decode_cf(obs.instruction);
    table_ = ControlFlowTable(instruction_);
    stuck_ = false;
    pc_ = resolve(0, obs);
  }

  void observe(const Observation& obs, const std::optional<Interaction>& last) {
    if (!last || stuck_ || pc_ >= instruction_.size()) return;
    const Subtask& s = instruction_[pc_].subtask;
    if (s.verb == last->verb && s.target == last->target) pc_ = resolve(pc_ + 1, obs);
  }

  std::size_t pc() const { return pc_; }
  bool finished() const { return stuck_ || pc_ >= instruction_.size(); }
  const CfInstruction& instruction() const { return instruction_; }

 private:
  std::size_t resolve(std::size_t from, const Observation& obs) {
    const auto counts = entity_counts(obs);
    try {
      return cf_step(instruction_, table_, from, [&](const Condition& c) { return eval_condition(c, counts); });
    } catch (const NonTerminatingControlFlow&) {
      stuck_ = true;
      return from;
    }
  }

  CfInstruction instruction_;
  ControlFlowTable table_;
  std::size_t pc_ = 0;
  bool stuck_ = false;
};

class OraclePolicy final : public Policy {
 public:
  void reset(const Observation& first) override { tracker_.reset(first); }

  Command act(const Observation& obs, const std::optional<Interaction>& last) override {
    tracker_.observe(obs, last);
    if (!tracker_.finished()) last_ = tracker_.instruction()[tracker_.pc()].subtask;
    return last_;
  }

  std::optional<std::size_t> program_counter() const override { return tracker_.pc(); }

 private:
  ProgramTracker tracker_;
  Command last_{Verb::Inspect, Resource::Iron};
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(Rng rng) : rng_(rng) {}
  void reset(const Observation&) override {}
  Command act(const Observation&, const std::optional<Interaction>&) override {
    const auto all = all_commands();
    return all[rng_.index(all.size())];
  }

 private:
  Rng rng_;
};

// Issues the listed commands in order, moving on when the worker reports
// completing the current one; the last command repeats once the list is used.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<Command> script) : script_(std::move(script)) {
    if (script_.empty()) throw std::invalid_argument("ScriptedPolicy: empty script");
  }
  void reset(const Observation&) override { next_ = 0; }
  Command act(const Observation&, const std::optional<Interaction>& last) override {
    if (last && next_ + 1 < script_.size() && last->verb == script_[next_].verb &&
        last->target == script_[next_].target)
      ++next_;
    return script_[next_];
  }

 private:
  std::vector<Command> script_;
  std::size_t next_ = 0;
};

// The pointer moves by at most one line per step toward the line the
// instruction requires, and the worker is always commanded with the subtask
// under the pointer (the previous one while the pointer sits on a keyword).
class PointerWalkPolicy final : public Policy {
 public:
  void reset(const Observation& first) override {
    tracker_.reset(first);
    pointer_ = 0;
    latched_.reset();
  }

  Command act(const Observation& obs, const std::optional<Interaction>& last) override {
    tracker_.observe(obs, last);
    const auto& instr = tracker_.instruction();
    const int target = static_cast<int>(std::min(tracker_.pc(), instr.size() - 1));
    if (pointer_ != target) pointer_ += pointer_ < target ? 1 : -1;
    const CfLine& line = instr[static_cast<std::size_t>(pointer_)];
    if (line.is_subtask()) latched_ = line.subtask;
    return latched_.value_or(Command{Verb::Inspect, Resource::Iron});
  }

  std::optional<std::size_t> program_counter() const override { return tracker_.pc(); }
  int pointer() const { return pointer_; }

 private:
  ProgramTracker tracker_;
  int pointer_ = 0;
  std::optional<Command> latched_;
};

// The pointer jumps with the scan distribution. Per-line logits flag the
// required line (large positive) and nothing else; the gate opens only when
// the pointer is off that line.
class ScanPointerPolicy final : public Policy {
 public:
  explicit ScanPointerPolicy(Rng rng, double flag_logit = 20.0) : rng_(rng), flag_(flag_logit) {}

  void reset(const Observation& first) override {
    tracker_.reset(first);
    pointer_ = {0};
    latched_.reset();
  }

  Command act(const Observation& obs, const std::optional<Interaction>& last) override {
    tracker_.observe(obs, last);
    const auto& instr = tracker_.instruction();
    const int length = static_cast<int>(instr.size());
    const int target = static_cast<int>(std::min(tracker_.pc(), instr.size() - 1));
    const bool gate = pointer_.position != target;
    if (gate) {
      std::vector<double> line_logits(instr.size(), -flag_);
      line_logits[static_cast<std::size_t>(target)] = flag_;
      pointer::Matrix h(2 * static_cast<std::size_t>(length), 1, -flag_);
      for (int row = 0; row < 2 * length; ++row) {
        const int line = pointer_.position + pointer::row_to_delta(row, length);
        if (line >= 0 && line < length) h(static_cast<std::size_t>(row), 0) = line_logits[static_cast<std::size_t>(line)];
      }
      const auto dist = pointer::scan_matrix(pointer::ScanLogits(std::move(h)));
      const double edge_logits[1] = {0.0};
      if (const auto delta = pointer::mix_and_sample(dist, edge_logits, rng_))
        pointer_ = pointer::update_pointer(pointer_, gate, *delta, length);
    }
    const CfLine& line = instr[static_cast<std::size_t>(pointer_.position)];
    if (line.is_subtask()) latched_ = line.subtask;
    return latched_.value_or(Command{Verb::Inspect, Resource::Iron});
  }

  std::optional<std::size_t> program_counter() const override { return tracker_.pc(); }

 private:
  Rng rng_;
  double flag_;
  ProgramTracker tracker_;
  pointer::PointerState pointer_{0};
  std::optional<Command> latched_;
};

}  // namespace flowsim::minecraft

namespace flowsim::starcraft {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const Observation& first) = 0;
  virtual ActionToken act(const Observation& obs) = 0;
};

// Replans from the observation before every command: takes the first
// actionable entry of sc_plan (train where a producer stands, build with an
// idle probe once the prerequisite stands) and waits when nothing is
// actionable. Every emitted token sequence is legal when it resolves.
class OraclePolicy final : public Policy {
 public:
  void reset(const Observation& first) override {
    decoded_ = sc_decode(decode_sc(first.instruction));
    queue_.clear();
    assigned_.fill(std::nullopt);
  }

  ActionToken act(const Observation& obs) override {
    if (queue_.empty()) plan(obs);
    ActionToken tok = queue_.front();
    queue_.erase(queue_.begin());
    return tok;
  }

 private:
  struct Assignment {
    int building;
    int cell;
  };

  void plan(const Observation& obs) {
    for (int p = 0; p < kProbes; ++p)
      if (obs.probe_idle[p]) assigned_[p].reset();
    ScSnapshot snap;
    for (int c = 0; c < kCells; ++c)
      if (const int b = building_at(obs, c); b != kEmpty) ++snap.buildings[b];
    snap.units = obs.units;
    for (const ScCommand& cmd : sc_plan(decoded_, snap)) {
      if (const auto* train = std::get_if<TrainCommand>(&cmd)) {
        const int producer = decoded_.producer[train->unit];
        for (int c = 0; c < kCells; ++c)
          if (obs.buildings[producer][c]) {
            queue_ = {SelectCoord{c}, SelectUnit{train->unit}};
            return;
          }
        continue;
      }
      const int b = std::get<BuildCommand>(cmd).building;
      const int pre = decoded_.prerequisite[b];
      if (pre != kNone && snap.buildings[pre] == 0) continue;
      bool underway = false;
      for (const auto& a : assigned_) underway |= a && a->building == b;
      if (underway) continue;
      for (int p = 0; p < kProbes; ++p) {
        if (!obs.probe_idle[p]) continue;
        const int cell = free_cell_near(obs, obs.probe_cell[p]);
        if (cell == kEmpty) break;
        assigned_[p] = Assignment{b, cell};
        queue_ = {SelectProbe{p}, SelectBuilding{b}, SelectCoord{cell}};
        return;
      }
    }
    queue_ = {Commit{}};
  }

  // Nearest free cell (Manhattan, then row-major) no other probe is heading to.
  int free_cell_near(const Observation& obs, int from) const {
    int best = kEmpty, best_dist = 1 << 30;
    for (int c = 0; c < kCells; ++c) {
      if (building_at(obs, c) != kEmpty) continue;
      bool taken = false;
      for (const auto& a : assigned_) taken |= a && a->cell == c;
      if (taken) continue;
      const int d = std::abs(row_of(c) - row_of(from)) + std::abs(col_of(c) - col_of(from));
      if (d < best_dist) {
        best = c;
        best_dist = d;
      }
    }
    return best;
  }

  ScDecoded decoded_;
  std::vector<ActionToken> queue_;
  std::array<std::optional<Assignment>, kProbes> assigned_{};
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(Rng rng) : rng_(rng) {}
  void reset(const Observation&) override {}
  ActionToken act(const Observation&) override {
    switch (rng_.index(5)) {
      case 0: return SelectProbe{static_cast<int>(rng_.index(kProbes))};
      case 1: return SelectCoord{static_cast<int>(rng_.index(kCells))};
      case 2: return SelectBuilding{static_cast<int>(rng_.index(kNumBuildings))};
      case 3: return SelectUnit{static_cast<int>(rng_.index(kNumUnits))};
      default: return Commit{};
    }
  }

 private:
  Rng rng_;
};

// Plays the listed tokens, then commits (waits) forever.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<ActionToken> script) : script_(std::move(script)) {}
  void reset(const Observation&) override { next_ = 0; }
  ActionToken act(const Observation&) override {
    if (next_ < script_.size()) return script_[next_++];
    return Commit{};
  }

 private:
  std::vector<ActionToken> script_;
  std::size_t next_ = 0;
};

}  // namespace flowsim::starcraft
