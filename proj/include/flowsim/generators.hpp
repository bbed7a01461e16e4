#pragma once

// Procedural instruction generators for both domains.

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flowsim/instruction.hpp"
#include "flowsim/rng.hpp"

namespace flowsim {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LengthRange {
  std::size_t lo = 1;
  std::size_t hi = 1;
  bool contains(std::size_t n) const { return lo <= n && n <= hi; }
};

enum class FlowFilter { Any, Single, Multi };

inline constexpr int kDefaultRejectionBudget = 1000;

struct FlowTypes {
  bool has_if = false;
  bool has_while = false;
  int count() const { return int(has_if) + int(has_while); }
};

inline FlowTypes flow_types(std::span<const CfLine> lines) {
  FlowTypes t;
  for (const CfLine& l : lines) {
    t.has_if |= l.kind == LineKind::If;
    t.has_while |= l.kind == LineKind::While;
  }
  return t;
}

inline bool passes(FlowFilter filter, std::span<const CfLine> lines) {
  switch (filter) {
    case FlowFilter::Any: return true;
    case FlowFilter::Single: return flow_types(lines).count() < 2;
    case FlowFilter::Multi: return flow_types(lines).count() >= 2;
  }
  return false;
}

inline Subtask random_subtask(Rng& rng) {
  return {kVerbs[rng.index(kVerbs.size())], kResources[rng.index(kResources.size())]};
}

inline Condition random_condition(Rng& rng) {
  const Comparand lhs = kComparands[rng.index(4)];
  std::vector<Comparand> others;
  for (Comparand c : kComparands)
    if (c != lhs) others.push_back(c);
  return {lhs, rng.pick(others)};
}

namespace detail {

// Lines needed to close `depth` open blocks. A closer (else/endif/endwhile)
// only ever follows a subtask line.
inline std::size_t closing_cost(std::size_t depth, bool after_subtask) {
  if (depth == 0) return 0;
  return (after_subtask ? 0 : 1) + 1 + 2 * (depth - 1);
}

// One draw of exactly `length` lines. Each line kind is drawn uniformly from the
// context menu ({if, while, subtask}, plus else/endif inside an if-clause after a
// subtask, endwhile inside a while-clause after a subtask, endif inside an
// else-clause after a subtask), restricted to kinds after which the open blocks
// can still be closed within the remaining lines.
inline CfInstruction draw_control_flow(Rng& rng, std::size_t length) {
  struct Frame {
    bool is_while;
    bool in_else;
  };
  std::vector<Frame> stack;
  bool after_subtask = false;
  CfInstruction out;
  out.reserve(length);
  std::vector<LineKind> menu;
  while (out.size() < length) {
    const std::size_t left = length - out.size() - 1;  // after the line being chosen
    const std::size_t d = stack.size();
    menu.clear();
    if (closing_cost(d, true) <= left) menu.push_back(LineKind::Subtask);
    if (closing_cost(d + 1, false) <= left) {
      menu.push_back(LineKind::If);
      menu.push_back(LineKind::While);
    }
    if (d > 0 && after_subtask) {
      const Frame& top = stack.back();
      if (top.is_while) {
        if (closing_cost(d - 1, false) <= left) menu.push_back(LineKind::EndWhile);
      } else {
        if (!top.in_else && closing_cost(d, false) <= left) menu.push_back(LineKind::Else);
        if (closing_cost(d - 1, false) <= left) menu.push_back(LineKind::EndIf);
      }
    }
    const LineKind kind = rng.pick(menu);
    switch (kind) {
      case LineKind::Subtask: out.push_back(CfLine::task(random_subtask(rng))); break;
      case LineKind::If:
        out.push_back(CfLine::if_(random_condition(rng)));
        stack.push_back({false, false});
        break;
      case LineKind::While:
        out.push_back(CfLine::while_(random_condition(rng)));
        stack.push_back({true, false});
        break;
      case LineKind::Else:
        out.push_back(CfLine::else_());
        stack.back().in_else = true;
        break;
      case LineKind::EndIf:
        out.push_back(CfLine::end_if());
        stack.pop_back();
        break;
      case LineKind::EndWhile:
        out.push_back(CfLine::end_while());
        stack.pop_back();
        break;
    }
    after_subtask = kind == LineKind::Subtask;
  }
  return out;
}

}  // namespace detail

// Random control-flow instruction with length uniform in `lengths`.
// Returns nullopt when `max_attempts` draws all failed the flow filter.
inline std::optional<CfInstruction> gen_minecraft(Rng& rng, LengthRange lengths,
                                                  FlowFilter filter = FlowFilter::Any,
                                                  int max_attempts = kDefaultRejectionBudget) {
  if (lengths.lo < 1 || lengths.hi < lengths.lo)
    throw std::invalid_argument("gen_minecraft: length range must satisfy 1 <= lo <= hi");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const auto length = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(lengths.lo), static_cast<std::int64_t>(lengths.hi)));
    CfInstruction instr = detail::draw_control_flow(rng, length);
    if (passes(filter, instr)) return instr;
  }
  return std::nullopt;
}

struct LongJump {
  CfInstruction instruction;
  // Opening condition of the first block; the paired spawner keeps
  // count(lhs) at zero so the block is always skipped.
  Condition failing;
};

inline constexpr int kMaxLongJumpBlock = 40;

// [if|while C, <block_len subtasks>, endif|endwhile, <final subtask>]
inline LongJump gen_longjump(Rng& rng, int block_len) {
  if (block_len < 1) throw std::invalid_argument("gen_longjump: block_len must be >= 1");
  const bool use_while = rng.bernoulli(0.5);
  const Condition cond = random_condition(rng);
  LongJump out{{}, cond};
  out.instruction.push_back(use_while ? CfLine::while_(cond) : CfLine::if_(cond));
  for (int i = 0; i < block_len; ++i) out.instruction.push_back(CfLine::task(random_subtask(rng)));
  out.instruction.push_back(use_while ? CfLine::end_while() : CfLine::end_if());
  // The final subtask must stay executable with count(cond.lhs) == 0.
  std::vector<Subtask> finals;
  for (Verb v : kVerbs)
    for (Resource r : kResources) {
      if (as_comparand(r) == cond.lhs) continue;
      if (v == Verb::Sell && cond.lhs == Comparand::Merchant) continue;
      finals.push_back({v, r});
    }
  out.instruction.push_back(CfLine::task(rng.pick(finals)));
  return out;
}

// ---------------------------------------------------------------------------
// Build trees

inline constexpr int kNone = -1;

struct BuildTree {
  std::array<int, kNumBuildings> prerequisite;  // kNone for roots
  std::array<int, kNumUnits> producer;

  BuildTree() {
    prerequisite.fill(kNone);
    producer.fill(kNexus);
  }

  // Number of buildings on the chain ending at b (a root has depth 1).
  int depth(int b) const {
    int d = 0;
    for (int cur = b; cur != kNone; cur = prerequisite.at(cur)) {
      if (++d > kNumBuildings) throw std::logic_error("BuildTree: prerequisite cycle");
    }
    return d;
  }

  // Root first, b last.
  std::vector<int> chain(int b) const {
    std::vector<int> out;
    for (int cur = b; cur != kNone; cur = prerequisite.at(cur)) {
      out.push_back(cur);
      if (out.size() > kNumBuildings) throw std::logic_error("BuildTree: prerequisite cycle");
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  int max_depth() const {
    int d = 0;
    for (int b = 0; b < kNumBuildings; ++b) d = std::max(d, depth(b));
    return d;
  }

  bool acyclic() const {
    try {
      max_depth();
      return true;
    } catch (const std::logic_error&) {
      return false;
    }
  }

  friend bool operator==(const BuildTree&, const BuildTree&) = default;
};

// Random DAG: the Nexus is the first root, the other 13 buildings follow in a
// uniformly random order and each takes a prerequisite uniformly from
// {none} and the earlier buildings whose depth is below max_depth.
// Producers are uniform over all buildings.
inline BuildTree random_build_tree(Rng& rng, std::optional<int> max_depth = std::nullopt) {
  if (max_depth && *max_depth < 1) throw std::invalid_argument("random_build_tree: max_depth < 1");
  BuildTree tree;
  std::vector<int> order;
  for (int b = 1; b < kNumBuildings; ++b) order.push_back(b);
  rng.shuffle(order);
  order.insert(order.begin(), kNexus);
  std::array<int, kNumBuildings> depth{};
  depth[kNexus] = 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    std::vector<int> options{kNone};
    for (std::size_t j = 0; j < i; ++j)
      if (!max_depth || depth[order[j]] < *max_depth) options.push_back(order[j]);
    const int pre = rng.pick(options);
    tree.prerequisite[order[i]] = pre;
    depth[order[i]] = pre == kNone ? 1 : depth[pre] + 1;
  }
  for (int u = 0; u < kNumUnits; ++u) tree.producer[u] = static_cast<int>(rng.index(kNumBuildings));
  return tree;
}

namespace detail {

struct OrderState {
  std::array<bool, kNumBuildings> listed{};
  int nearest_building = kNone;  // building of the latest building line
  bool empty = true;
};

// Lines that introduce unit u into the order. The producer must be the nearest
// preceding building line; building-building adjacencies state prerequisites.
// Chain members already listed are omitted, except the deepest listed one,
// which is repeated to anchor the first new member.
inline std::vector<ScLine> unit_lines(const BuildTree& tree, const OrderState& st, int u,
                                      std::size_t budget) {
  const int producer = tree.producer[u];
  if (st.empty && budget == 1 && producer == kNexus) return {ScLine::unit(u)};
  const std::vector<int> chain = tree.chain(producer);
  int deepest_listed = -1;
  for (int k = static_cast<int>(chain.size()) - 1; k >= 0; --k)
    if (st.listed[chain[k]]) {
      deepest_listed = k;
      break;
    }
  std::vector<ScLine> lines;
  if (deepest_listed == static_cast<int>(chain.size()) - 1) {
    if (st.nearest_building != producer) lines.push_back(ScLine::building(producer));
  } else {
    for (std::size_t k = static_cast<std::size_t>(std::max(deepest_listed, 0)); k < chain.size(); ++k)
      lines.push_back(ScLine::building(chain[k]));
  }
  lines.push_back(ScLine::unit(u));
  return lines;
}

}  // namespace detail

struct BuildOrder {
  BuildTree tree;
  ScInstruction instruction;
};

// Assembles an order unit by unit, each unit uniform among the unlisted units
// whose lines fit the remaining budget, until the budget is used or nothing
// fits. Each unit is required at most once. The tree is redrawn when no unit
// fits at all.
inline BuildOrder gen_starcraft(Rng& rng, std::size_t max_len, std::optional<int> max_depth = std::nullopt) {
  if (max_len < 1) throw std::invalid_argument("gen_starcraft: max_len must be >= 1");
  for (int attempt = 0; attempt < kDefaultRejectionBudget; ++attempt) {
    BuildOrder order{random_build_tree(rng, max_depth), {}};
    detail::OrderState st;
    std::array<bool, kNumUnits> used{};
    while (order.instruction.size() < max_len) {
      const std::size_t budget = max_len - order.instruction.size();
      std::vector<std::vector<ScLine>> candidates;
      for (int u = 0; u < kNumUnits; ++u) {
        if (used[u]) continue;
        auto lines = detail::unit_lines(order.tree, st, u, budget);
        if (lines.size() <= budget) candidates.push_back(std::move(lines));
      }
      if (candidates.empty()) break;
      const auto& chosen = candidates[rng.index(candidates.size())];
      for (const ScLine& l : chosen) {
        order.instruction.push_back(l);
        if (l.is_building()) {
          st.listed[l.id] = true;
          st.nearest_building = l.id;
        } else {
          used[l.id] = true;
        }
      }
      st.empty = false;
    }
    if (!order.instruction.empty()) return order;
  }
  throw GenerationError("gen_starcraft: no satisfiable order found");
}

}  // namespace flowsim
