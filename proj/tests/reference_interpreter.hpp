#pragma once

// Tree-walking reference executor used to cross-check the table-driven
// stepping: parses the block structure recursively, then runs it with a
// fixed list of condition outcomes.

#include <memory>
#include <stdexcept>
#include <vector>

#include "flowsim/instruction.hpp"

namespace ref {

using flowsim::CfLine;
using flowsim::LineKind;
using flowsim::Subtask;

struct Node;
using Block = std::vector<Node>;

struct Node {
  enum Kind { Task, If, While } kind;
  Subtask task{};
  Block then_block, else_block;  // While uses then_block
};

struct OutOfOutcomes {};

class Parser {
 public:
  explicit Parser(const std::vector<CfLine>& lines) : lines_(lines) {}

  Block program() {
    Block b = block();
    if (pos_ != lines_.size()) throw std::runtime_error("trailing lines");
    return b;
  }

 private:
  Block block() {
    Block out;
    while (pos_ < lines_.size()) {
      const CfLine& l = lines_[pos_];
      if (l.kind == LineKind::Subtask) {
        out.push_back({Node::Task, l.subtask, {}, {}});
        ++pos_;
      } else if (l.kind == LineKind::If) {
        ++pos_;
        Node n{Node::If, {}, block(), {}};
        if (pos_ < lines_.size() && lines_[pos_].kind == LineKind::Else) {
          ++pos_;
          n.else_block = block();
        }
        expect(LineKind::EndIf);
        out.push_back(std::move(n));
      } else if (l.kind == LineKind::While) {
        ++pos_;
        Node n{Node::While, {}, block(), {}};
        expect(LineKind::EndWhile);
        out.push_back(std::move(n));
      } else {
        break;
      }
    }
    return out;
  }

  void expect(LineKind k) {
    if (pos_ >= lines_.size() || lines_[pos_].kind != k) throw std::runtime_error("unbalanced");
    ++pos_;
  }

  const std::vector<CfLine>& lines_;
  std::size_t pos_ = 0;
};

class Runner {
 public:
  explicit Runner(const std::vector<bool>& outcomes) : outcomes_(outcomes) {}

  void run(const Block& b) {
    for (const Node& n : b) {
      switch (n.kind) {
        case Node::Task: out.push_back(n.task); break;
        case Node::If: run(next() ? n.then_block : n.else_block); break;
        case Node::While:
          while (next()) run(n.then_block);
          break;
      }
    }
  }

  std::vector<Subtask> out;

 private:
  bool next() {
    if (used_ >= outcomes_.size()) throw OutOfOutcomes{};
    return outcomes_[used_++];
  }
  const std::vector<bool>& outcomes_;
  std::size_t used_ = 0;
};

// nullopt-like signal through the flag: false when the outcomes ran out.
inline bool execute(const std::vector<CfLine>& lines, const std::vector<bool>& outcomes, std::vector<Subtask>& out) {
  const Block program = Parser(lines).program();
  Runner r(outcomes);
  try {
    r.run(program);
  } catch (const OutOfOutcomes&) {
    return false;
  }
  out = r.out;
  return true;
}

}  // namespace ref
