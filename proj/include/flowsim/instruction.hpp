#pragma once

// Instruction languages for the two domains: line types, well-formedness,
// the text format and the integer encodings.
//
// Control-flow (gridworld) lines encode as integer triples
//   [kind, action, operand]
// with
//   kind     0 subtask, 1 if, 2 else, 3 endif, 4 while, 5 endwhile
//   action   subtask verb: 0 mine, 1 sell, 2 inspect; 0 for every other kind
//   operand  subtask target: 0 iron, 1 gold, 2 wood;
//            if/while condition "more A than B": 4*A + B over
//            comparands 0 iron, 1 gold, 2 wood, 3 merchant (A != B);
//            0 for else/endif/endwhile.
// Build-order lines encode as a single integer: building b -> b (0..13),
// unit u -> 14 + u (14..29).
// These tables are part of the file formats and must not be reordered.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flowsim {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Control-flow domain

enum class LineKind : std::uint8_t { Subtask, If, Else, EndIf, While, EndWhile };
enum class Verb : std::uint8_t { Mine, Sell, Inspect };
enum class Resource : std::uint8_t { Iron, Gold, Wood };
enum class Comparand : std::uint8_t { Iron, Gold, Wood, Merchant };

inline constexpr std::array kVerbs{Verb::Mine, Verb::Sell, Verb::Inspect};
inline constexpr std::array kResources{Resource::Iron, Resource::Gold, Resource::Wood};
inline constexpr std::array kComparands{Comparand::Iron, Comparand::Gold, Comparand::Wood,
                                        Comparand::Merchant};

inline constexpr int index_of(Verb v) { return static_cast<int>(v); }
inline constexpr int index_of(Resource r) { return static_cast<int>(r); }
inline constexpr int index_of(Comparand c) { return static_cast<int>(c); }

inline constexpr Comparand as_comparand(Resource r) { return static_cast<Comparand>(index_of(r)); }

struct Subtask {
  Verb verb = Verb::Mine;
  Resource target = Resource::Iron;
  friend bool operator==(const Subtask&, const Subtask&) = default;
};

// "more <lhs> than <rhs>"
struct Condition {
  Comparand lhs = Comparand::Iron;
  Comparand rhs = Comparand::Gold;
  friend bool operator==(const Condition&, const Condition&) = default;
};

struct CfLine {
  LineKind kind = LineKind::Subtask;
  Subtask subtask{};
  Condition condition{};

  static CfLine task(Verb v, Resource r) { return {LineKind::Subtask, {v, r}, {}}; }
  static CfLine task(Subtask s) { return {LineKind::Subtask, s, {}}; }
  static CfLine if_(Condition c) { return {LineKind::If, {}, c}; }
  static CfLine while_(Condition c) { return {LineKind::While, {}, c}; }
  static CfLine else_() { return {LineKind::Else, {}, {}}; }
  static CfLine end_if() { return {LineKind::EndIf, {}, {}}; }
  static CfLine end_while() { return {LineKind::EndWhile, {}, {}}; }

  bool is_subtask() const { return kind == LineKind::Subtask; }
  bool has_condition() const { return kind == LineKind::If || kind == LineKind::While; }

  // Only the fields meaningful for the kind take part in equality.
  friend bool operator==(const CfLine& a, const CfLine& b) {
    if (a.kind != b.kind) return false;
    if (a.is_subtask()) return a.subtask == b.subtask;
    if (a.has_condition()) return a.condition == b.condition;
    return true;
  }
};

using CfInstruction = std::vector<CfLine>;

// ---------------------------------------------------------------------------
// Build-order domain

inline constexpr int kNumBuildings = 14;
inline constexpr int kNumUnits = 16;
inline constexpr int kNexus = 0;

inline constexpr std::array<std::string_view, kNumBuildings> kBuildingNames{
    "Nexus",         "Assimilator",      "Gateway",       "CyberneticsCore", "Forge",
    "PhotonCannon",  "ShieldBattery",    "TwilightCouncil", "Stargate",      "RoboticsFacility",
    "RoboticsBay",   "TemplarArchives",  "DarkShrine",    "FleetBeacon"};

inline constexpr std::array<std::string_view, kNumUnits> kUnitNames{
    "Zealot",  "Adept",     "Stalker",  "Sentry",  "HighTemplar", "DarkTemplar",
    "Archon",  "Immortal",  "Colossus", "Disruptor", "Observer",  "WarpPrism",
    "Phoenix", "VoidRay",   "Oracle",   "Carrier"};

enum class ScKind : std::uint8_t { Building, Unit };

struct ScLine {
  ScKind kind = ScKind::Building;
  int id = 0;

  static ScLine building(int b) { return {ScKind::Building, b}; }
  static ScLine unit(int u) { return {ScKind::Unit, u}; }
  bool is_building() const { return kind == ScKind::Building; }
  friend bool operator==(const ScLine&, const ScLine&) = default;
};

using ScInstruction = std::vector<ScLine>;

// ---------------------------------------------------------------------------
// Well-formedness

struct Validation {
  bool ok = true;
  std::size_t first_bad = 0;  // meaningful only when !ok
  explicit operator bool() const { return ok; }
};

inline Validation validate(std::span<const CfLine> lines) {
  if (lines.empty()) return {false, 0};
  struct Open {
    LineKind kind;  // If, Else or While
    std::size_t line;
  };
  std::vector<Open> stack;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const CfLine& line = lines[i];
    switch (line.kind) {
      case LineKind::Subtask:
        break;
      case LineKind::If:
      case LineKind::While:
        if (line.condition.lhs == line.condition.rhs) return {false, i};
        stack.push_back({line.kind, i});
        break;
      case LineKind::Else:
        if (stack.empty() || stack.back().kind != LineKind::If) return {false, i};
        stack.back().kind = LineKind::Else;
        break;
      case LineKind::EndIf:
        if (stack.empty() || stack.back().kind == LineKind::While) return {false, i};
        stack.pop_back();
        break;
      case LineKind::EndWhile:
        if (stack.empty() || stack.back().kind != LineKind::While) return {false, i};
        stack.pop_back();
        break;
    }
  }
  if (!stack.empty()) return {false, stack.front().line};
  return {};
}

inline Validation validate(std::span<const ScLine> lines) {
  if (lines.empty()) return {false, 0};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int limit = lines[i].is_building() ? kNumBuildings : kNumUnits;
    if (lines[i].id < 0 || lines[i].id >= limit) return {false, i};
  }
  return {};
}

// Deepest If/While nesting reached anywhere in the instruction.
inline std::size_t nesting_depth(std::span<const CfLine> lines) {
  std::size_t depth = 0, deepest = 0;
  for (const CfLine& l : lines) {
    if (l.has_condition()) deepest = std::max(deepest, ++depth);
    if ((l.kind == LineKind::EndIf || l.kind == LineKind::EndWhile) && depth > 0) --depth;
  }
  return deepest;
}

// ---------------------------------------------------------------------------
// Text format

inline constexpr std::array<std::string_view, 3> kVerbNames{"mine", "sell", "inspect"};
inline constexpr std::array<std::string_view, 3> kResourceNames{"iron", "gold", "wood"};
inline constexpr std::array<std::string_view, 4> kComparandNames{"iron", "gold", "wood",
                                                                 "merchants"};

inline std::string to_string(Verb v) { return std::string(kVerbNames[index_of(v)]); }
inline std::string to_string(Resource r) { return std::string(kResourceNames[index_of(r)]); }
inline std::string to_string(Comparand c) { return std::string(kComparandNames[index_of(c)]); }

inline std::string to_string(const Subtask& s) { return to_string(s.verb) + " " + to_string(s.target); }

inline std::string to_string(const Condition& c) {
  return "more " + to_string(c.lhs) + " than " + to_string(c.rhs);
}

inline std::string to_string(const CfLine& line) {
  switch (line.kind) {
    case LineKind::Subtask: return to_string(line.subtask);
    case LineKind::If: return "if " + to_string(line.condition);
    case LineKind::Else: return "else";
    case LineKind::EndIf: return "endif";
    case LineKind::While: return "while " + to_string(line.condition);
    case LineKind::EndWhile: return "endwhile";
  }
  return {};
}

inline std::string to_string(const ScLine& line) {
  if (line.is_building()) return "Build " + std::string(kBuildingNames.at(line.id));
  return "Train " + std::string(kUnitNames.at(line.id));
}

namespace detail {

inline std::vector<std::string> lower_words(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lowered);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace detail

// pickup and transform are accepted for mine and sell.
inline Verb parse_verb(std::string_view word) {
  const std::string w = detail::lower(word);
  if (w == "mine" || w == "pickup") return Verb::Mine;
  if (w == "sell" || w == "transform") return Verb::Sell;
  if (w == "inspect") return Verb::Inspect;
  throw ParseError("unknown verb '" + std::string(word) + "'");
}

inline Resource parse_resource(std::string_view word) {
  const std::string w = detail::lower(word);
  for (Resource r : kResources)
    if (w == kResourceNames[index_of(r)]) return r;
  throw ParseError("unknown resource '" + std::string(word) + "'");
}

inline Comparand parse_comparand(std::string_view word) {
  const std::string w = detail::lower(word);
  if (w == "merchant" || w == "merchants") return Comparand::Merchant;
  for (Resource r : kResources)
    if (w == kResourceNames[index_of(r)]) return as_comparand(r);
  throw ParseError("unknown comparand '" + std::string(word) + "'");
}

inline CfLine parse_cf_line(std::string_view text) {
  const auto w = detail::lower_words(text);
  if (w.size() == 1) {
    if (w[0] == "else") return CfLine::else_();
    if (w[0] == "endif") return CfLine::end_if();
    if (w[0] == "endwhile") return CfLine::end_while();
  }
  if (w.size() == 2) return CfLine::task(parse_verb(w[0]), parse_resource(w[1]));
  if (w.size() == 5 && (w[0] == "if" || w[0] == "while") && w[1] == "more" && w[3] == "than") {
    const Condition c{parse_comparand(w[2]), parse_comparand(w[4])};
    if (c.lhs == c.rhs) throw ParseError("condition compares '" + w[2] + "' with itself");
    return w[0] == "if" ? CfLine::if_(c) : CfLine::while_(c);
  }
  throw ParseError("cannot parse line '" + std::string(text) + "'");
}

inline ScLine parse_sc_line(std::string_view text) {
  const auto w = detail::lower_words(text);
  if (w.size() != 2) throw ParseError("cannot parse line '" + std::string(text) + "'");
  if (w[0] == "build") {
    for (int b = 0; b < kNumBuildings; ++b)
      if (detail::lower(kBuildingNames[b]) == w[1]) return ScLine::building(b);
    throw ParseError("unknown building '" + w[1] + "'");
  }
  if (w[0] == "train") {
    for (int u = 0; u < kNumUnits; ++u)
      if (detail::lower(kUnitNames[u]) == w[1]) return ScLine::unit(u);
    throw ParseError("unknown unit '" + w[1] + "'");
  }
  throw ParseError("cannot parse line '" + std::string(text) + "'");
}

template <class Line>
std::vector<std::string> to_text(std::span<const Line> lines) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const Line& l : lines) out.push_back(to_string(l));
  return out;
}
inline std::vector<std::string> to_text(const CfInstruction& i) { return to_text<CfLine>(i); }
inline std::vector<std::string> to_text(const ScInstruction& i) { return to_text<ScLine>(i); }

// ---------------------------------------------------------------------------
// Integer encodings (tables in the header comment)

using Triple = std::array<int, 3>;

inline Triple encode(const CfLine& line) {
  switch (line.kind) {
    case LineKind::Subtask:
      return {0, index_of(line.subtask.verb), index_of(line.subtask.target)};
    case LineKind::If:
    case LineKind::While:
      return {line.kind == LineKind::If ? 1 : 4, 0,
              4 * index_of(line.condition.lhs) + index_of(line.condition.rhs)};
    case LineKind::Else: return {2, 0, 0};
    case LineKind::EndIf: return {3, 0, 0};
    case LineKind::EndWhile: return {5, 0, 0};
  }
  return {};
}

inline CfLine decode_cf(const Triple& t) {
  const auto bad = [&] {
    return DecodeError("unknown symbol triple [" + std::to_string(t[0]) + "," +
                       std::to_string(t[1]) + "," + std::to_string(t[2]) + "]");
  };
  switch (t[0]) {
    case 0:
      if (t[1] < 0 || t[1] > 2 || t[2] < 0 || t[2] > 2) throw bad();
      return CfLine::task(static_cast<Verb>(t[1]), static_cast<Resource>(t[2]));
    case 1:
    case 4: {
      if (t[1] != 0 || t[2] < 0 || t[2] > 15) throw bad();
      const Condition c{static_cast<Comparand>(t[2] / 4), static_cast<Comparand>(t[2] % 4)};
      if (c.lhs == c.rhs) throw bad();
      return t[0] == 1 ? CfLine::if_(c) : CfLine::while_(c);
    }
    case 2:
    case 3:
    case 5:
      if (t[1] != 0 || t[2] != 0) throw bad();
      return t[0] == 2 ? CfLine::else_() : t[0] == 3 ? CfLine::end_if() : CfLine::end_while();
    default:
      throw bad();
  }
}

inline int encode(const ScLine& line) { return line.is_building() ? line.id : kNumBuildings + line.id; }

inline ScLine decode_sc(int symbol) {
  if (symbol >= 0 && symbol < kNumBuildings) return ScLine::building(symbol);
  if (symbol >= kNumBuildings && symbol < kNumBuildings + kNumUnits)
    return ScLine::unit(symbol - kNumBuildings);
  throw DecodeError("unknown symbol " + std::to_string(symbol));
}

inline std::vector<Triple> encode(std::span<const CfLine> lines) {
  std::vector<Triple> out;
  out.reserve(lines.size());
  for (const CfLine& l : lines) out.push_back(encode(l));
  return out;
}
inline std::vector<Triple> encode(const CfInstruction& i) { return encode(std::span<const CfLine>(i)); }

inline std::vector<int> encode(std::span<const ScLine> lines) {
  std::vector<int> out;
  out.reserve(lines.size());
  for (const ScLine& l : lines) out.push_back(encode(l));
  return out;
}
inline std::vector<int> encode(const ScInstruction& i) { return encode(std::span<const ScLine>(i)); }

inline CfInstruction decode_cf(std::span<const Triple> symbols) {
  CfInstruction out;
  out.reserve(symbols.size());
  for (const Triple& t : symbols) out.push_back(decode_cf(t));
  return out;
}

inline ScInstruction decode_sc(std::span<const int> symbols) {
  ScInstruction out;
  out.reserve(symbols.size());
  for (int s : symbols) out.push_back(decode_sc(s));
  return out;
}

}  // namespace flowsim
