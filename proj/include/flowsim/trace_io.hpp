#pragma once

// JSON forms: world snapshots, JSON-lines episode traces (v1) and replay.
//
// Trace file, one JSON object per line:
//   {"v":1,"type":"header","domain","seed","policy","config","instruction","encoding","initial_digest"}
//   {"v":1,"type":"step","t","actions","reward","done","cause","digest", ...}
//       Minecraft steps add "event" (completed interaction or null) and "pc";
//       StarCraft steps add "resolution", "attacked", "ambushed".
//   {"v":1,"type":"end","outcome","steps","total_reward"}

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsim/harness.hpp"
#include "flowsim/instruction.hpp"
#include "flowsim/minecraft.hpp"
#include "flowsim/starcraft.hpp"

namespace flowsim::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// Instructions

inline json encoding_json(const CfInstruction& i) {
  json out = json::array();
  for (const Triple& t : encode(i)) out.push_back(t);
  return out;
}
inline json encoding_json(const ScInstruction& i) { return encode(i); }

inline json instruction_record(const CfInstruction& i) {
  return {{"v", kFormatVersion}, {"domain", "minecraft"}, {"text", to_text(i)}, {"encoding", encoding_json(i)}};
}
inline json instruction_record(const ScInstruction& i) {
  return {{"v", kFormatVersion}, {"domain", "starcraft"}, {"text", to_text(i)}, {"encoding", encoding_json(i)}};
}

// ---------------------------------------------------------------------------
// Configs

inline std::string to_string(FlowFilter f) {
  switch (f) {
    case FlowFilter::Any: return "any";
    case FlowFilter::Single: return "single";
    case FlowFilter::Multi: return "multi";
  }
  return "any";
}

inline FlowFilter parse_flow(const std::string& s) {
  if (s == "any") return FlowFilter::Any;
  if (s == "single") return FlowFilter::Single;
  if (s == "multi") return FlowFilter::Multi;
  throw std::invalid_argument("unknown flow filter '" + s + "'");
}

inline json config_json(const harness::DomainConfig& config) {
  if (const auto* mc = std::get_if<harness::MinecraftConfig>(&config)) {
    json j{{"min_len", mc->lengths.lo}, {"max_len", mc->lengths.hi}, {"flow", to_string(mc->flow)}};
    j["longjump_block"] = mc->longjump_block ? json(*mc->longjump_block) : json(nullptr);
    return j;
  }
  const auto& sc = std::get<harness::StarcraftConfig>(config);
  json j{{"min_len", sc.lengths.lo}, {"max_len", sc.lengths.hi}, {"disruptions", sc.disruptions}};
  j["max_depth"] = sc.max_depth ? json(*sc.max_depth) : json(nullptr);
  return j;
}

inline harness::DomainConfig config_from_json(const std::string& domain, const json& j) {
  if (domain == "minecraft") {
    harness::MinecraftConfig c;
    c.lengths = {j.at("min_len").get<std::size_t>(), j.at("max_len").get<std::size_t>()};
    c.flow = parse_flow(j.at("flow").get<std::string>());
    if (!j.at("longjump_block").is_null()) c.longjump_block = j.at("longjump_block").get<int>();
    return c;
  }
  if (domain == "starcraft") {
    harness::StarcraftConfig c;
    c.lengths = {j.at("min_len").get<std::size_t>(), j.at("max_len").get<std::size_t>()};
    c.disruptions = j.at("disruptions").get<bool>();
    if (!j.at("max_depth").is_null()) c.max_depth = j.at("max_depth").get<int>();
    return c;
  }
  throw std::invalid_argument("unknown domain '" + domain + "'");
}

// ---------------------------------------------------------------------------
// Snapshots

inline json snapshot(const minecraft::World& w) {
  json grid = json::array();
  for (int r = 0; r < minecraft::kSide; ++r) {
    std::string row;
    for (int c = 0; c < minecraft::kSide; ++c) row += minecraft::glyph(w.grid[r * minecraft::kSide + c]);
    grid.push_back(row);
  }
  return {{"v", kFormatVersion},   {"domain", "minecraft"}, {"grid", grid},
          {"worker", w.worker},    {"inventory", w.inventory}, {"step", w.step},
          {"seed", w.seed},        {"instruction", to_text(w.instruction)}};
}

inline minecraft::World minecraft_from_snapshot(const json& j) {
  constexpr std::string_view kGlyphs = ".igwm#~";
  minecraft::World w;
  const auto& grid = j.at("grid");
  if (grid.size() != minecraft::kSide) throw std::invalid_argument("snapshot: grid needs 6 rows");
  for (int r = 0; r < minecraft::kSide; ++r) {
    const auto row = grid[static_cast<std::size_t>(r)].get<std::string>();
    if (row.size() != minecraft::kSide) throw std::invalid_argument("snapshot: grid rows need 6 cells");
    for (int c = 0; c < minecraft::kSide; ++c) {
      const auto k = kGlyphs.find(row[static_cast<std::size_t>(c)]);
      if (k == std::string_view::npos) throw std::invalid_argument("snapshot: unknown cell glyph");
      w.grid[r * minecraft::kSide + c] = static_cast<minecraft::Cell>(k);
    }
  }
  w.worker = j.at("worker").get<int>();
  if (w.worker < 0 || w.worker >= minecraft::kCells) throw std::invalid_argument("snapshot: worker off the grid");
  w.inventory = j.at("inventory").get<std::array<int, 3>>();
  w.step = j.at("step").get<int>();
  w.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& line : j.at("instruction")) w.instruction.push_back(parse_cf_line(line.get<std::string>()));
  return w;
}

// The build tree is hidden from agents; it is written only on request.
inline json snapshot(const starcraft::World& w, bool include_tree = false) {
  json probes = json::array();
  for (const starcraft::Probe& p : w.probes) {
    json jp{{"cell", p.cell}};
    jp["task"] = p.task ? json{{"destination", p.task->destination}, {"building", p.task->building}} : json(nullptr);
    probes.push_back(jp);
  }
  json tree{{"hidden", !include_tree}};
  if (include_tree) {
    tree["prerequisite"] = w.tree.prerequisite;
    tree["producer"] = w.tree.producer;
  }
  return {{"v", kFormatVersion}, {"domain", "starcraft"}, {"grid", w.grid},   {"probes", probes},
          {"units", w.units},    {"tree", tree},          {"ambush", w.ambush}, {"step", w.step},
          {"seed", w.seed},      {"nexus_cell", w.nexus_cell}, {"instruction", to_text(w.instruction)}};
}

inline starcraft::World starcraft_from_snapshot(const json& j) {
  starcraft::World w;
  w.grid = j.at("grid").get<std::array<int, starcraft::kCells>>();
  for (int b : w.grid)
    if (b < starcraft::kEmpty || b >= kNumBuildings) throw std::invalid_argument("snapshot: bad building id");
  const auto& probes = j.at("probes");
  if (probes.size() != starcraft::kProbes) throw std::invalid_argument("snapshot: need 3 probes");
  for (std::size_t p = 0; p < probes.size(); ++p) {
    w.probes[p].cell = probes[p].at("cell").get<int>();
    if (!probes[p].at("task").is_null())
      w.probes[p].task = starcraft::ProbeTask{probes[p]["task"].at("destination").get<int>(),
                                              probes[p]["task"].at("building").get<int>()};
  }
  w.units = j.at("units").get<std::array<int, kNumUnits>>();
  const auto& tree = j.at("tree");
  if (!tree.at("hidden").get<bool>()) {
    w.tree.prerequisite = tree.at("prerequisite").get<std::array<int, kNumBuildings>>();
    w.tree.producer = tree.at("producer").get<std::array<int, kNumUnits>>();
  }
  w.ambush = j.at("ambush").get<int>();
  w.step = j.at("step").get<int>();
  w.seed = j.at("seed").get<std::uint64_t>();
  w.nexus_cell = j.at("nexus_cell").get<int>();
  for (const auto& line : j.at("instruction")) w.instruction.push_back(parse_sc_line(line.get<std::string>()));
  return w;
}

// ---------------------------------------------------------------------------
// Traces

inline json encoding_from_text(const std::string& domain, const std::vector<std::string>& text) {
  if (domain == "minecraft") {
    CfInstruction i;
    for (const auto& l : text) i.push_back(parse_cf_line(l));
    return encoding_json(i);
  }
  ScInstruction i;
  for (const auto& l : text) i.push_back(parse_sc_line(l));
  return encoding_json(i);
}

inline json policy_json(const harness::PolicySpec& p) { return {{"kind", p.kind}, {"script", p.script}}; }

inline void write_trace(std::ostream& out, const harness::EpisodeTrace& trace, const harness::PolicySpec& policy) {
  const std::string domain = trace.domain();
  const bool mc = domain == "minecraft";
  json header{{"v", kFormatVersion},
              {"type", "header"},
              {"domain", domain},
              {"seed", trace.seed},
              {"policy", policy_json(policy)},
              {"config", config_json(trace.config)},
              {"instruction", trace.instruction},
              {"encoding", encoding_from_text(domain, trace.instruction)},
              {"initial_digest", trace.initial_digest}};
  out << header.dump() << '\n';
  for (const harness::StepRecord& s : trace.steps) {
    json j{{"v", kFormatVersion}, {"type", "step"}, {"t", s.t}, {"actions", s.actions}};
    if (mc) {
      j["event"] = s.event ? json(*s.event) : json(nullptr);
      j["pc"] = s.pc ? json(*s.pc) : json(nullptr);
    } else {
      j["resolution"] = s.resolution.value_or("");
      j["attacked"] = s.attacked;
      j["ambushed"] = s.ambushed;
    }
    j["reward"] = s.reward;
    j["done"] = s.done;
    j["cause"] = s.cause;
    j["digest"] = s.digest;
    out << j.dump() << '\n';
  }
  json end{{"v", kFormatVersion},
           {"type", "end"},
           {"outcome", trace.outcome},
           {"steps", trace.steps.size()},
           {"total_reward", trace.total_reward()}};
  out << end.dump() << '\n';
}

struct ParsedTrace {
  harness::EpisodeTrace trace;
  harness::PolicySpec policy;
};

// One or more episodes, each a header, its steps and an end record.
inline std::vector<ParsedTrace> read_traces(std::istream& in) {
  std::vector<ParsedTrace> all;
  ParsedTrace cur;
  std::string text;
  std::size_t line_no = 0;
  bool open = false;
  std::string domain;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw TraceParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (!j.is_object()) throw TraceParseError(line_no, "record is not an object");
      if (j.value("v", 0) != kFormatVersion) throw TraceParseError(line_no, "unsupported format version");
      const std::string type = j.at("type").get<std::string>();
      if (!open) {
        if (type != "header") throw TraceParseError(line_no, "expected a header record");
        cur = ParsedTrace{};
        domain = j.at("domain").get<std::string>();
        cur.trace.seed = j.at("seed").get<std::uint64_t>();
        cur.trace.config = config_from_json(domain, j.at("config"));
        cur.trace.instruction = j.at("instruction").get<std::vector<std::string>>();
        cur.trace.initial_digest = j.at("initial_digest").get<std::string>();
        cur.policy.kind = j.at("policy").at("kind").get<std::string>();
        cur.policy.script = j.at("policy").at("script").get<std::vector<std::string>>();
        open = true;
      } else if (type == "step") {
        harness::StepRecord s;
        s.t = j.at("t").get<int>();
        s.actions = j.at("actions").get<std::vector<std::string>>();
        if (s.actions.empty()) throw TraceParseError(line_no, "step without actions");
        if (domain == "minecraft") {
          if (!j.at("event").is_null()) s.event = j["event"].get<std::string>();
          if (!j.at("pc").is_null()) s.pc = j["pc"].get<std::size_t>();
        } else {
          s.resolution = j.at("resolution").get<std::string>();
          s.attacked = j.at("attacked").get<bool>();
          s.ambushed = j.at("ambushed").get<bool>();
        }
        s.reward = j.at("reward").get<int>();
        if (s.reward != 0 && s.reward != 1) throw TraceParseError(line_no, "reward must be 0 or 1");
        s.done = j.at("done").get<bool>();
        s.cause = j.at("cause").get<std::string>();
        s.digest = j.at("digest").get<std::string>();
        cur.trace.steps.push_back(std::move(s));
      } else if (type == "end") {
        cur.trace.outcome = j.at("outcome").get<std::string>();
        if (j.at("steps").get<std::size_t>() != cur.trace.steps.size())
          throw TraceParseError(line_no, "step count does not match the records");
        all.push_back(std::move(cur));
        open = false;
      } else {
        throw TraceParseError(line_no, "unexpected record type '" + type + "'");
      }
    } catch (const TraceParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw TraceParseError(line_no, e.what());
    }
  }
  if (open) throw TraceParseError(line_no, "missing end record");
  if (all.empty()) throw TraceParseError(line_no, "empty trace");
  return all;
}

inline ParsedTrace read_trace(std::istream& in) { return read_traces(in).front(); }

// ---------------------------------------------------------------------------
// Replay

struct ReplayResult {
  bool ok = true;
  std::string message;  // first mismatch, when !ok
  std::string frames;   // ASCII frame per step
};

// Rebuilds the episode from the header seed and config, feeds the recorded
// actions and compares every digest.
inline ReplayResult replay(const harness::EpisodeTrace& trace) {
  ReplayResult out;
  std::ostringstream frames;
  harness::Streams streams(trace.seed);
  auto fail = [&](const std::string& why) {
    out.ok = false;
    out.message = why;
    out.frames = frames.str();
    return out;
  };
  if (const auto* mc = std::get_if<harness::MinecraftConfig>(&trace.config)) {
    auto setup = harness::setup_minecraft(*mc, trace.seed, streams);
    if (to_text(setup.world.instruction) != trace.instruction) return fail("instruction differs from the header");
    minecraft::Env env(std::move(setup.world));
    if (harness::digest(minecraft::canonical_state(env.world())) != trace.initial_digest)
      return fail("initial state differs");
    frames << "t=0\n" << minecraft::render(env.world());
    for (const auto& s : trace.steps) {
      if (env.done()) return fail("step " + std::to_string(s.t) + " recorded after the episode ended");
      const CfLine cmd = parse_cf_line(s.actions.at(0));
      if (!cmd.is_subtask()) return fail("step " + std::to_string(s.t) + ": not a command");
      const auto r = env.step(cmd.subtask);
      frames << "t=" << env.world().step << " cmd=" << s.actions[0] << " reward=" << r.reward
             << " cause=" << minecraft::to_string(r.cause) << '\n'
             << minecraft::render(env.world());
      if (harness::digest(minecraft::canonical_state(env.world())) != s.digest)
        return fail("digest mismatch at step " + std::to_string(s.t));
    }
    if (minecraft::to_string(env.cause()) != trace.outcome) return fail("outcome differs");
  } else {
    const auto& sc = std::get<harness::StarcraftConfig>(trace.config);
    auto setup = harness::setup_starcraft(sc, trace.seed, streams);
    if (to_text(setup.world.instruction) != trace.instruction) return fail("instruction differs from the header");
    starcraft::Env env(std::move(setup.world), streams.disruptions, {sc.disruptions});
    if (harness::digest(starcraft::canonical_state(env.world())) != trace.initial_digest)
      return fail("initial state differs");
    frames << "t=0\n" << starcraft::render(env.world());
    for (const auto& s : trace.steps) {
      if (env.done()) return fail("step " + std::to_string(s.t) + " recorded after the episode ended");
      std::optional<starcraft::StepResult> r;
      for (std::size_t k = 0; k < s.actions.size(); ++k) {
        if (r) return fail("step " + std::to_string(s.t) + ": tokens after the command resolved");
        r = env.step_token(starcraft::parse_token(s.actions[k]));
      }
      if (!r) return fail("step " + std::to_string(s.t) + ": command never resolved");
      std::string joined;
      for (const auto& a : s.actions) joined += (joined.empty() ? "" : "; ") + a;
      frames << "t=" << env.world().step << " tokens=[" << joined << "] " << starcraft::to_string(r->resolution)
             << " reward=" << r->reward << " cause=" << starcraft::to_string(r->cause) << '\n'
             << starcraft::render(env.world());
      if (harness::digest(starcraft::canonical_state(env.world())) != s.digest)
        return fail("digest mismatch at step " + std::to_string(s.t));
    }
    if (starcraft::to_string(env.cause()) != trace.outcome) return fail("outcome differs");
  }
  out.frames = frames.str();
  return out;
}

}  // namespace flowsim::io
