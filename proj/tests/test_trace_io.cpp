#include <gtest/gtest.h>

#include <sstream>

#include "flowsim/trace_io.hpp"

using namespace flowsim;
using namespace flowsim::harness;
using flowsim::io::json;

namespace {

std::string write(const EpisodeTrace& t, const PolicySpec& p) {
  std::ostringstream out;
  io::write_trace(out, t, p);
  return out.str();
}

io::ParsedTrace read(const std::string& text) {
  std::istringstream in(text);
  return io::read_trace(in);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + '\n';
  return s;
}

}  // namespace

TEST(Trace, RoundTripBothDomains) {
  for (const DomainConfig& config : {DomainConfig{MinecraftConfig{{3, 7}, FlowFilter::Single, {}}},
                                     DomainConfig{StarcraftConfig{{4, 9}, 3, false}}}) {
    const PolicySpec policy{"random", {}};
    const EpisodeTrace t = run_episode(config, policy, 17);
    const io::ParsedTrace p = read(write(t, policy));
    EXPECT_EQ(p.policy.kind, "random");
    EXPECT_EQ(p.trace.seed, 17u);
    EXPECT_EQ(p.trace.instruction, t.instruction);
    EXPECT_EQ(p.trace.outcome, t.outcome);
    ASSERT_EQ(p.trace.steps.size(), t.steps.size());
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      EXPECT_EQ(p.trace.steps[i].actions, t.steps[i].actions);
      EXPECT_EQ(p.trace.steps[i].digest, t.steps[i].digest);
      EXPECT_EQ(p.trace.steps[i].event, t.steps[i].event);
      EXPECT_EQ(p.trace.steps[i].resolution, t.steps[i].resolution);
    }
    EXPECT_EQ(io::config_json(p.trace.config), io::config_json(config));
    // Writing the parsed trace again gives the same bytes.
    EXPECT_EQ(write(p.trace, p.policy), write(t, policy));
  }
}

TEST(Trace, RecordShapes) {
  const EpisodeTrace t = run_minecraft({}, {"oracle", {}}, 4);
  const auto lines = lines_of(write(t, {"oracle", {}}));
  ASSERT_EQ(lines.size(), t.steps.size() + 2);
  const json header = json::parse(lines.front());
  EXPECT_EQ(header["v"], 1);
  EXPECT_EQ(header["type"], "header");
  EXPECT_EQ(header["domain"], "minecraft");
  EXPECT_EQ(header["encoding"].size(), t.instruction.size());
  const json step = json::parse(lines[1]);
  for (const char* key : {"t", "actions", "event", "pc", "reward", "done", "cause", "digest"})
    EXPECT_TRUE(step.contains(key)) << key;
  const json end = json::parse(lines.back());
  EXPECT_EQ(end["type"], "end");
  EXPECT_EQ(end["total_reward"], 1);
}

TEST(Replay, ReproducesRecordedEpisodes) {
  for (const DomainConfig& config : {DomainConfig{MinecraftConfig{}}, DomainConfig{StarcraftConfig{}}})
    for (const char* kind : {"oracle", "random"})
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const EpisodeTrace t = run_episode(config, {kind, {}}, seed);
        const io::ReplayResult r = io::replay(read(write(t, {kind, {}})).trace);
        EXPECT_TRUE(r.ok) << r.message;
        EXPECT_NE(r.frames.find("t=0\n"), std::string::npos);
      }
}

TEST(Replay, DetectsTampering) {
  const EpisodeTrace t = run_minecraft({}, {"oracle", {}}, 8);
  auto lines = lines_of(write(t, {"oracle", {}}));
  json step = json::parse(lines[1]);
  step["digest"] = "0000000000000000";
  lines[1] = step.dump();
  const io::ReplayResult r = io::replay(read(join(lines)).trace);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.message.find("digest mismatch at step 1"), std::string::npos);

  auto other = lines_of(write(t, {"oracle", {}}));
  json header = json::parse(other[0]);
  header["seed"] = 9;
  other[0] = header.dump();
  EXPECT_FALSE(io::replay(read(join(other)).trace).ok);
}

TEST(Parse, LineNumberedErrors) {
  const EpisodeTrace t = run_minecraft({}, {"oracle", {}}, 8);
  auto lines = lines_of(write(t, {"oracle", {}}));
  auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      read(text);
      ADD_FAILURE() << "no error";
    } catch (const io::TraceParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
      EXPECT_EQ(std::string(e.what()).rfind("line " + std::to_string(line) + ": ", 0), 0u);
    }
  };
  auto corrupt = lines;
  corrupt[1] = "{not json";
  expect_line(join(corrupt), 2);
  auto version = lines;
  version[1].replace(version[1].find("\"v\":1"), 5, "\"v\":2");
  expect_line(join(version), 2);
  auto reward = lines;
  json s = json::parse(reward[1]);
  s["reward"] = 5;
  reward[1] = s.dump();
  expect_line(join(reward), 2);
  expect_line(join({lines[1]}), 1);  // no header
  auto truncated = lines;
  truncated.pop_back();
  expect_line(join(truncated), truncated.size());
  expect_line("", 0);
}

TEST(Parse, MultipleEpisodes) {
  std::string text;
  for (std::uint64_t s : {1u, 2u, 3u}) text += write(run_minecraft({}, {"oracle", {}}, s), {"oracle", {}});
  std::istringstream in(text);
  const auto all = io::read_traces(in);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[2].trace.seed, 3u);
}

TEST(Snapshot, MinecraftRoundTrip) {
  Streams streams(5);
  const auto setup = setup_minecraft({}, 5, streams);
  const json j = io::snapshot(setup.world);
  EXPECT_EQ(j["grid"].size(), 6u);
  const minecraft::World back = io::minecraft_from_snapshot(j);
  EXPECT_EQ(minecraft::canonical_state(back), minecraft::canonical_state(setup.world));
  EXPECT_EQ(back.instruction, setup.world.instruction);
  json bad = j;
  bad["grid"][0] = "xxxxxx";
  EXPECT_THROW(io::minecraft_from_snapshot(bad), std::invalid_argument);
}

TEST(Snapshot, StarcraftRoundTripAndHiddenTree) {
  Streams streams(6);
  const auto setup = setup_starcraft({}, 6, streams);
  const json hidden = io::snapshot(setup.world);
  EXPECT_TRUE(hidden["tree"]["hidden"].get<bool>());
  EXPECT_FALSE(hidden["tree"].contains("producer"));
  const starcraft::World a = io::starcraft_from_snapshot(hidden);
  EXPECT_EQ(starcraft::canonical_state(a), starcraft::canonical_state(setup.world));
  const starcraft::World b = io::starcraft_from_snapshot(io::snapshot(setup.world, true));
  EXPECT_EQ(b.tree, setup.world.tree);
  EXPECT_EQ(b.instruction, setup.world.instruction);
}

TEST(Config, JsonRoundTrip) {
  MinecraftConfig mc{{2, 9}, FlowFilter::Multi, {}};
  EXPECT_EQ(io::config_json(io::config_from_json("minecraft", io::config_json(mc))), io::config_json(mc));
  mc.longjump_block = 12;
  EXPECT_EQ(io::config_json(io::config_from_json("minecraft", io::config_json(mc))), io::config_json(mc));
  const StarcraftConfig sc{{3, 4}, 2, false};
  EXPECT_EQ(io::config_json(io::config_from_json("starcraft", io::config_json(sc))), io::config_json(sc));
  EXPECT_THROW(io::config_from_json("chess", json::object()), std::invalid_argument);
  EXPECT_THROW(io::parse_flow("both"), std::invalid_argument);
}

TEST(Instruction, RecordCarriesEncoding) {
  const CfInstruction i{CfLine::task(Verb::Mine, Resource::Iron)};
  const json r = io::instruction_record(i);
  EXPECT_EQ(r["domain"], "minecraft");
  EXPECT_EQ(r["encoding"], json::parse("[[0,0,0]]"));
}
