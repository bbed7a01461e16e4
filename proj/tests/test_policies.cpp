#include <gtest/gtest.h>

#include <set>

#include "flowsim/generators.hpp"
#include "flowsim/policies.hpp"

using namespace flowsim;
namespace mc = flowsim::minecraft;
namespace sc = flowsim::starcraft;

namespace {

mc::World open_world(std::initializer_list<const char*> program) {
  mc::World w;
  // Plenty of everything along the bottom rows.
  for (int i = 18; i < 36; ++i) w.grid[i] = static_cast<mc::Cell>(1 + i % 4);
  for (const char* l : program) w.instruction.push_back(parse_cf_line(l));
  return w;
}

// Drives an episode and returns the cause.
mc::Cause play(mc::Env& env, mc::Policy& policy) {
  policy.reset(env.observation());
  std::optional<mc::Interaction> last;
  while (!env.done()) {
    const auto r = env.step(policy.act(env.observation(), last));
    last = r.event;
  }
  return env.cause();
}

}  // namespace

TEST(MinecraftScripted, AdvancesOnCompletion) {
  mc::Env env(open_world({"mine iron", "mine gold", "sell wood"}));
  mc::ScriptedPolicy p({{Verb::Mine, Resource::Iron}, {Verb::Mine, Resource::Gold}, {Verb::Sell, Resource::Wood}});
  EXPECT_EQ(play(env, p), mc::Cause::Success);
  EXPECT_THROW(mc::ScriptedPolicy({}), std::invalid_argument);
}

TEST(MinecraftScripted, WrongOrderFails) {
  mc::Env env(open_world({"mine iron", "mine gold"}));
  mc::ScriptedPolicy p({{Verb::Mine, Resource::Gold}});
  EXPECT_EQ(play(env, p), mc::Cause::OutOfOrder);
}

TEST(MinecraftOracle, TracksControlFlow) {
  mc::Env env(open_world({"if more iron than merchant", "mine wood", "else", "mine gold", "endif",
                          "while more gold than wood", "mine gold", "endwhile", "inspect iron"}));
  mc::OraclePolicy p;
  EXPECT_EQ(play(env, p), mc::Cause::Success);
  // The final completion ends the episode before the policy sees it.
  EXPECT_EQ(p.program_counter(), 8u);
}

TEST(MinecraftRandom, DeterministicPerSeed) {
  const mc::Observation obs = mc::observe(open_world({"mine iron"}));
  mc::RandomPolicy a(Rng(9)), b(Rng(9));
  std::set<std::pair<int, int>> seen;
  for (int k = 0; k < 500; ++k) {
    const auto x = a.act(obs, std::nullopt), y = b.act(obs, std::nullopt);
    EXPECT_EQ(x, y);
    seen.insert({static_cast<int>(x.verb), static_cast<int>(x.target)});
  }
  EXPECT_EQ(seen.size(), 9u);
}

TEST(MinecraftPointerWalk, MovesOneLineAtATime) {
  // The first required line sits behind an 8-line skipped block.
  mc::World w;
  for (int i = 20; i < 30; ++i) w.grid[i] = mc::Cell::Iron;
  w.instruction.push_back(parse_cf_line("if more gold than iron"));
  for (int k = 0; k < 8; ++k) w.instruction.push_back(parse_cf_line("mine gold"));
  w.instruction.push_back(parse_cf_line("endif"));
  w.instruction.push_back(parse_cf_line("mine iron"));
  mc::PointerWalkPolicy p;
  p.reset(mc::observe(w));
  EXPECT_EQ(p.program_counter(), 10u);
  int previous = p.pointer();
  for (int k = 0; k < 12; ++k) {
    p.act(mc::observe(w), std::nullopt);
    EXPECT_LE(std::abs(p.pointer() - previous), 1);
    previous = p.pointer();
  }
  EXPECT_EQ(p.pointer(), 10);
}

TEST(MinecraftPointerWalk, DegradesOnLongSkippedBlocks) {
  Rng gen(11), spawn_rng(12);
  int short_ok = 0, long_ok = 0, tried_short = 0, tried_long = 0;
  for (int k = 0; k < 200; ++k) {
    const int block = k % 2 ? 2 : 30;
    const LongJump lj = gen_longjump(gen, block);
    const auto s = mc::spawn(spawn_rng, lj.instruction, {lj.failing.lhs, lj.failing.rhs});
    if (!s.world) continue;
    mc::Env env(*s.world);
    mc::PointerWalkPolicy p;
    const bool ok = play(env, p) == mc::Cause::Success;
    (block == 2 ? short_ok : long_ok) += ok;
    (block == 2 ? tried_short : tried_long) += 1;
  }
  ASSERT_GT(tried_short, 50);
  ASSERT_GT(tried_long, 50);
  EXPECT_GT(static_cast<double>(short_ok) / tried_short, static_cast<double>(long_ok) / tried_long);
}

TEST(MinecraftScanPointer, JumpsStraightToTheRequiredLine) {
  Rng gen(13), spawn_rng(14);
  int ok = 0, tried = 0;
  for (int k = 0; k < 100; ++k) {
    const LongJump lj = gen_longjump(gen, 1 + k % 40);
    const auto s = mc::spawn(spawn_rng, lj.instruction, {lj.failing.lhs, lj.failing.rhs});
    if (!s.world) continue;
    mc::Env env(*s.world);
    mc::ScanPointerPolicy p{Rng(static_cast<std::uint64_t>(k))};
    ok += play(env, p) == mc::Cause::Success;
    ++tried;
  }
  ASSERT_GT(tried, 50);
  EXPECT_EQ(ok, tried);
}

TEST(StarcraftScripted, PlaysThenCommits) {
  sc::ScriptedPolicy p({sc::SelectProbe{1}, sc::SelectCoord{3}});
  sc::Observation obs;
  p.reset(obs);
  EXPECT_EQ(sc::to_string(p.act(obs)), "probe 1");
  EXPECT_EQ(sc::to_string(p.act(obs)), "coord 3");
  EXPECT_EQ(sc::to_string(p.act(obs)), "commit");
  EXPECT_EQ(sc::to_string(p.act(obs)), "commit");
}

TEST(StarcraftRandom, CoversEveryTokenKind) {
  sc::RandomPolicy p(Rng(15));
  sc::Observation obs;
  std::array<int, 5> kinds{};
  for (int k = 0; k < 5000; ++k) ++kinds[p.act(obs).index()];
  for (int n : kinds) EXPECT_NEAR(n, 1000, 150);
}
