#include <gtest/gtest.h>

#include <cmath>

#include "flowsim/generators.hpp"
#include "flowsim/policies.hpp"
#include "flowsim/starcraft.hpp"

using namespace flowsim;
using namespace flowsim::starcraft;

namespace {

// Nexus at cell 0, probes on it; unit 0 from the Nexus, unit 1 from building 2,
// building 2 needs building 1.
World small_world() {
  World w;
  w.grid[0] = kNexus;
  w.tree.prerequisite[2] = 1;
  w.tree.producer[1] = 2;
  w.instruction = {ScLine::unit(0)};
  return w;
}

Env quiet(World w) { return Env(std::move(w), Rng(1), {false}); }

Resolution feed_all(Env& env, std::initializer_list<ActionToken> toks) {
  std::optional<StepResult> r;
  for (const auto& t : toks) {
    r = env.step_token(t);
    if (r) break;
  }
  EXPECT_TRUE(r.has_value());
  return r ? r->resolution : Resolution::NoOp;
}

}  // namespace

TEST(Shapes, EnumeratedCounts) {
  const CommandShapes n = enumerate_command_shapes();
  EXPECT_EQ(n.build, 1512);
  EXPECT_EQ(n.go_to, 108);
  EXPECT_EQ(n.train, 576);
}

TEST(Tokens, TextRoundTrip) {
  for (const ActionToken& t : {ActionToken{SelectProbe{2}}, ActionToken{SelectCoord{35}}, ActionToken{SelectBuilding{7}},
                               ActionToken{SelectUnit{15}}, ActionToken{Commit{}}})
    EXPECT_EQ(to_string(parse_token(to_string(t))), to_string(t));
  EXPECT_THROW(parse_token("probe x"), ParseError);
  EXPECT_THROW(parse_token("jump 3"), ParseError);
}

TEST(Assembly, CommitAtStartWaits) {
  Env env = quiet(small_world());
  EXPECT_EQ(feed_all(env, {Commit{}}), Resolution::Wait);
}

TEST(Assembly, IllegalChoicesAreNoOps) {
  Env env = quiet(small_world());
  EXPECT_EQ(feed_all(env, {SelectBuilding{1}}), Resolution::NoOp);         // no probe chosen
  EXPECT_EQ(feed_all(env, {SelectUnit{0}}), Resolution::NoOp);             // no coordinate chosen
  EXPECT_EQ(feed_all(env, {SelectCoord{5}}), Resolution::NoOp);            // empty cell to train from
  EXPECT_EQ(feed_all(env, {SelectProbe{0}, Commit{}}), Resolution::NoOp);  // incomplete
  EXPECT_EQ(feed_all(env, {SelectProbe{3}}), Resolution::NoOp);            // no such probe
  EXPECT_EQ(feed_all(env, {SelectCoord{0}, SelectUnit{1}}), Resolution::NoOp);  // wrong producer
  EXPECT_EQ(feed_all(env, {SelectProbe{0}, SelectBuilding{2}, SelectCoord{1}}), Resolution::NoOp);  // prereq missing
  EXPECT_EQ(feed_all(env, {SelectProbe{0}, SelectBuilding{1}, SelectCoord{0}}), Resolution::NoOp);  // occupied
  EXPECT_EQ(feed_all(env, {SelectProbe{0}, SelectProbe{1}}), Resolution::NoOp);
  EXPECT_EQ(env.world().step, 9);
}

TEST(Assembly, TrainCompletesNextStep) {
  Env env = quiet(small_world());
  const auto r0 = env.step_token(SelectCoord{0});
  EXPECT_FALSE(r0);
  const auto r = env.step_token(SelectUnit{0});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->resolution, Resolution::Train);
  EXPECT_EQ(env.world().units[0], 1);
  EXPECT_TRUE(r->done);
  EXPECT_EQ(r->reward, 1);
  EXPECT_EQ(r->cause, Cause::Success);
  EXPECT_THROW(env.step_token(Commit{}), UsageError);
}

TEST(Assembly, BuildWalksRowFirstThenBuilds) {
  World w = small_world();
  w.instruction = {ScLine::building(1), ScLine::building(2), ScLine::unit(1)};
  Env env = quiet(w);
  EXPECT_EQ(feed_all(env, {SelectProbe{0}, SelectBuilding{1}, SelectCoord{7}}), Resolution::Build);
  EXPECT_EQ(env.world().probes[0].cell, 6);  // row first
  EXPECT_EQ(env.world().grid[7], kEmpty);
  feed_all(env, {Commit{}});
  EXPECT_EQ(env.world().probes[0].cell, 7);
  EXPECT_EQ(env.world().grid[7], 1);
  EXPECT_FALSE(env.world().probes[0].task);
  EXPECT_EQ(feed_all(env, {SelectProbe{1}, SelectBuilding{2}, SelectCoord{1}}), Resolution::Build);
  EXPECT_EQ(env.world().grid[1], 2);
  EXPECT_EQ(feed_all(env, {SelectCoord{1}, SelectUnit{1}}), Resolution::Train);
  EXPECT_EQ(env.cause(), Cause::Success);
}

TEST(Assembly, GoToMovesProbe) {
  Env env = quiet(small_world());
  EXPECT_EQ(feed_all(env, {SelectProbe{2}, SelectCoord{14}}), Resolution::GoTo);
  for (int k = 0; k < 3; ++k) feed_all(env, {Commit{}});
  EXPECT_EQ(env.world().probes[2].cell, 14);
  EXPECT_EQ(env.observation().probe_idle[2], true);
}

TEST(Episode, TimeoutAtThirtyPerLine) {
  World w = small_world();
  w.instruction = {ScLine::building(1), ScLine::building(2), ScLine::unit(1)};
  Env env = quiet(w);
  int steps = 0;
  while (!env.done()) {
    env.step_token(Commit{});
    ++steps;
  }
  EXPECT_EQ(steps, 90);
  EXPECT_EQ(env.cause(), Cause::Timeout);
}

TEST(Spawn, NexusAndEndowment) {
  Rng rng(3);
  int max_buildings = 0;
  for (int k = 0; k < 2000; ++k) {
    const BuildTree tree = random_build_tree(rng);
    const World w = spawn(rng, tree);
    const auto counts = building_counts(w);
    EXPECT_EQ(counts[kNexus], 1);
    EXPECT_EQ(w.grid[w.nexus_cell], kNexus);
    int total = 0;
    for (int c : counts) total += c;
    max_buildings = std::max(max_buildings, total);
    for (const Probe& p : w.probes) EXPECT_EQ(p.cell, w.nexus_cell);
    EXPECT_LE(legal_train_count(w), 576);
  }
  EXPECT_EQ(max_buildings, kCells);
}

TEST(Disruptions, RatesAndNexusImmunity) {
  Rng rng(4), gen(5);
  World w = spawn(gen, random_build_tree(gen));
  const int n = 100000;
  int attacks = 0, ambushes = 0;
  for (int k = 0; k < n; ++k) {
    w.units.fill(3);
    for (int c = 0; c < kCells; ++c)
      if (w.grid[c] == kEmpty) w.grid[c] = 1 + c % (kNumBuildings - 1);
    const Disruption d = roll_disruptions(w, rng);
    attacks += d.attacked;
    ambushes += d.ambushed;
    EXPECT_EQ(building_counts(w)[kNexus], 1);
    if (d.attacked) {
      int removed = 0;
      for (int b : w.grid) removed += b == kEmpty;
      EXPECT_GE(removed, 1);
    }
    if (d.ambushed) {
      EXPECT_NE(w.ambush, kNone);
    }
  }
  const double sd = std::sqrt(n * 0.1 * 0.9);
  EXPECT_NEAR(attacks, n * 0.1, 4 * sd);
  EXPECT_NEAR(ambushes, n * 0.1, 4 * sd);
}

TEST(Disruptions, AmbushHitsOnlyAliveTypes) {
  Rng rng(6);
  World w;
  w.grid[0] = kNexus;
  std::array<int, kNumUnits> hits{};
  for (int k = 0; k < 20000; ++k) {
    w.units.fill(0);
    w.units[3] = w.units[9] = 1;
    const Disruption d = roll_disruptions(w, rng);
    if (d.ambushed) ++hits[w.ambush];
  }
  for (int u = 0; u < kNumUnits; ++u)
    if (u != 3 && u != 9) {
      EXPECT_EQ(hits[u], 0);
    }
  EXPECT_GT(hits[3], 800);
  EXPECT_GT(hits[9], 800);
}

TEST(Observation, HidesTreeAndShowsBuildings) {
  World w = small_world();
  w.grid[8] = 4;
  const Observation o = observe(w);
  EXPECT_EQ(building_at(o, 0), kNexus);
  EXPECT_EQ(building_at(o, 8), 4);
  EXPECT_EQ(building_at(o, 9), kEmpty);
  EXPECT_EQ(o.probes[0], 3);
  EXPECT_EQ(o.instruction, encode(w.instruction));
}

namespace {

struct Outcome {
  int success = 0, timeout = 0;
};

Outcome play_oracle(int episodes, bool disruptions, std::uint64_t seed) {
  Outcome out;
  Rng gen(seed), spawn_rng(seed + 1);
  for (int e = 0; e < episodes; ++e) {
    const BuildOrder order = gen_starcraft(gen, 1 + e % 25);
    World w;
    do w = spawn(spawn_rng, order.tree, order.instruction);
    while (!spawn_feasible(w, sc_decode(order.instruction)));
    Env env(w, Rng(seed + 100 + e), {disruptions});
    OraclePolicy oracle;
    oracle.reset(env.observation());
    while (!env.done()) {
      const auto r = env.step_token(oracle.act(env.observation()));
      if (r) {
        EXPECT_NE(r->resolution, Resolution::NoOp);
      }
    }
    out.success += env.cause() == Cause::Success;
    out.timeout += env.cause() == Cause::Timeout;
  }
  return out;
}

}  // namespace

TEST(Oracle, SolvesEveryOrderWithoutDisruptions) {
  const Outcome o = play_oracle(300, false, 10);
  EXPECT_EQ(o.success, 300);
}

TEST(Oracle, OnlyTimesOutUnderDisruptions) {
  const Outcome o = play_oracle(300, true, 20);
  EXPECT_EQ(o.success + o.timeout, 300);
  EXPECT_LT(o.timeout, 60);
}
