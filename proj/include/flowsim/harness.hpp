#pragma once

// Episode orchestration: seeded setup, rollout with any policy, the failure
// buffer, binned evaluation and the long-jump sweep.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "flowsim/generators.hpp"
#include "flowsim/instruction.hpp"
#include "flowsim/minecraft.hpp"
#include "flowsim/policies.hpp"
#include "flowsim/rng.hpp"
#include "flowsim/starcraft.hpp"

namespace flowsim::harness {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kRegenerationCap = 1000;
inline constexpr int kStarcraftSpawnResamples = 50;

struct MinecraftConfig {
  LengthRange lengths{1, 10};
  FlowFilter flow = FlowFilter::Any;
  // Set: long-jump episodes with this failing-block length instead of
  // generated instructions.
  std::optional<int> longjump_block;
};

struct StarcraftConfig {
  LengthRange lengths{1, 25};
  std::optional<int> max_depth;
  bool disruptions = true;
};

using DomainConfig = std::variant<MinecraftConfig, StarcraftConfig>;

inline std::string domain_name(const DomainConfig& c) {
  return std::holds_alternative<MinecraftConfig>(c) ? "minecraft" : "starcraft";
}

// ---------------------------------------------------------------------------
// Seeded setup

struct Streams {
  Rng generation;
  Rng spawn;
  Rng disruptions;
  Rng policy;

  explicit Streams(std::uint64_t seed)
      : generation(substream_seed(seed, "generation")),
        spawn(substream_seed(seed, "spawn")),
        disruptions(substream_seed(seed, "disruptions")),
        policy(substream_seed(seed, "policy")) {}
};

struct MinecraftSetup {
  minecraft::World world;
  minecraft::SpawnStats spawn_stats;
  int regenerations = 0;
};

inline MinecraftSetup setup_minecraft(const MinecraftConfig& config, std::uint64_t seed, Streams& streams) {
  if (config.longjump_block && (*config.longjump_block < 1 || *config.longjump_block > kMaxLongJumpBlock))
    throw std::invalid_argument("longjump block length must be in 1.." + std::to_string(kMaxLongJumpBlock));
  for (int regen = 0; regen < kRegenerationCap; ++regen) {
    CfInstruction instr;
    minecraft::SpawnOptions options;
    if (config.longjump_block) {
      LongJump lj = gen_longjump(streams.generation, *config.longjump_block);
      instr = std::move(lj.instruction);
      options.excluded = lj.failing.lhs;
      options.required = lj.failing.rhs;
    } else {
      auto drawn = gen_minecraft(streams.generation, config.lengths, config.flow);
      if (!drawn) throw GenerationError("no instruction passes the flow filter");
      instr = std::move(*drawn);
    }
    minecraft::SpawnResult spawned = minecraft::spawn(streams.spawn, instr, options);
    if (spawned.world) {
      spawned.world->seed = seed;
      return {std::move(*spawned.world), spawned.stats, regen};
    }
  }
  throw GenerationError("no spawnable minecraft episode within the regeneration cap");
}

struct StarcraftSetup {
  starcraft::World world;
  int regenerations = 0;
};

// Orders are drawn with max_len = lengths.hi and redrawn until at least
// lengths.lo lines long; endowments are redrawn until the plan fits the map.
inline StarcraftSetup setup_starcraft(const StarcraftConfig& config, std::uint64_t seed, Streams& streams) {
  if (config.lengths.lo < 1 || config.lengths.hi < config.lengths.lo)
    throw std::invalid_argument("length range must satisfy 1 <= lo <= hi");
  for (int regen = 0; regen < kRegenerationCap; ++regen) {
    BuildOrder order = gen_starcraft(streams.generation, config.lengths.hi, config.max_depth);
    if (!config.lengths.contains(order.instruction.size())) continue;
    const ScDecoded decoded = sc_decode(order.instruction);
    for (int attempt = 0; attempt <= kStarcraftSpawnResamples; ++attempt) {
      starcraft::World w = starcraft::spawn(streams.spawn, order.tree, order.instruction);
      if (!starcraft::spawn_feasible(w, decoded)) continue;
      w.seed = seed;
      return {std::move(w), regen};
    }
  }
  throw GenerationError("no starcraft episode within the regeneration cap");
}

// ---------------------------------------------------------------------------
// Policies

// kind: oracle, random, scripted, pointer-walk, scan-pointer. A scripted
// policy carries its lines (commands for Minecraft, tokens for StarCraft).
struct PolicySpec {
  std::string kind = "oracle";
  std::vector<std::string> script;
};

inline std::unique_ptr<minecraft::Policy> make_minecraft_policy(const PolicySpec& spec, Rng rng) {
  using namespace minecraft;
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>();
  if (spec.kind == "random") return std::make_unique<RandomPolicy>(rng);
  if (spec.kind == "pointer-walk") return std::make_unique<PointerWalkPolicy>();
  if (spec.kind == "scan-pointer") return std::make_unique<ScanPointerPolicy>(rng);
  if (spec.kind == "scripted") {
    std::vector<Command> cmds;
    for (const std::string& line : spec.script) {
      const CfLine l = parse_cf_line(line);
      if (!l.is_subtask()) throw ParseError("scripted command must be a subtask: '" + line + "'");
      cmds.push_back(l.subtask);
    }
    return std::make_unique<ScriptedPolicy>(std::move(cmds));
  }
  throw std::invalid_argument("unknown minecraft policy '" + spec.kind + "'");
}

inline std::unique_ptr<starcraft::Policy> make_starcraft_policy(const PolicySpec& spec, Rng rng) {
  using namespace starcraft;
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>();
  if (spec.kind == "random") return std::make_unique<RandomPolicy>(rng);
  if (spec.kind == "scripted") {
    std::vector<ActionToken> tokens;
    for (const std::string& line : spec.script) tokens.push_back(parse_token(line));
    return std::make_unique<ScriptedPolicy>(std::move(tokens));
  }
  throw std::invalid_argument("unknown starcraft policy '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Traces

inline std::string digest(std::string_view canonical) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a(canonical);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

struct StepRecord {
  int t = 0;
  // Minecraft: the one command issued. StarCraft: the tokens that assembled
  // the resolved command.
  std::vector<std::string> actions;
  std::optional<std::string> event;       // Minecraft: completed interaction
  std::optional<std::string> resolution;  // StarCraft
  bool attacked = false;
  bool ambushed = false;
  int reward = 0;
  bool done = false;
  std::string cause = "none";
  std::optional<std::size_t> pc;  // policy's program counter, when it keeps one
  std::string digest;
};

struct EpisodeTrace {
  std::uint64_t seed = 0;
  DomainConfig config;
  std::vector<std::string> instruction;  // text lines
  std::string initial_digest;
  std::vector<StepRecord> steps;
  std::string outcome;  // success, out_of_order, timeout

  std::string domain() const { return domain_name(config); }
  int total_reward() const {
    int r = 0;
    for (const StepRecord& s : steps) r += s.reward;
    return r;
  }
};

inline EpisodeTrace run_minecraft(const MinecraftConfig& config, const PolicySpec& spec, std::uint64_t seed) {
  Streams streams(seed);
  MinecraftSetup setup = setup_minecraft(config, seed, streams);
  EpisodeTrace trace;
  trace.seed = seed;
  trace.config = config;
  trace.instruction = to_text(setup.world.instruction);
  minecraft::Env env(std::move(setup.world));
  trace.initial_digest = digest(minecraft::canonical_state(env.world()));
  auto policy = make_minecraft_policy(spec, streams.policy);
  minecraft::Observation obs = env.observation();
  policy->reset(obs);
  std::optional<minecraft::Interaction> last;
  while (!env.done()) {
    const minecraft::Command cmd = policy->act(obs, last);
    minecraft::StepResult r = env.step(cmd);
    StepRecord rec;
    rec.t = env.world().step;
    rec.actions = {to_string(cmd)};
    if (r.event) rec.event = to_string(Subtask{r.event->verb, r.event->target});
    rec.reward = r.reward;
    rec.done = r.done;
    rec.cause = minecraft::to_string(r.cause);
    rec.pc = policy->program_counter();
    rec.digest = digest(minecraft::canonical_state(env.world()));
    trace.steps.push_back(std::move(rec));
    last = r.event;
    obs = std::move(r.observation);
  }
  trace.outcome = minecraft::to_string(env.cause());
  return trace;
}

inline EpisodeTrace run_starcraft(const StarcraftConfig& config, const PolicySpec& spec, std::uint64_t seed) {
  Streams streams(seed);
  StarcraftSetup setup = setup_starcraft(config, seed, streams);
  EpisodeTrace trace;
  trace.seed = seed;
  trace.config = config;
  trace.instruction = to_text(setup.world.instruction);
  starcraft::Env env(std::move(setup.world), streams.disruptions, {config.disruptions});
  trace.initial_digest = digest(starcraft::canonical_state(env.world()));
  auto policy = make_starcraft_policy(spec, streams.policy);
  starcraft::Observation obs = env.observation();
  policy->reset(obs);
  while (!env.done()) {
    StepRecord rec;
    std::optional<starcraft::StepResult> r;
    while (!r) {
      const starcraft::ActionToken tok = policy->act(obs);
      rec.actions.push_back(starcraft::to_string(tok));
      r = env.step_token(tok);
    }
    rec.t = env.world().step;
    rec.resolution = starcraft::to_string(r->resolution);
    rec.attacked = r->disruption.attacked;
    rec.ambushed = r->disruption.ambushed;
    rec.reward = r->reward;
    rec.done = r->done;
    rec.cause = starcraft::to_string(r->cause);
    rec.digest = digest(starcraft::canonical_state(env.world()));
    trace.steps.push_back(std::move(rec));
    obs = std::move(r->observation);
  }
  trace.outcome = starcraft::to_string(env.cause());
  return trace;
}

inline EpisodeTrace run_episode(const DomainConfig& config, const PolicySpec& policy, std::uint64_t seed) {
  if (const auto* mc = std::get_if<MinecraftConfig>(&config)) return run_minecraft(*mc, policy, seed);
  return run_starcraft(std::get<StarcraftConfig>(config), policy, seed);
}

// ---------------------------------------------------------------------------
// Failure buffer

// Seeds of failed episodes; a draw retries one of them with probability
// min(1, c * ema) where ema tracks the success rate. Safe to share between
// threads.
class FailureBuffer {
 public:
  explicit FailureBuffer(double c = 1.0, double beta = 0.01, double initial_ema = 0.0)
      : c_(c), beta_(beta), ema_(initial_ema) {
    if (c < 0.0 || beta < 0.0 || beta > 1.0 || initial_ema < 0.0 || initial_ema > 1.0)
      throw std::invalid_argument("FailureBuffer: c >= 0, beta and ema in [0, 1]");
  }

  void update(std::uint64_t seed, bool success) {
    std::lock_guard lock(mu_);
    if (!success) seeds_.push_back(seed);
    ema_ = (1.0 - beta_) * ema_ + beta_ * (success ? 1.0 : 0.0);
  }

  // A buffered seed to retry, or nullopt for a fresh one.
  std::optional<std::uint64_t> sample(Rng& rng) const {
    std::lock_guard lock(mu_);
    if (seeds_.empty()) return std::nullopt;
    if (!rng.bernoulli(std::min(1.0, c_ * ema_))) return std::nullopt;
    return seeds_[rng.index(seeds_.size())];
  }

  double ema() const {
    std::lock_guard lock(mu_);
    return ema_;
  }
  void set_ema(double ema) {
    if (ema < 0.0 || ema > 1.0) throw std::invalid_argument("FailureBuffer: ema outside [0, 1]");
    std::lock_guard lock(mu_);
    ema_ = ema;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return seeds_.size();
  }
  std::vector<std::uint64_t> seeds() const {
    std::lock_guard lock(mu_);
    return seeds_;
  }

 private:
  mutable std::mutex mu_;
  double c_;
  double beta_;
  double ema_;
  std::vector<std::uint64_t> seeds_;
};

// ---------------------------------------------------------------------------
// Parallel execution

// fn(i) for i in [0, n) on up to `jobs` threads; results in index order.
// The first exception thrown by any call is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, unsigned jobs, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<std::optional<Result>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<Result> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::uint64_t episode_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
  return substream_seed(base, stream, index);
}

inline constexpr std::size_t kRetryRound = 16;

// Runs `count` episodes. With a buffer, seeds are drawn in rounds of
// kRetryRound: draws happen in index order before the round, and updates are
// applied in index order after it, so results depend on neither thread
// timing nor the number of jobs.
inline std::vector<EpisodeTrace> run_many(const DomainConfig& config, const PolicySpec& policy, std::uint64_t seed,
                                          std::size_t count, unsigned jobs, FailureBuffer* buffer = nullptr) {
  if (!buffer) {
    return parallel_map(count, jobs, [&](std::size_t i) {
      return run_episode(config, policy, episode_seed(seed, "episode", i));
    });
  }
  Rng retry_rng(substream_seed(seed, "retry"));
  std::vector<EpisodeTrace> out;
  const std::size_t round = kRetryRound;
  for (std::size_t start = 0; start < count; start += round) {
    const std::size_t n = std::min(round, count - start);
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t k = 0; k < n; ++k)
      seeds[k] = buffer->sample(retry_rng).value_or(episode_seed(seed, "episode", start + k));
    auto traces = parallel_map(n, jobs, [&](std::size_t k) { return run_episode(config, policy, seeds[k]); });
    for (auto& t : traces) {
      buffer->update(t.seed, t.outcome == "success");
      out.push_back(std::move(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  std::size_t bin_lo = 0;
  std::size_t bin_hi = 0;
  std::size_t episodes = 0;
  // Empty when the bin ran no episodes.
  std::optional<double> success_rate;
  std::optional<double> stderr_;
  std::size_t timeouts = 0;
  std::size_t out_of_order = 0;
  // Instruction lengths seen, for bin checks.
  std::vector<std::size_t> lengths;
};

inline DomainConfig with_lengths(DomainConfig config, LengthRange bin) {
  std::visit([&](auto& c) { c.lengths = bin; }, config);
  return config;
}

// Mean cumulative reward per bin with its standard error across episodes.
inline std::vector<EvalRow> evaluate(const DomainConfig& config, const PolicySpec& policy,
                                     const std::vector<LengthRange>& bins, std::size_t episodes_per_bin,
                                     std::uint64_t seed, unsigned jobs = 1) {
  if (bins.empty()) throw std::invalid_argument("evaluate: no bins");
  std::vector<EvalRow> rows;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    EvalRow row;
    row.bin_lo = bins[b].lo;
    row.bin_hi = bins[b].hi;
    row.episodes = episodes_per_bin;
    const DomainConfig binned = with_lengths(config, bins[b]);
    const std::string stream = "eval-bin-" + std::to_string(b);
    auto traces = parallel_map(episodes_per_bin, jobs, [&](std::size_t i) {
      return run_episode(binned, policy, episode_seed(seed, stream, i));
    });
    if (!traces.empty()) {
      double sum = 0.0, sq = 0.0;
      for (const EpisodeTrace& t : traces) {
        const double r = t.total_reward();
        sum += r;
        sq += r * r;
        row.timeouts += t.outcome == "timeout";
        row.out_of_order += t.outcome == "out_of_order";
        row.lengths.push_back(t.instruction.size());
      }
      const double n = static_cast<double>(traces.size());
      const double mean = sum / n;
      row.success_rate = mean;
      const double var = traces.size() > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
      row.stderr_ = std::sqrt(var / n);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct SweepRow {
  int block_len = 0;
  std::size_t episodes = 0;
  double success_rate = 0.0;
  std::size_t timeouts = 0;
  std::size_t out_of_order = 0;
};

inline std::vector<SweepRow> longjump_sweep(const PolicySpec& policy, const std::vector<int>& block_lens,
                                            std::size_t episodes_each, std::uint64_t seed, unsigned jobs = 1) {
  for (int n : block_lens)
    if (n < 1 || n > kMaxLongJumpBlock)
      throw std::invalid_argument("longjump_sweep: block length " + std::to_string(n) + " outside 1.." +
                                  std::to_string(kMaxLongJumpBlock));
  std::vector<SweepRow> rows;
  for (int n : block_lens) {
    MinecraftConfig config;
    config.longjump_block = n;
    const std::string stream = "longjump-" + std::to_string(n);
    auto traces = parallel_map(episodes_each, jobs, [&](std::size_t i) {
      return run_minecraft(config, policy, episode_seed(seed, stream, i));
    });
    SweepRow row{n, episodes_each, 0.0, 0, 0};
    for (const EpisodeTrace& t : traces) {
      row.success_rate += t.outcome == "success";
      row.timeouts += t.outcome == "timeout";
      row.out_of_order += t.outcome == "out_of_order";
    }
    if (episodes_each > 0) row.success_rate /= static_cast<double>(episodes_each);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace flowsim::harness
