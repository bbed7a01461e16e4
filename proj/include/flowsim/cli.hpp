#pragma once

// Command-line frontend: gen, run, eval, replay, scan-check, longjump.
// Exit codes: 0 ok, 1 usage, 2 verification failure, 3 I/O or parse error.
// Log level comes from the SPDLOG_LEVEL environment variable.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "flowsim/generators.hpp"
#include "flowsim/harness.hpp"
#include "flowsim/scan_check.hpp"
#include "flowsim/trace_io.hpp"

namespace flowsim::cli {

enum ExitCode { kOk = 0, kUsage = 1, kVerification = 2, kIo = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::get("flowsim");
    if (!l) {
      l = spdlog::stderr_logger_mt("flowsim");
      l->set_pattern("[%l] %v");
      l->set_level(spdlog::level::warn);
      spdlog::cfg::load_env_levels();
    }
    return l;
  }();
  return log;
}

// "lo:hi,lo:hi"
inline std::vector<LengthRange> parse_bins(const std::string& text) {
  std::vector<LengthRange> bins;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("bin '" + item + "' is not lo:hi");
    std::size_t lo = 0, hi = 0;
    try {
      std::size_t used = 0;
      lo = std::stoul(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("");
      const std::string rest = item.substr(colon + 1);
      hi = std::stoul(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError("bin '" + item + "' is not lo:hi");
    }
    if (lo < 1 || hi < lo) throw UsageError("bin '" + item + "' needs 1 <= lo <= hi");
    bins.push_back({lo, hi});
  }
  if (bins.empty()) throw UsageError("--bins is empty");
  return bins;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    lines.push_back(line.substr(first, last - first + 1));
  }
  return lines;
}

inline harness::PolicySpec parse_policy(const std::string& text) {
  harness::PolicySpec spec;
  if (text.rfind("scripted:", 0) == 0) {
    spec.kind = "scripted";
    spec.script = read_lines(text.substr(9));
    return spec;
  }
  if (text != "oracle" && text != "random" && text != "pointer-walk" && text != "scan-pointer")
    throw UsageError("unknown policy '" + text + "'");
  spec.kind = text;
  return spec;
}

// Output goes to --out when given, otherwise to the default stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw IoError("cannot write '" + path + "'");
    out_ = &file_;
  }
  std::ostream& stream() { return *out_; }
  void finish() {
    out_->flush();
    if (!*out_) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline std::string scientific(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

struct CommonOptions {
  std::string domain = "minecraft";
  std::string policy = "oracle";
  std::uint64_t seed = 0;
  std::size_t min_len = 1;
  std::size_t max_len = 10;
  std::string flow;
  std::optional<int> max_depth;
  std::string disruptions;
  unsigned jobs = 1;
  std::string out;
};

inline harness::DomainConfig build_config(const CommonOptions& o) {
  if (o.min_len < 1 || o.max_len < o.min_len) throw UsageError("need 1 <= --min-len <= --max-len");
  if (o.domain == "minecraft") {
    if (o.max_depth) throw UsageError("--max-depth applies to the starcraft domain only");
    if (!o.disruptions.empty()) throw UsageError("--disruptions applies to the starcraft domain only");
    harness::MinecraftConfig c;
    c.lengths = {o.min_len, o.max_len};
    if (!o.flow.empty()) c.flow = io::parse_flow(o.flow);
    return c;
  }
  if (o.domain == "starcraft") {
    if (!o.flow.empty()) throw UsageError("--flow applies to the minecraft domain only");
    if (o.max_depth && *o.max_depth < 1) throw UsageError("--max-depth must be >= 1");
    harness::StarcraftConfig c;
    c.lengths = {o.min_len, o.max_len};
    c.max_depth = o.max_depth;
    c.disruptions = o.disruptions != "off";
    return c;
  }
  throw UsageError("unknown domain '" + o.domain + "'");
}

inline void check_policy_domain(const harness::PolicySpec& p, const std::string& domain) {
  if (domain == "starcraft" && (p.kind == "pointer-walk" || p.kind == "scan-pointer"))
    throw UsageError("policy '" + p.kind + "' is only defined for the minecraft domain");
}

// --- subcommands -----------------------------------------------------------

inline int cmd_gen(const CommonOptions& o, std::size_t count, std::ostream& stdout_) {
  const harness::DomainConfig config = build_config(o);
  Rng rng(substream_seed(o.seed, "generation"));
  Sink sink(o.out, stdout_);
  for (std::size_t i = 0; i < count; ++i) {
    nlohmann::json rec;
    if (const auto* mc = std::get_if<harness::MinecraftConfig>(&config)) {
      auto instr = gen_minecraft(rng, mc->lengths, mc->flow);
      if (!instr) throw GenerationError("no instruction passes the flow filter");
      rec = io::instruction_record(*instr);
    } else {
      const auto& sc = std::get<harness::StarcraftConfig>(config);
      std::optional<BuildOrder> order;
      for (int k = 0; k < kDefaultRejectionBudget && !order; ++k) {
        BuildOrder o2 = gen_starcraft(rng, sc.lengths.hi, sc.max_depth);
        if (sc.lengths.contains(o2.instruction.size())) order = std::move(o2);
      }
      if (!order) throw GenerationError("no build order within the length range");
      rec = io::instruction_record(order->instruction);
    }
    rec["index"] = i;
    sink.stream() << rec.dump() << '\n';
  }
  sink.finish();
  logger()->info("wrote {} instructions", count);
  return kOk;
}

inline int cmd_run(const CommonOptions& o, std::size_t count, bool retry, double retry_c, double retry_beta,
                   std::ostream& stdout_) {
  const harness::DomainConfig config = build_config(o);
  const harness::PolicySpec policy = parse_policy(o.policy);
  check_policy_domain(policy, o.domain);
  std::optional<harness::FailureBuffer> buffer;
  if (retry) buffer.emplace(retry_c, retry_beta);
  const auto traces = harness::run_many(config, policy, o.seed, count, o.jobs, buffer ? &*buffer : nullptr);
  Sink sink(o.out, stdout_);
  std::size_t successes = 0;
  for (const auto& t : traces) {
    io::write_trace(sink.stream(), t, policy);
    successes += t.outcome == "success";
  }
  sink.finish();
  if (!o.out.empty())
    stdout_ << "episodes " << traces.size() << " success " << successes << " rate "
            << fixed(traces.empty() ? 0.0 : static_cast<double>(successes) / traces.size(), 4) << '\n';
  return kOk;
}

inline int cmd_eval(const CommonOptions& o, const std::string& bins_text, std::size_t per_bin,
                    std::ostream& stdout_) {
  const harness::DomainConfig config = build_config(o);
  const harness::PolicySpec policy = parse_policy(o.policy);
  check_policy_domain(policy, o.domain);
  const auto bins = parse_bins(bins_text);
  const auto rows = harness::evaluate(config, policy, bins, per_bin, o.seed, o.jobs);
  Sink sink(o.out, stdout_);
  sink.stream() << "bin_lo,bin_hi,episodes,success_rate,stderr,timeouts,out_of_order\n";
  for (const auto& r : rows) {
    sink.stream() << r.bin_lo << ',' << r.bin_hi << ',' << r.episodes << ','
                  << (r.success_rate ? fixed(*r.success_rate) : "") << ','
                  << (r.stderr_ ? fixed(*r.stderr_) : "") << ',' << r.timeouts << ',' << r.out_of_order << '\n';
  }
  sink.finish();
  return kOk;
}

inline int cmd_replay(const std::string& path, std::size_t episode, bool quiet, std::ostream& stdout_) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  const auto traces = io::read_traces(in);
  if (episode >= traces.size())
    throw UsageError("--episode " + std::to_string(episode) + " out of range (" + std::to_string(traces.size()) +
                     " episodes)");
  const io::ReplayResult r = io::replay(traces[episode].trace);
  if (!quiet) stdout_ << r.frames;
  stdout_ << (r.ok ? "replay ok: " + traces[episode].trace.outcome : "replay FAILED: " + r.message) << '\n';
  return r.ok ? kOk : kVerification;
}

inline int cmd_scan_check(const pointer::ScanCheckOptions& opt, const std::string& out, std::ostream& stdout_) {
  if (opt.trials < 1 || opt.max_len < 1) throw UsageError("--trials and --max-len must be >= 1");
  const auto rows = pointer::scan_check(opt);
  Sink sink(out, stdout_);
  sink.stream() << "check,length,trials,value,threshold,pass\n";
  bool all = true;
  for (const auto& r : rows) {
    sink.stream() << r.check << ',' << r.length << ',' << r.trials << ',' << scientific(r.value) << ','
                  << scientific(r.threshold) << ',' << (r.pass() ? "pass" : "FAIL") << '\n';
    all &= r.pass();
  }
  sink.finish();
  return all ? kOk : kVerification;
}

inline int cmd_longjump(const CommonOptions& o, int min_block, int max_block, std::size_t episodes,
                        std::ostream& stdout_) {
  const harness::PolicySpec policy = parse_policy(o.policy);
  if (min_block < 1 || max_block > kMaxLongJumpBlock || min_block > max_block)
    throw UsageError("block lengths must satisfy 1 <= --min-block <= --max-block <= " +
                     std::to_string(kMaxLongJumpBlock));
  std::vector<int> lens;
  for (int n = min_block; n <= max_block; ++n) lens.push_back(n);
  const auto rows = harness::longjump_sweep(policy, lens, episodes, o.seed, o.jobs);
  Sink sink(o.out, stdout_);
  sink.stream() << "block_len,episodes,success_rate,timeouts,out_of_order\n";
  for (const auto& r : rows)
    sink.stream() << r.block_len << ',' << r.episodes << ',' << fixed(r.success_rate) << ',' << r.timeouts << ','
                  << r.out_of_order << '\n';
  sink.finish();
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& stdout_ = std::cout,
                   std::ostream& stderr_ = std::cerr) {
  CLI::App app{"Instruction-following gridworlds, oracle policies and pointer-kernel checks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file (same keys as the flags)");

  CommonOptions o;
  std::size_t count = 1;
  std::string disruptions;
  int max_depth = 0;

  auto common = [&](CLI::App* sub, bool lengths) {
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--out", o.out, "Output file (default stdout)");
    if (!lengths) return;
    sub->add_option("--domain", o.domain, "minecraft or starcraft")->check(CLI::IsMember({"minecraft", "starcraft"}));
    sub->add_option("--min-len", o.min_len, "Shortest instruction");
    sub->add_option("--max-len", o.max_len, "Longest instruction");
    sub->add_option("--flow", o.flow, "any, single or multi (minecraft)")
        ->check(CLI::IsMember({"any", "single", "multi"}));
    sub->add_option("--max-depth", max_depth, "Build-tree depth limit (starcraft)");
  };

  CLI::App* gen = app.add_subcommand("gen", "Write generated instructions as JSON lines");
  common(gen, true);
  gen->add_option("--count", count, "Number of instructions");

  CLI::App* run = app.add_subcommand("run", "Run episodes and write JSON-lines traces");
  common(run, true);
  bool retry = false;
  double retry_c = 1.0, retry_beta = 0.01;
  run->add_option("--policy", o.policy, "oracle, random, scripted:<file>, pointer-walk, scan-pointer");
  run->add_option("--count", count, "Number of episodes");
  run->add_option("--disruptions", disruptions, "on or off (starcraft)")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--jobs", o.jobs, "Worker threads");
  run->add_flag("--retry-failures", retry, "Resample seeds of failed episodes");
  run->add_option("--retry-c", retry_c, "Retry probability scale");
  run->add_option("--retry-beta", retry_beta, "Success-rate moving-average rate");

  CLI::App* eval = app.add_subcommand("eval", "Binned evaluation table as CSV");
  common(eval, true);
  std::string bins = "1:10,11:20,21:30,31:40,41:50";
  std::size_t per_bin = 100;
  eval->add_option("--policy", o.policy, "oracle, random, scripted:<file>, pointer-walk, scan-pointer");
  eval->add_option("--bins", bins, "Length bins lo:hi,...");
  eval->add_option("--episodes-per-bin", per_bin, "Episodes per bin");
  eval->add_option("--disruptions", disruptions, "on or off (starcraft)")->check(CLI::IsMember({"on", "off"}));
  eval->add_option("--jobs", o.jobs, "Worker threads");

  CLI::App* rep = app.add_subcommand("replay", "Re-simulate a trace and print ASCII frames");
  std::string trace_path;
  std::size_t episode = 0;
  bool quiet = false;
  rep->add_option("--trace", trace_path, "Trace file")->required();
  rep->add_option("--episode", episode, "Episode index within the file");
  rep->add_flag("--quiet", quiet, "Only verify, print no frames");

  CLI::App* scan = app.add_subcommand("scan-check", "Verify the pointer kernel numerically");
  pointer::ScanCheckOptions scan_opt;
  std::string mode = "stop-process";
  std::string scan_out;
  scan->add_option("--trials", scan_opt.trials, "Random columns per length");
  scan->add_option("--max-len", scan_opt.max_len, "Largest L checked");
  scan->add_option("--mode", mode, "stop-process or printed-formula")
      ->check(CLI::IsMember({"stop-process", "printed-formula"}));
  scan->add_option("--seed", scan_opt.seed, "Seed");
  scan->add_option("--out", scan_out, "Output file (default stdout)");

  CLI::App* lj = app.add_subcommand("longjump", "Success rate against failing-block length");
  common(lj, false);
  int min_block = 1, max_block = kMaxLongJumpBlock;
  std::size_t lj_episodes = 20;
  lj->add_option("--policy", o.policy, "oracle, random, scripted:<file>, pointer-walk, scan-pointer");
  lj->add_option("--min-block", min_block, "Shortest failing block");
  lj->add_option("--max-block", max_block, "Longest failing block");
  lj->add_option("--episodes", lj_episodes, "Episodes per block length");
  lj->add_option("--jobs", o.jobs, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    stdout_ << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    stdout_ << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    stderr_ << "error: " << e.what() << '\n';
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::FileError)) return kIo;
    return kUsage;
  }

  for (CLI::App* sub : {gen, run, eval})
    if (sub->parsed() && sub->count("--max-depth")) o.max_depth = max_depth;
  o.disruptions = disruptions;

  try {
    if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
    if (gen->parsed()) return cmd_gen(o, count, stdout_);
    if (run->parsed()) return cmd_run(o, count, retry, retry_c, retry_beta, stdout_);
    if (eval->parsed()) return cmd_eval(o, bins, per_bin, stdout_);
    if (rep->parsed()) return cmd_replay(trace_path, episode, quiet, stdout_);
    if (scan->parsed()) {
      scan_opt.mode = mode == "printed-formula" ? pointer::ScanMode::PrintedFormula : pointer::ScanMode::StopProcess;
      return cmd_scan_check(scan_opt, scan_out, stdout_);
    }
    if (lj->parsed()) return cmd_longjump(o, min_block, max_block, lj_episodes, stdout_);
  } catch (const UsageError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kIo;
  } catch (const io::TraceParseError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kVerification;
  }
  return kUsage;
}

}  // namespace flowsim::cli
