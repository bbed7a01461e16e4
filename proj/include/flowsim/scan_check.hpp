#pragma once

// Numerical self-checks of the pointer kernel, shared by the CLI and the
// acceptance suite.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "flowsim/pointer_kernel.hpp"
#include "flowsim/rng.hpp"

namespace flowsim::pointer {

inline constexpr double kOracleTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-12;
inline constexpr double kGradientTolerance = 1e-4;
inline constexpr double kGradientStep = 1e-6;
inline constexpr double kGradientFloor = 1e-8;
inline constexpr double kLongJumpMass = 0.99;

struct CheckRow {
  std::string check;
  std::string length;  // a length, or a bound such as "<=25"
  int trials = 0;
  double value = 0.0;
  double threshold = 0.0;
  bool higher_is_better = false;
  bool pass() const { return higher_is_better ? value > threshold : value < threshold; }
};

struct ScanCheckOptions {
  int trials = 1000;
  int max_len = 50;
  ScanMode mode = ScanMode::StopProcess;
  std::uint64_t seed = 0;
  int gradient_trials = 100;
  int gradient_max_len = 25;
};

// Heads probabilities uniform on [0, 1], with exact 0 and 1 mixed in.
inline std::vector<double> random_sigmas(Rng& rng, int length) {
  std::vector<double> s(2 * static_cast<std::size_t>(length));
  for (double& v : s) {
    const double u = rng.uniform01();
    v = u < 0.03 ? 0.0 : u < 0.06 ? 1.0 : rng.uniform01();
  }
  return s;
}

inline std::vector<int> check_lengths(int max_len) {
  std::vector<int> out;
  for (int l : {1, 2, 5, 10, 25, 50})
    if (l <= max_len) out.push_back(l);
  if (out.empty() || out.back() != max_len) out.push_back(max_len);
  return out;
}

// Largest |scan - oracle|, |sum + residual - 1| and |residual - prod(1 - s)|.
inline std::vector<CheckRow> check_oracle_and_mass(const ScanCheckOptions& opt) {
  std::vector<CheckRow> rows;
  for (int length : check_lengths(opt.max_len)) {
    Rng rng(substream_seed(opt.seed, "scan-check", static_cast<std::uint64_t>(length)));
    double oracle = 0.0, mass = 0.0, residual = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      const auto s = random_sigmas(rng, length);
      const Column got = scan_column(s, opt.mode);
      const Column want = brute_force_oracle(s, opt.mode);
      long double total = got.residual, tails = 1.0L;
      for (std::size_t r = 0; r < s.size(); ++r) {
        oracle = std::max(oracle, std::abs(got.probs[r] - want.probs[r]));
        total += got.probs[r];
        tails *= 1.0L - s[r];
      }
      oracle = std::max(oracle, std::abs(got.residual - want.residual));
      mass = std::max(mass, static_cast<double>(std::abs(total - 1.0L)));
      residual = std::max(residual, static_cast<double>(std::abs(got.residual - tails)));
    }
    const std::string l = std::to_string(length);
    rows.push_back({"oracle_max_abs_diff", l, opt.trials, oracle, kOracleTolerance});
    rows.push_back({"normalization_max_abs_err", l, opt.trials, mass, kNormalizationTolerance});
    rows.push_back({"residual_max_abs_err", l, opt.trials, residual, kNormalizationTolerance});
  }
  return rows;
}

// Analytic Jacobian against central differences on logits from U(-6, 6).
// Relative error |a - fd| / |a| over entries with |a| above the floor.
inline CheckRow check_gradients(const ScanCheckOptions& opt) {
  Rng rng(substream_seed(opt.seed, "scan-check-gradient"));
  double worst = 0.0;
  const int max_len = std::max(1, std::min(opt.gradient_max_len, opt.max_len));
  for (int t = 0; t < opt.gradient_trials; ++t) {
    const int length = static_cast<int>(rng.uniform_int(1, max_len));
    std::vector<double> h(2 * static_cast<std::size_t>(length));
    for (double& v : h) v = -6.0 + 12.0 * rng.uniform01();
    const ColumnJacobian jac = scan_jacobian(h, opt.mode);
    for (std::size_t k = 0; k < h.size(); ++k) {
      std::vector<double> up = h, down = h;
      up[k] += kGradientStep;
      down[k] -= kGradientStep;
      const Column a = scan_column(sigmoid(up), opt.mode);
      const Column b = scan_column(sigmoid(down), opt.mode);
      auto compare = [&](double analytic, double plus, double minus) {
        if (std::abs(analytic) <= kGradientFloor) return;
        const double fd = (plus - minus) / (2.0 * kGradientStep);
        worst = std::max(worst, std::abs(analytic - fd) / std::abs(analytic));
      };
      for (std::size_t r = 0; r < h.size(); ++r) compare(jac.probs(r, k), a.probs[r], b.probs[r]);
      compare(jac.residual[k], a.residual, b.residual);
    }
  }
  return {"gradient_max_rel_err", "<=" + std::to_string(max_len), opt.gradient_trials, worst, kGradientTolerance};
}

// Line patterns placed around the pointer, with every other line at zero,
// give the same delta distribution wherever the pattern sits. The value is
// the number of shifted pairs that differ in any bit.
inline CheckRow check_translation(const ScanCheckOptions& opt, int patterns = 100) {
  Rng rng(substream_seed(opt.seed, "scan-check-translation"));
  constexpr int kLines = 40, kHalfWidth = 5, kMaxShift = 5;
  int mismatches = 0, pairs = 0;
  for (int t = 0; t < patterns; ++t) {
    std::vector<double> pattern(2 * kHalfWidth + 1);
    for (double& v : pattern) v = rng.uniform01();
    const int base = static_cast<int>(rng.uniform_int(kHalfWidth + kMaxShift, kLines - 1 - kHalfWidth - kMaxShift));
    auto column_at = [&](int pointer) {
      std::vector<double> lines(kLines, 0.0);
      for (int o = -kHalfWidth; o <= kHalfWidth; ++o) lines[pointer + o] = pattern[o + kHalfWidth];
      return scan_column(sigmas_from_lines(lines, pointer), opt.mode);
    };
    const Column ref = column_at(base);
    for (int k = -kMaxShift; k <= kMaxShift; ++k) {
      const Column got = column_at(base + k);
      ++pairs;
      if (got.probs != ref.probs || got.residual != ref.residual) ++mismatches;
    }
  }
  return {"translation_mismatches", std::to_string(kLines), pairs, static_cast<double>(mismatches), 0.5};
}

// Logit +20 at delta +m and -20 elsewhere; the value is min over m of P(+m).
inline CheckRow check_long_jump_mass(const ScanCheckOptions& opt, int length = 50) {
  double worst = 1.0;
  for (int m = 1; m <= length; ++m) {
    std::vector<double> h(2 * static_cast<std::size_t>(length), -20.0);
    h[static_cast<std::size_t>(delta_to_row(m, length))] = 20.0;
    const Column col = scan_column(sigmoid(h), opt.mode);
    worst = std::min(worst, col.probs[static_cast<std::size_t>(delta_to_row(m, length))]);
  }
  return {"long_jump_min_mass", std::to_string(length), length, worst, kLongJumpMass, true};
}

inline std::vector<CheckRow> scan_check(const ScanCheckOptions& opt) {
  auto rows = check_oracle_and_mass(opt);
  rows.push_back(check_gradients(opt));
  rows.push_back(check_translation(opt));
  rows.push_back(check_long_jump_mass(opt));
  return rows;
}

}  // namespace flowsim::pointer
