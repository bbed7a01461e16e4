#include <gtest/gtest.h>

#include <cmath>

#include "flowsim/pointer_kernel.hpp"
#include "flowsim/scan_check.hpp"

using namespace flowsim;
using namespace flowsim::pointer;

namespace {

// Probability of each first-heads row, summed over all 2^(2L) coin patterns.
Column enumerate_coins(const std::vector<double>& sigmas) {
  const int length = static_cast<int>(sigmas.size() / 2);
  Column out{std::vector<double>(sigmas.size(), 0.0), 0.0};
  const std::uint32_t patterns = 1u << sigmas.size();
  for (std::uint32_t mask = 0; mask < patterns; ++mask) {
    double p = 1.0;
    for (std::size_t r = 0; r < sigmas.size(); ++r) p *= (mask >> r & 1u) ? sigmas[r] : 1.0 - sigmas[r];
    int stop = -1;
    for (int m = 0; m < 2 * length && stop < 0; ++m) {
      const int row = delta_to_row(scan_delta(m), length);
      if (mask >> row & 1u) stop = row;
    }
    if (stop < 0) {
      out.residual += p;
    } else {
      out.probs[static_cast<std::size_t>(stop)] += p;
    }
  }
  return out;
}

}  // namespace

TEST(Layout, RowsAndScanOrder) {
  EXPECT_EQ(row_to_delta(0, 3), -3);
  EXPECT_EQ(row_to_delta(2, 3), -1);
  EXPECT_EQ(row_to_delta(3, 3), 1);
  EXPECT_EQ(row_to_delta(5, 3), 3);
  for (int L = 1; L <= 6; ++L)
    for (int r = 0; r < 2 * L; ++r) EXPECT_EQ(delta_to_row(row_to_delta(r, L), L), r);
  EXPECT_THROW(delta_to_row(0, 3), std::out_of_range);
  EXPECT_THROW(delta_to_row(4, 3), std::out_of_range);
  EXPECT_EQ(scan_delta(0), 1);
  EXPECT_EQ(scan_delta(1), -1);
  EXPECT_EQ(scan_delta(2), 2);
  EXPECT_EQ(scan_delta(5), -3);
}

TEST(ScanColumn, MatchesCoinEnumeration) {
  Rng rng(41);
  for (int L = 1; L <= 4; ++L)
    for (int t = 0; t < 50; ++t) {
      const auto s = random_sigmas(rng, L);
      const Column got = scan_column(s);
      const Column want = enumerate_coins(s);
      for (std::size_t r = 0; r < s.size(); ++r) EXPECT_NEAR(got.probs[r], want.probs[r], 1e-13);
      EXPECT_NEAR(got.residual, want.residual, 1e-13);
    }
}

TEST(ScanColumn, MatchesBruteForceOracle) {
  Rng rng(42);
  for (int L : {1, 2, 5, 10, 25, 50})
    for (int t = 0; t < 100; ++t) {
      const auto s = random_sigmas(rng, L);
      const Column got = scan_column(s), want = brute_force_oracle(s);
      for (std::size_t r = 0; r < s.size(); ++r) ASSERT_NEAR(got.probs[r], want.probs[r], 1e-12);
      ASSERT_NEAR(got.residual, want.residual, 1e-12);
    }
}

TEST(ScanColumn, HandWorkedL1) {
  // Visit +1 then -1.
  const std::vector<double> s{0.5, 0.25};  // rows: -1, +1
  const Column c = scan_column(s);
  EXPECT_DOUBLE_EQ(c.probs[1], 0.25);
  EXPECT_DOUBLE_EQ(c.probs[0], 0.5 * 0.75);
  EXPECT_DOUBLE_EQ(c.residual, 0.75 * 0.5);
}

TEST(ScanColumn, FirstCertainCoinTakesAllMass) {
  const int L = 4;
  std::vector<double> s(2 * L, 0.3);
  s[static_cast<std::size_t>(delta_to_row(-2, L))] = 1.0;  // scan position 3
  const Column c = scan_column(s);
  EXPECT_DOUBLE_EQ(c.residual, 0.0);
  for (int m = 4; m < 2 * L; ++m) EXPECT_EQ(c.probs[static_cast<std::size_t>(delta_to_row(scan_delta(m), L))], 0.0);
  const Column z = scan_column(std::vector<double>(2 * L, 0.0));
  EXPECT_DOUBLE_EQ(z.residual, 1.0);
}

TEST(ScanColumn, InputErrors) {
  EXPECT_THROW(scan_column(std::vector<double>{0.5}), std::invalid_argument);
  EXPECT_THROW(scan_column(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(scan_column(std::vector<double>{0.5, 1.5}), std::domain_error);
  EXPECT_THROW(scan_column(std::vector<double>{0.5, NAN}), std::domain_error);
  Matrix bad(2, 1, 0.0);
  bad(0, 0) = INFINITY;
  EXPECT_THROW(ScanLogits{bad}, std::domain_error);
  EXPECT_THROW(ScanLogits{Matrix(3, 1)}, std::invalid_argument);
}

TEST(ScanColumn, PrintedFormulaDoesNotNormalize) {
  const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
  const Column c = scan_column(s, ScanMode::PrintedFormula);
  double total = c.residual;
  for (double p : c.probs) total += p;
  EXPECT_NEAR(total, 4 * 0.0625 + 0.0625, 1e-15);
  const Column o = brute_force_oracle(s, ScanMode::PrintedFormula);
  for (std::size_t r = 0; r < s.size(); ++r) EXPECT_DOUBLE_EQ(c.probs[r], o.probs[r]);
}

TEST(ScanMatrix, ColumnsAreIndependent) {
  const int L = 3;
  Matrix h(2 * L, 2);
  Rng rng(43);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    h(r, 0) = -3 + 6 * rng.uniform01();
    h(r, 1) = -3 + 6 * rng.uniform01();
  }
  const auto dist = scan_matrix(ScanLogits(h));
  for (std::size_t j = 0; j < 2; ++j) {
    const Column c = scan_column(sigmoid(h.column(j)));
    for (std::size_t r = 0; r < h.rows(); ++r) EXPECT_DOUBLE_EQ(dist.probs(r, j), c.probs[r]);
    EXPECT_DOUBLE_EQ(dist.residual[j], c.residual);
  }
  const std::vector<double> u{0.0, std::log(3.0)};
  const auto m = mix(dist, u);
  for (std::size_t r = 0; r < h.rows(); ++r) EXPECT_NEAR(m[r], 0.25 * dist.probs(r, 0) + 0.75 * dist.probs(r, 1), 1e-15);
  EXPECT_THROW(mix(dist, std::vector<double>{0.0}), std::invalid_argument);
}

TEST(Softmax, StableAndNormalized) {
  const auto p = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[2], 0.0);
  EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST(MixAndSample, FrequenciesWithinFourSigma) {
  const int L = 3;
  Matrix h(2 * L, 1);
  const std::vector<double> logits{-1.0, 0.5, -0.2, 0.8, -2.0, 0.1};
  for (std::size_t r = 0; r < logits.size(); ++r) h(r, 0) = logits[r];
  const auto dist = scan_matrix(ScanLogits(h));
  const std::vector<double> u{0.0};
  Rng rng(44);
  const int n = 200000;
  std::vector<int> hits(2 * L, 0);
  for (int k = 0; k < n; ++k) {
    const auto d = mix_and_sample(dist, u, rng);
    ASSERT_TRUE(d);
    ++hits[static_cast<std::size_t>(delta_to_row(*d, L))];
  }
  const double mass = 1.0 - dist.residual[0];
  for (std::size_t r = 0; r < hits.size(); ++r) {
    const double p = dist.probs(r, 0) / mass;
    const double sd = std::sqrt(n * p * (1 - p));
    EXPECT_NEAR(hits[r], n * p, 4 * sd) << "row " << r;
  }
}

TEST(MixAndSample, AllResidualMeansNoMove) {
  Matrix h(4, 1, -1000.0);
  Rng rng(45);
  const auto dist = scan_matrix(ScanLogits(h));
  EXPECT_FALSE(mix_and_sample(dist, std::vector<double>{0.0}, rng));
}

TEST(UpdatePointer, GateAndClamp) {
  EXPECT_EQ(update_pointer({2}, true, 3, 10).position, 5);
  EXPECT_EQ(update_pointer({2}, false, 3, 10).position, 2);
  EXPECT_EQ(update_pointer({2}, true, -5, 10).position, 0);
  EXPECT_EQ(update_pointer({8}, true, 5, 10).position, 9);
  EXPECT_THROW(update_pointer({0}, true, 1, 0), std::invalid_argument);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  ScanCheckOptions opt;
  opt.gradient_trials = 40;
  opt.gradient_max_len = 12;
  opt.max_len = 12;
  EXPECT_LT(check_gradients(opt).value, 1e-4);
  opt.mode = ScanMode::PrintedFormula;
  EXPECT_LT(check_gradients(opt).value, 1e-4);
}

TEST(Jacobian, HandWorkedL1) {
  const std::vector<double> h{0.0, 0.0};  // sigma 0.5 everywhere
  const auto j = scan_jacobian(h);
  // P(+1) = s1 -> d/dh1 = s(1-s) = 0.25; independent of h_-1.
  EXPECT_DOUBLE_EQ(j.probs(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(j.probs(1, 0), 0.0);
  // P(-1) = s0 (1 - s1)
  EXPECT_DOUBLE_EQ(j.probs(0, 0), 0.125);
  EXPECT_DOUBLE_EQ(j.probs(0, 1), -0.125);
  EXPECT_DOUBLE_EQ(j.residual[0], -0.125);
}

TEST(Kernel, TranslationInvariance) {
  ScanCheckOptions opt;
  opt.seed = 3;
  EXPECT_EQ(check_translation(opt).value, 0.0);
}

TEST(Kernel, LongJumpMassAtEveryDistance) {
  ScanCheckOptions opt;
  const CheckRow r = check_long_jump_mass(opt, 50);
  EXPECT_GT(r.value, 0.99);
  EXPECT_TRUE(r.pass());
}

TEST(Kernel, LinesOutsideTheInstructionNeverStop) {
  const std::vector<double> lines{0.9, 0.9, 0.9};
  const auto s = sigmas_from_lines(lines, 0);
  ASSERT_EQ(s.size(), 6u);
  for (int d = -3; d <= -1; ++d) EXPECT_EQ(s[static_cast<std::size_t>(delta_to_row(d, 3))], 0.0);
  EXPECT_EQ(s[static_cast<std::size_t>(delta_to_row(2, 3))], 0.9);
  EXPECT_EQ(s[static_cast<std::size_t>(delta_to_row(3, 3))], 0.0);
  EXPECT_THROW(sigmas_from_lines(lines, 3), std::out_of_range);
}

TEST(Baselines, Supports) {
  EXPECT_EQ(baseline_support(BaselineKind::Olsk, 7), (std::vector<int>{-1, 0, 1}));
  EXPECT_EQ(baseline_support(BaselineKind::OlskExtended, 2), (std::vector<int>{-2, -1, 0, 1, 2}));
  EXPECT_EQ(baseline_support(BaselineKind::Ablation, 2), (std::vector<int>{-2, -1, 1, 2}));
  EXPECT_THROW(baseline_support(BaselineKind::Olsk, 0), std::invalid_argument);
}

TEST(ScanCheck, StopProcessPassesPrintedFormulaFails) {
  ScanCheckOptions opt;
  opt.trials = 50;
  opt.max_len = 10;
  opt.gradient_trials = 10;
  for (const auto& r : scan_check(opt)) EXPECT_TRUE(r.pass()) << r.check << " L=" << r.length;
  opt.mode = ScanMode::PrintedFormula;
  bool norm_failed = false;
  for (const auto& r : scan_check(opt))
    if (r.check == "normalization_max_abs_err") norm_failed |= !r.pass();
  EXPECT_TRUE(norm_failed);
}
