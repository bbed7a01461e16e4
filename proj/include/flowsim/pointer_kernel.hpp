#pragma once

// Pointer-movement kernel: the scan stop-process distribution over pointer
// deltas, mixing of several candidate distributions, gated pointer updates,
// analytic gradients and the baseline movement supports.
//
// Row layout of every 2L-row quantity (logits, sigmas, probabilities):
//   rows 0 .. L-1   <-> deltas -L .. -1
//   rows L .. 2L-1  <-> deltas +1 .. +L
// The scan visits deltas +1, -1, +2, -2, ..., +L, -L and stops at the first
// line whose coin comes up heads.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowsim/rng.hpp"

namespace flowsim::pointer {

// StopProcess: P(m) = s_m * prod over earlier scan positions of (1 - s).
// PrintedFormula: P(m) = s_m * prod over all other positions of (1 - s), the
// "exactly one heads" reading, kept for comparison only; it does not normalize.
enum class ScanMode { StopProcess, PrintedFormula };

inline int row_to_delta(int row, int length) { return row < length ? row - length : row - length + 1; }

inline int delta_to_row(int delta, int length) {
  if (delta == 0 || delta < -length || delta > length)
    throw std::out_of_range("delta_to_row: delta " + std::to_string(delta) + " outside +-L");
  return delta < 0 ? delta + length : delta + length - 1;
}

// Delta visited at scan position m (0-based).
inline int scan_delta(int m) { return (m / 2 + 1) * (m % 2 == 0 ? 1 : -1); }

inline double sigmoid(double h) {
  if (h >= 0) return 1.0 / (1.0 + std::exp(-h));
  const double e = std::exp(h);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }
  void set_column(std::size_t c, std::span<const double> values) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Column {
  std::vector<double> probs;  // 2L, row layout
  double residual = 0.0;      // mass of "no coin came up heads"
};

namespace detail {

inline int length_of(std::size_t rows) {
  if (rows == 0 || rows % 2 != 0) throw std::invalid_argument("pointer kernel: column needs 2L > 0 rows");
  return static_cast<int>(rows / 2);
}

inline void check_sigmas(std::span<const double> sigmas) {
  for (double s : sigmas)
    if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("pointer kernel: sigma outside [0, 1]");
}

}  // namespace detail

// sigmas: per-row heads probabilities.
inline Column scan_column(std::span<const double> sigmas, ScanMode mode = ScanMode::StopProcess) {
  const int length = detail::length_of(sigmas.size());
  detail::check_sigmas(sigmas);
  Column out{std::vector<double>(sigmas.size(), 0.0), 1.0};
  double survive = 1.0;
  for (int m = 0; m < 2 * length; ++m) {
    const int row = delta_to_row(scan_delta(m), length);
    out.probs[row] = sigmas[row] * survive;
    survive *= 1.0 - sigmas[row];
  }
  out.residual = survive;
  if (mode == ScanMode::PrintedFormula) {
    for (std::size_t r = 0; r < sigmas.size(); ++r) {
      double others = 1.0;
      for (std::size_t k = 0; k < sigmas.size(); ++k)
        if (k != r) others *= 1.0 - sigmas[k];
      out.probs[r] = sigmas[r] * others;
    }
  }
  return out;
}

// Row layout logits -> heads probabilities.
inline std::vector<double> sigmoid(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]);
  return out;
}

// Pointer-relative heads probabilities built from per-line values of an
// instruction: the row for delta d reads line pointer + d, and deltas that
// leave the instruction never stop.
inline std::vector<double> sigmas_from_lines(std::span<const double> line_heads, int pointer) {
  const int length = static_cast<int>(line_heads.size());
  if (pointer < 0 || pointer >= length) throw std::out_of_range("sigmas_from_lines: pointer outside instruction");
  std::vector<double> out(2 * static_cast<std::size_t>(length), 0.0);
  for (int row = 0; row < 2 * length; ++row) {
    const int line = pointer + row_to_delta(row, length);
    if (line >= 0 && line < length) out[row] = line_heads[line];
  }
  return out;
}

// Reference for scan_column: builds the visiting order by sorting the deltas,
// then accumulates each stop probability from scratch in extended precision.
inline Column brute_force_oracle(std::span<const double> sigmas, ScanMode mode = ScanMode::StopProcess) {
  const int length = detail::length_of(sigmas.size());
  detail::check_sigmas(sigmas);
  std::vector<int> order;
  for (int d = 1; d <= length; ++d) {
    order.push_back(d);
    order.push_back(-d);
  }
  Column out{std::vector<double>(sigmas.size(), 0.0), 0.0};
  long double residual = 1.0L;
  for (std::size_t m = 0; m < order.size(); ++m) {
    const int row = delta_to_row(order[m], length);
    long double p = sigmas[row];
    for (std::size_t k = 0; k < order.size(); ++k) {
      const bool counts = mode == ScanMode::StopProcess ? k < m : k != m;
      if (counts) p *= 1.0L - sigmas[delta_to_row(order[k], length)];
    }
    out.probs[row] = static_cast<double>(p);
    residual *= 1.0L - sigmas[row];
  }
  out.residual = static_cast<double>(residual);
  return out;
}

// ---------------------------------------------------------------------------

// 2L x N_e logits, one column per candidate distribution.
struct ScanLogits {
  Matrix values;

  explicit ScanLogits(Matrix m) : values(std::move(m)) {
    detail::length_of(values.rows());
    if (values.cols() == 0) throw std::invalid_argument("ScanLogits: need at least one column");
    for (std::size_t r = 0; r < values.rows(); ++r)
      for (std::size_t c = 0; c < values.cols(); ++c)
        if (!std::isfinite(values(r, c))) throw std::domain_error("ScanLogits: non-finite logit");
  }
  int length() const { return static_cast<int>(values.rows() / 2); }
  std::size_t n_edges() const { return values.cols(); }
};

struct MovementDistribution {
  Matrix probs;                  // 2L x N_e
  std::vector<double> residual;  // per column
  int length() const { return static_cast<int>(probs.rows() / 2); }
  std::size_t n_edges() const { return probs.cols(); }
};

inline MovementDistribution scan_matrix(const ScanLogits& logits, ScanMode mode = ScanMode::StopProcess) {
  MovementDistribution out{Matrix(logits.values.rows(), logits.n_edges()), {}};
  for (std::size_t j = 0; j < logits.n_edges(); ++j) {
    const Column col = scan_column(sigmoid(logits.values.column(j)), mode);
    out.probs.set_column(j, col.probs);
    out.residual.push_back(col.residual);
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  double peak = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw std::domain_error("softmax: non-finite logit");
    peak = std::max(peak, v);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += out[i] = std::exp(logits[i] - peak);
  for (double& v : out) v /= total;
  return out;
}

// Softmax-weighted mixture of the columns; not renormalized, so its total is
// one minus the mixed residual.
inline std::vector<double> mix(const MovementDistribution& dist, std::span<const double> edge_logits) {
  if (edge_logits.size() != dist.n_edges()) throw std::invalid_argument("mix: one logit per column required");
  const std::vector<double> w = softmax(edge_logits);
  std::vector<double> mixed(dist.probs.rows(), 0.0);
  for (std::size_t r = 0; r < mixed.size(); ++r)
    for (std::size_t j = 0; j < w.size(); ++j) mixed[r] += w[j] * dist.probs(r, j);
  return mixed;
}

// Draws a delta from the renormalized mixture; nullopt when the mixture
// carries no mass (every column all-residual), which callers treat as no move.
inline std::optional<int> mix_and_sample(const MovementDistribution& dist, std::span<const double> edge_logits,
                                         Rng& rng) {
  const std::vector<double> mixed = mix(dist, edge_logits);
  double total = 0.0;
  for (double v : mixed) total += v;
  if (!(total > 0.0)) return std::nullopt;
  return row_to_delta(static_cast<int>(rng.categorical(mixed)), dist.length());
}

struct PointerState {
  int position = 0;
  friend bool operator==(const PointerState&, const PointerState&) = default;
};

// p + gate * delta, clamped to [0, L-1].
inline PointerState update_pointer(PointerState p, bool gate, int delta, int length) {
  if (length < 1) throw std::invalid_argument("update_pointer: length < 1");
  const int moved = p.position + (gate ? delta : 0);
  return {std::clamp(moved, 0, length - 1)};
}

// ---------------------------------------------------------------------------
// Gradients with respect to the logits (sigma = sigmoid(logit)).

struct ColumnJacobian {
  Matrix probs;                        // d probs[r] / d logit[k], 2L x 2L
  std::vector<double> residual;        // d residual / d logit[k]
};

// Products are taken in log space: log s = -softplus(-h), log(1 - s) = -softplus(h).
inline ColumnJacobian scan_jacobian(std::span<const double> logits, ScanMode mode = ScanMode::StopProcess) {
  const int length = detail::length_of(logits.size());
  const std::size_t n = logits.size();
  std::vector<double> sig(n), log_heads(n), log_tails(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::isfinite(logits[r])) throw std::domain_error("scan_jacobian: non-finite logit");
    sig[r] = sigmoid(logits[r]);
    log_heads[r] = -softplus(-logits[r]);
    log_tails[r] = -softplus(logits[r]);
  }
  ColumnJacobian out{Matrix(n, n), std::vector<double>(n, 0.0)};
  double log_total_tails = 0.0;
  for (double v : log_tails) log_total_tails += v;

  if (mode == ScanMode::StopProcess) {
    double log_survive = 0.0;
    std::vector<std::size_t> earlier;
    for (int m = 0; m < 2 * length; ++m) {
      const auto row = static_cast<std::size_t>(delta_to_row(scan_delta(m), length));
      const double p = std::exp(log_heads[row] + log_survive);
      out.probs(row, row) = p * (1.0 - sig[row]);
      for (std::size_t k : earlier) out.probs(row, k) = -sig[k] * p;
      earlier.push_back(row);
      log_survive += log_tails[row];
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = std::exp(log_heads[r] + log_total_tails - log_tails[r]);
      for (std::size_t k = 0; k < n; ++k) out.probs(r, k) = k == r ? p * (1.0 - sig[r]) : -sig[k] * p;
    }
  }
  const double residual = std::exp(log_total_tails);
  for (std::size_t k = 0; k < n; ++k) out.residual[k] = -sig[k] * residual;
  return out;
}

// ---------------------------------------------------------------------------

enum class BaselineKind { Olsk, OlskExtended, Ablation };

// Ordered delta support of the baseline categorical pointer movements.
inline std::vector<int> baseline_support(BaselineKind kind, int length) {
  if (length < 1) throw std::invalid_argument("baseline_support: length < 1");
  std::vector<int> out;
  switch (kind) {
    case BaselineKind::Olsk: out = {-1, 0, 1}; break;
    case BaselineKind::OlskExtended:
      for (int d = -length; d <= length; ++d) out.push_back(d);
      break;
    case BaselineKind::Ablation:
      for (int d = -length; d <= length; ++d)
        if (d != 0) out.push_back(d);
      break;
  }
  return out;
}

}  // namespace flowsim::pointer
