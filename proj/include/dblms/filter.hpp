#pragma once

// Delayed-block LMS engine. One code path covers LMS (D=0, L=1), DLMS (L=1),
// BLMS (D=0) and the general delayed-block case.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dblms/errors.hpp"

namespace dblms {

enum class AlgorithmKind { lms, dlms, blms, dblms };

inline std::string_view to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::lms: return "LMS";
    case AlgorithmKind::dlms: return "DLMS";
    case AlgorithmKind::blms: return "BLMS";
    case AlgorithmKind::dblms: return "DBLMS";
  }
  return "DBLMS";
}

/// Structural parameters (N, D, L) plus the raw step size mu. The effective
/// step size used by every predictor is mu / L.
struct FilterSpec {
  std::size_t n_taps{1};
  std::size_t delay{0};
  std::size_t block_size{1};
  double step_size{0.0};

  double effective_step() const {
    return step_size / static_cast<double>(block_size);
  }
  std::size_t speedup() const { return (delay + 1) * block_size; }

  void validate() const {
    if (n_taps < 1) throw ConfigError("n_taps must be >= 1");
    if (block_size < 1) throw ConfigError("block_size must be >= 1");
    // mu == 0 is accepted as a frozen filter; negative or NaN is not.
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) {
      throw ConfigError("step_size must be a finite value >= 0");
    }
  }

  static FilterSpec with_effective_step(std::size_t n_taps, std::size_t delay,
                                        std::size_t block_size,
                                        double effective_step) {
    FilterSpec spec{n_taps, delay, block_size,
                    effective_step * static_cast<double>(block_size)};
    spec.validate();
    return spec;
  }
};

/// Tag for the configuration; the engine path is identical for all four.
inline AlgorithmKind specialize(const FilterSpec& spec) {
  if (spec.delay == 0 && spec.block_size == 1) return AlgorithmKind::lms;
  if (spec.block_size == 1) return AlgorithmKind::dlms;
  if (spec.delay == 0) return AlgorithmKind::blms;
  return AlgorithmKind::dblms;
}

enum class AdaptStatus {
  filling,   ///< fewer than D blocks consumed, no update applied
  updated,   ///< the D-delayed block was applied to the coefficients
  diverged,  ///< coefficients left the finite range; updates are frozen
};

/// Coefficient magnitude treated as divergence.
inline constexpr double kDivergenceLimit = 1e12;

// sum of a[i] * b[-i] for i < n. Four fixed partial sums so the compiler can
// vectorize while the summation order stays the same on every run.
inline double reversed_dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    s0 += a[i] * b[-k];
    s1 += a[i + 1] * b[-k - 1];
    s2 += a[i + 2] * b[-k - 2];
    s3 += a[i + 3] * b[-k - 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[-static_cast<std::ptrdiff_t>(i)];
  return (s0 + s1) + (s2 + s3);
}

/// Coefficients, input delay line and the D-deep pipeline of pending
/// (input window, error block) pairs for one adaptive filter.
class FilterState {
 public:
  explicit FilterState(const FilterSpec& spec,
                       std::span<const double> initial = {})
      : n_taps_(spec.n_taps),
        delay_(spec.delay),
        block_size_(spec.block_size),
        coefficients_(spec.n_taps, 0.0),
        window_(spec.n_taps - 1 + spec.block_size, 0.0),
        slots_(spec.delay + 1) {
    spec.validate();
    if (!initial.empty()) {
      if (initial.size() != n_taps_) {
        throw ConfigError("initial coefficient vector must have n_taps entries");
      }
      std::copy(initial.begin(), initial.end(), coefficients_.begin());
    }
    for (auto& slot : slots_) {
      slot.window.assign(window_.size(), 0.0);
      slot.error.assign(block_size_, 0.0);
    }
  }

  std::span<const double> coefficients() const { return coefficients_; }

  /// Most recent N-1+L input samples, oldest first.
  std::span<const double> input_history() const { return window_; }

  std::size_t block_counter() const { return block_counter_; }
  std::uint64_t sample_index() const {
    return static_cast<std::uint64_t>(block_counter_) * block_size_;
  }
  std::size_t pending_count() const {
    return std::min<std::size_t>(pushed_ - applied_, delay_);
  }
  bool diverged() const { return diverged_; }

 private:
  struct PendingBlock {
    std::vector<double> window;
    std::vector<double> error;
  };

  void check_matches(const FilterSpec& spec) const {
    if (spec.n_taps != n_taps_ || spec.delay != delay_ ||
        spec.block_size != block_size_) {
      throw ConfigError("filter state was created for a different (N, D, L)");
    }
  }

  void check_block(std::span<const double> block, const char* name) const {
    if (block.size() != block_size_) {
      throw ConfigError(std::string(name) + " block has " +
                        std::to_string(block.size()) + " samples, expected " +
                        std::to_string(block_size_));
    }
  }

  void push_input(std::span<const double> input) {
    const std::size_t keep = n_taps_ - 1;
    std::copy(window_.end() - static_cast<std::ptrdiff_t>(keep), window_.end(),
              window_.begin());
    std::copy(input.begin(), input.end(),
              window_.begin() + static_cast<std::ptrdiff_t>(keep));
  }

  void convolve(std::span<double> output) const {
    const std::size_t base = n_taps_ - 1;
    for (std::size_t j = 0; j < block_size_; ++j) {
      const double* x = window_.data() + base + j;
      output[j] = reversed_dot(coefficients_.data(), x, n_taps_);
    }
  }

  void apply(const PendingBlock& block, double mu_hat) {
    const std::size_t base = n_taps_ - 1;
    for (std::size_t j = 0; j < block_size_; ++j) {
      const double scaled = mu_hat * block.error[j];
      const double* x = block.window.data() + base + j;
      for (std::size_t i = 0; i < n_taps_; ++i) {
        coefficients_[i] += scaled * x[-static_cast<std::ptrdiff_t>(i)];
      }
    }
    for (double w : coefficients_) {
      if (!std::isfinite(w) || std::abs(w) > kDivergenceLimit) {
        diverged_ = true;
        break;
      }
    }
  }

  std::size_t n_taps_;
  std::size_t delay_;
  std::size_t block_size_;
  std::vector<double> coefficients_;
  std::vector<double> window_;
  std::vector<PendingBlock> slots_;  // ring of D+1: the current block plus D pending
  std::size_t block_counter_{0};
  std::size_t pushed_{0};
  std::size_t applied_{0};
  bool diverged_{false};

  friend void filter_block(FilterState&, const FilterSpec&,
                           std::span<const double>, std::span<double>);
  friend AdaptStatus adapt_block(FilterState&, const FilterSpec&,
                                 std::span<const double>,
                                 std::span<const double>,
                                 std::span<const double>, std::span<double>,
                                 std::span<double>);
};

/// y_j = w . [x_j, x_{j-1}, ..., x_{j-N+1}] over the block, zero pre-history.
/// Advances the delay line by L samples; never touches the coefficients.
inline void filter_block(FilterState& state, const FilterSpec& spec,
                         std::span<const double> input,
                         std::span<double> output) {
  state.check_matches(spec);
  state.check_block(input, "input");
  if (output.size() != state.block_size_) {
    throw ConfigError("output span must hold exactly L samples");
  }
  state.push_input(input);
  state.convolve(output);
}

inline std::vector<double> filter_block(FilterState& state,
                                        const FilterSpec& spec,
                                        std::span<const double> input) {
  std::vector<double> out(spec.block_size);
  filter_block(state, spec, input, out);
  return out;
}

/// One block iteration: output and error e_k = d_k + z_k - y_k with the current
/// coefficients, then w += (mu/L) X_{k-D}^T e_{k-D} once D blocks are queued.
/// The error written out is the current (undelayed) block's error.
inline AdaptStatus adapt_block(FilterState& state, const FilterSpec& spec,
                               std::span<const double> input,
                               std::span<const double> desired,
                               std::span<const double> noise,
                               std::span<double> output,
                               std::span<double> error) {
  state.check_matches(spec);
  state.check_block(input, "input");
  state.check_block(desired, "desired");
  state.check_block(noise, "noise");
  if (output.size() != state.block_size_ || error.size() != state.block_size_) {
    throw ConfigError("output and error spans must hold exactly L samples");
  }

  state.push_input(input);
  state.convolve(output);
  for (std::size_t j = 0; j < state.block_size_; ++j) {
    error[j] = desired[j] + noise[j] - output[j];
  }

  const std::size_t ring = state.slots_.size();
  auto& slot = state.slots_[state.block_counter_ % ring];
  std::copy(state.window_.begin(), state.window_.end(), slot.window.begin());
  std::copy(error.begin(), error.end(), slot.error.begin());
  ++state.pushed_;

  AdaptStatus status = AdaptStatus::filling;
  if (state.block_counter_ >= state.delay_) {
    const auto& delayed =
        state.slots_[(state.block_counter_ - state.delay_) % ring];
    ++state.applied_;
    if (!state.diverged_) {
      state.apply(delayed, spec.effective_step());
      status = AdaptStatus::updated;
    }
  }
  if (state.diverged_) status = AdaptStatus::diverged;
  ++state.block_counter_;
  return status;
}

struct AdaptResult {
  std::vector<double> output;
  std::vector<double> error;
  AdaptStatus status{AdaptStatus::filling};
};

inline AdaptResult adapt_block(FilterState& state, const FilterSpec& spec,
                               std::span<const double> input,
                               std::span<const double> desired,
                               std::span<const double> noise) {
  AdaptResult r{std::vector<double>(spec.block_size),
                std::vector<double>(spec.block_size), AdaptStatus::filling};
  r.status = adapt_block(state, spec, input, desired, noise, r.output, r.error);
  return r;
}

}  // namespace dblms
