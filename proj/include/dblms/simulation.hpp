#pragma once

// Monte Carlo system identification: unit-norm Gaussian plant, white Gaussian
// input, additive white Gaussian measurement noise, ensemble averaging of the
// per-sample squared error and the estimators extracted from the averaged
// curve.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dblms/analysis.hpp"
#include "dblms/errors.hpp"
#include "dblms/filter.hpp"
#include "dblms/parallel.hpp"
#include "dblms/rng.hpp"

namespace dblms {

struct ExperimentConfig {
  FilterSpec filter;
  std::size_t plant_taps{0};  ///< 0 means "same as filter.n_taps"
  double noise_power_db{-60.0};  ///< -infinity for a noiseless run
  std::size_t n_trials{500};
  std::size_t n_samples{4000};
  std::uint64_t seed{1};
  double steady_state_window{0.2};  ///< trailing fraction of the curve
  std::size_t workers{0};           ///< 0 = one per hardware thread

  std::size_t plant_order() const {
    return plant_taps == 0 ? filter.n_taps : plant_taps;
  }

  double noise_variance() const {
    if (std::isinf(noise_power_db) && noise_power_db < 0) return 0.0;
    return std::pow(10.0, noise_power_db / 10.0);
  }

  void validate() const {
    filter.validate();
    if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (!(steady_state_window > 0.0 && steady_state_window <= 0.5)) {
      throw ConfigError("steady_state_window must lie in (0, 0.5]");
    }
    if (std::isnan(noise_power_db) ||
        (std::isinf(noise_power_db) && noise_power_db > 0)) {
      throw ConfigError("noise_power_db must be finite or -infinity");
    }
  }
};

/// Trial length used when a configuration does not pin one: long enough for
/// the convergence point to sit well before the trailing steady-state window.
inline std::size_t default_sample_count(std::size_t n_taps, std::size_t delay,
                                        std::size_t block_size) {
  const std::size_t s = (delay + 1) * block_size;
  const std::size_t n = std::max<std::size_t>(4000, 40 * (n_taps + 2 * s));
  return (n + block_size - 1) / block_size * block_size;
}

/// Gaussian coefficients scaled to unit Euclidean norm.
inline std::vector<double> make_plant(std::size_t n_taps, std::uint64_t seed) {
  if (n_taps < 1) throw ConfigError("plant needs at least one tap");
  auto gen = make_stream(seed, 0, StreamRole::plant);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> w(n_taps);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& v : w) {
      v = gauss(gen);
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : w) v *= inv;
  return w;
}

struct TrialResult {
  std::vector<double> squared_error;  ///< current (undelayed) e_n^2 per sample
  bool diverged{false};
  std::size_t diverged_at{0};  ///< first sentinel sample when diverged
};

/// Marks samples after divergence; counts as "above any threshold".
inline constexpr double kDivergedSentinel = std::numeric_limits<double>::infinity();

namespace detail {

inline TrialResult run_trial_with_plant(const ExperimentConfig& config,
                                        std::uint64_t trial_index,
                                        std::span<const double> plant,
                                        const std::atomic<bool>* abort = nullptr) {
  const FilterSpec& spec = config.filter;
  const std::size_t l = spec.block_size;
  const std::size_t n = config.n_samples;
  const std::size_t blocks = (n + l - 1) / l;
  const std::size_t total = blocks * l;
  const std::size_t p = plant.size();

  auto input_gen = make_stream(config.seed, trial_index, StreamRole::input);
  auto noise_gen = make_stream(config.seed, trial_index, StreamRole::noise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::normal_distribution<double> noise_gauss(0.0, 1.0);
  const double noise_std = std::sqrt(config.noise_variance());

  // Stationary start: `lead` samples precede sample 0 so that both the plant
  // and the filter see a full input history. They only fill the delay line.
  const std::size_t history = std::max(p, spec.n_taps) - 1;
  const std::size_t lead = (history + l - 1) / l * l;
  std::vector<double> x(lead + total);
  for (auto& v : x) v = gauss(input_gen);
  std::vector<double> z(total, 0.0);
  if (noise_std > 0.0) {
    for (auto& v : z) v = noise_std * noise_gauss(noise_gen);
  }
  std::vector<double> d(total);
  for (std::size_t i = 0; i < total; ++i) {
    d[i] = reversed_dot(plant.data(), x.data() + lead + i, p);
  }

  TrialResult result;
  result.squared_error.assign(n, 0.0);
  FilterState state(spec);
  std::vector<double> y(l), e(l);
  for (std::size_t off = 0; off < lead; off += l) {
    filter_block(state, spec, std::span(x).subspan(off, l), y);
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    if (abort && abort->load(std::memory_order_relaxed)) break;
    const std::size_t off = b * l;
    const auto status = adapt_block(state, spec, std::span(x).subspan(lead + off, l),
                                     std::span(d).subspan(off, l),
                                     std::span(z).subspan(off, l), y, e);
    for (std::size_t j = 0; j < l && off + j < n; ++j) {
      result.squared_error[off + j] = e[j] * e[j];
    }
    if (status == AdaptStatus::diverged) {
      result.diverged = true;
      result.diverged_at = std::min(n, off + l);
      std::fill(result.squared_error.begin() +
                    static_cast<std::ptrdiff_t>(result.diverged_at),
                result.squared_error.end(), kDivergedSentinel);
      break;
    }
  }
  return result;
}

struct Averaged {
  std::vector<double> curve;
  std::size_t used{0};
  std::size_t diverged{0};
};

// Averages trial curves in trial order. With include_diverged the sentinel
// samples enter the mean (the stability sweep wants them); otherwise
// diverged trials are dropped and only counted.
inline Averaged average_trials(const ExperimentConfig& config,
                               bool include_diverged,
                               bool stop_on_divergence) {
  config.validate();
  const auto plant = make_plant(config.plant_order(), config.seed);
  std::vector<TrialResult> trials(config.n_trials);
  std::atomic<bool> abort{false};
  parallel_for(config.n_trials, config.workers, [&](std::size_t t) {
    if (abort.load(std::memory_order_relaxed)) return;
    trials[t] = run_trial_with_plant(config, t, plant,
                                     stop_on_divergence ? &abort : nullptr);
    if (stop_on_divergence && trials[t].diverged) abort.store(true);
  });

  Averaged avg;
  avg.curve.assign(config.n_samples, 0.0);
  if (stop_on_divergence && abort.load()) {
    std::fill(avg.curve.begin(), avg.curve.end(), kDivergedSentinel);
    avg.diverged = 1;
    avg.used = config.n_trials;
    return avg;
  }
  for (const auto& tr : trials) {
    if (tr.diverged) {
      ++avg.diverged;
      if (!include_diverged) continue;
    }
    ++avg.used;
    for (std::size_t i = 0; i < avg.curve.size(); ++i) {
      avg.curve[i] += tr.squared_error[i];
    }
  }
  if (avg.used > 0) {
    const double inv = 1.0 / static_cast<double>(avg.used);
    for (auto& v : avg.curve) v *= inv;
  }
  return avg;
}

inline std::size_t steady_state_begin(std::size_t n, double window) {
  const auto len = static_cast<std::size_t>(
      std::ceil(window * static_cast<double>(n)));
  return n - std::clamp<std::size_t>(len, 1, n);
}

}  // namespace detail

/// One trial; deterministic in (config.seed, trial_index).
inline TrialResult run_trial(const ExperimentConfig& config,
                             std::uint64_t trial_index) {
  config.validate();
  const auto plant = make_plant(config.plant_order(), config.seed);
  return detail::run_trial_with_plant(config, trial_index, plant);
}

/// Half-open sample interval [first, last] used by the two-point slope.
struct SampleRegion {
  std::size_t first{0};
  std::size_t last{0};
};

/// Two-point slope (b2 - b1) / (a2 - a1) in dB/sample.
inline double measure_slope(std::span<const double> curve_db,
                            SampleRegion region) {
  if (region.first >= region.last || region.last >= curve_db.size()) {
    throw std::out_of_range("slope region lies outside the curve");
  }
  return (curve_db[region.last] - curve_db[region.first]) /
         static_cast<double>(region.last - region.first);
}

/// Default region: 10% to 60% of the way from the start to `convergence`.
inline SampleRegion default_slope_region(std::size_t convergence) {
  return {convergence / 10, convergence * 6 / 10};
}

/// Centred moving average over 2L samples (linear MSE), returned in dB.
inline std::vector<double> smooth_db(std::span<const double> curve,
                                     std::size_t block_size) {
  const std::size_t n = curve.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + curve[i];
  std::vector<double> out(n);
  const std::size_t half = block_size;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half);
    out[i] = 10.0 * std::log10((prefix[hi] - prefix[lo]) /
                               static_cast<double>(hi - lo));
  }
  return out;
}

struct EnsembleResult {
  std::vector<double> mse_curve;     ///< ensemble-averaged e_n^2
  std::vector<double> mse_curve_db;  ///< 10 log10 of mse_curve
  std::vector<double> smoothed_db;   ///< 2L moving average, dB
  double steady_state_mse{0.0};
  double steady_state_mse_db{0.0};
  double min_mse{0.0};  ///< Wiener floor for the known plant and noise
  double excess_mse{0.0};
  double simulated_misadjustment{0.0};  ///< NaN when min_mse is zero
  double measured_slope_db_per_sample{0.0};
  SampleRegion slope_region;
  std::size_t settling_sample{0};     ///< smoothed curve stays within 1 dB from here
  std::size_t convergence_sample{0};  ///< transient line meets the steady-state level
  double diverged_fraction{0.0};
};

/// Minimum MSE of a matched-or-shorter filter identifying `plant` from unit
/// white input, through the block normal equations.
inline double system_identification_min_mse(std::span<const double> plant,
                                            std::size_t n_taps,
                                            std::size_t block_size,
                                            double noise_variance) {
  const auto l = static_cast<double>(block_size);
  const auto n = static_cast<Eigen::Index>(n_taps);
  Eigen::MatrixXd r = l * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < plant.size(); ++i) {
    energy += plant[i] * plant[i];
    if (static_cast<Eigen::Index>(i) < n) p(static_cast<Eigen::Index>(i)) = l * plant[i];
  }
  const double desired_energy = l * (energy + noise_variance);
  return std::max(0.0, wiener_and_min_mse(r, p, desired_energy, block_size).min_mse);
}

inline EnsembleResult run_ensemble(const ExperimentConfig& config) {
  const auto avg = detail::average_trials(config, false, false);
  if (avg.used == 0) {
    throw EnsembleError("all " + std::to_string(config.n_trials) +
                        " trials diverged");
  }
  const std::size_t n = config.n_samples;
  EnsembleResult r;
  r.mse_curve = avg.curve;
  r.mse_curve_db.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.mse_curve_db[i] = 10.0 * std::log10(r.mse_curve[i]);
  }
  r.diverged_fraction =
      static_cast<double>(avg.diverged) / static_cast<double>(config.n_trials);

  const std::size_t tail = detail::steady_state_begin(n, config.steady_state_window);
  double acc = 0.0;
  for (std::size_t i = tail; i < n; ++i) acc += r.mse_curve[i];
  r.steady_state_mse = acc / static_cast<double>(n - tail);
  r.steady_state_mse_db = 10.0 * std::log10(r.steady_state_mse);

  const auto plant = make_plant(config.plant_order(), config.seed);
  r.min_mse = system_identification_min_mse(plant, config.filter.n_taps,
                                            config.filter.block_size,
                                            config.noise_variance());
  r.excess_mse = r.steady_state_mse - r.min_mse;
  r.simulated_misadjustment = r.min_mse > 0.0
                                  ? r.excess_mse / r.min_mse
                                  : std::numeric_limits<double>::quiet_NaN();

  r.smoothed_db = smooth_db(r.mse_curve, config.filter.block_size);
  std::vector<double> smoothed_lin(n);
  for (std::size_t i = 0; i < n; ++i) {
    smoothed_lin[i] = std::pow(10.0, r.smoothed_db[i] / 10.0);
  }
  r.settling_sample = settling_index(smoothed_lin, r.steady_state_mse, 1.0);
  r.convergence_sample = r.settling_sample;

  r.slope_region = default_slope_region(r.settling_sample);
  if (r.slope_region.first < r.slope_region.last && r.slope_region.last < n) {
    r.measured_slope_db_per_sample = measure_slope(r.smoothed_db, r.slope_region);
    // Least-squares line through the transient region, extended to the
    // steady-state level.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(r.slope_region.last - r.slope_region.first + 1);
    for (std::size_t i = r.slope_region.first; i <= r.slope_region.last; ++i) {
      const auto xi = static_cast<double>(i);
      sx += xi;
      sy += r.smoothed_db[i];
      sxx += xi * xi;
      sxy += xi * r.smoothed_db[i];
    }
    const double fit_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double fit_icpt = (sy - fit_slope * sx) / m;
    if (fit_slope < 0.0) {
      const double cross = (r.steady_state_mse_db - fit_icpt) / fit_slope;
      r.convergence_sample = static_cast<std::size_t>(
          std::clamp(std::round(cross), 0.0, static_cast<double>(n - 1)));
    }
  }
  return r;
}

struct StabilitySweepResult {
  double analytic_bound{0.0};
  double simulated_bound{std::numeric_limits<double>::quiet_NaN()};
  double grid_fraction{0.0265};
  bool with_noise{false};
  bool found{false};     ///< divergence seen before the sweep limit
  std::size_t steps{0};  ///< ensembles evaluated
};

/// True when any sample of the averaged curve's steady-state window is >= 1.
inline bool ensemble_diverges(const ExperimentConfig& config) {
  const auto avg = detail::average_trials(config, true, true);
  const std::size_t tail =
      detail::steady_state_begin(config.n_samples, config.steady_state_window);
  for (std::size_t i = tail; i < avg.curve.size(); ++i) {
    if (!(avg.curve[i] < 1.0)) return true;
  }
  return false;
}

/// Raises mu_hat in steps of grid_fraction * mu_hat_crit until the averaged
/// steady-state MSE reaches 1, or max_fraction * mu_hat_crit is passed.
inline StabilitySweepResult stability_sweep(const ExperimentConfig& config,
                                            bool with_noise,
                                            double grid_fraction = 0.0265,
                                            double max_fraction = 1.5) {
  config.validate();
  if (!(grid_fraction > 0.0 && grid_fraction < 1.0)) {
    throw ConfigError("grid_fraction must lie in (0, 1)");
  }
  const FilterSpec& base = config.filter;
  StabilitySweepResult res;
  res.grid_fraction = grid_fraction;
  res.with_noise = with_noise;
  res.analytic_bound = critical_step_size(base.n_taps, base.delay,
                                          base.block_size, EigenStats::white());
  const double step = grid_fraction * res.analytic_bound;
  const double limit = max_fraction * res.analytic_bound * (1.0 + 1e-12);

  ExperimentConfig trial_cfg = config;
  if (!with_noise) trial_cfg.noise_power_db = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1;; ++j) {
    const double mu_hat = static_cast<double>(j) * step;
    if (mu_hat > limit) break;
    trial_cfg.filter = FilterSpec::with_effective_step(base.n_taps, base.delay,
                                                       base.block_size, mu_hat);
    ++res.steps;
    if (ensemble_diverges(trial_cfg)) {
      res.simulated_bound = mu_hat;
      res.found = true;
      break;
    }
  }
  return res;
}

}  // namespace dblms
