#pragma once

// JSON experiment configuration: sections filter, statistics, experiment and
// sweep. Every key is checked before any computation starts; unknown keys are
// rejected so a typo cannot silently fall back to a default.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dblms/analysis.hpp"
#include "dblms/errors.hpp"
#include "dblms/simulation.hpp"

namespace dblms::cli {

using nlohmann::json;

enum class StepKind {
  optimal,        ///< "opt": half the critical step
  effective,      ///< mu_hat given directly
  raw,            ///< mu given, mu_hat = mu / L
  crit_fraction,  ///< mu_hat = value * mu_hat_crit
};

struct StepChoice {
  StepKind kind{StepKind::optimal};
  double value{0.0};

  double effective_step(std::size_t n, std::size_t d, std::size_t l,
                        const EigenStats& stats) const {
    switch (kind) {
      case StepKind::optimal: return optimal_step_size(n, d, l, stats);
      case StepKind::effective: return value;
      case StepKind::raw: return value / static_cast<double>(l);
      case StepKind::crit_fraction:
        return value * critical_step_size(n, d, l, stats);
    }
    return value;
  }
};

struct DelayBlock {
  std::size_t delay{0};
  std::size_t block_size{1};
};

enum class SweepAxis { delay, block_size };

struct SweepSettings {
  SweepAxis axis{SweepAxis::delay};
  std::size_t n_taps{32};
  std::vector<std::size_t> values;      ///< swept axis
  std::vector<std::size_t> companions;  ///< fixed value of the other axis, one file each
  double grid_fraction{0.0265};
  double max_fraction{1.5};
  std::size_t n_trials{100};
  std::optional<std::size_t> n_samples;
};

struct Config {
  std::size_t n_taps{32};
  std::vector<DelayBlock> pairs;
  StepChoice step;

  EigenStats stats;
  std::optional<double> min_mse;

  std::size_t plant_taps{0};
  double noise_power_db{-60.0};
  std::optional<std::size_t> n_trials;
  std::optional<std::size_t> n_samples;
  std::uint64_t seed{1};
  double steady_state_window{0.2};
  std::size_t workers{0};

  SweepSettings sweep;

  double noise_variance() const {
    if (std::isinf(noise_power_db)) return 0.0;
    return std::pow(10.0, noise_power_db / 10.0);
  }

  /// Experiment template for one (D, L) pair at the configured step size.
  ExperimentConfig experiment(std::size_t d, std::size_t l,
                              std::size_t default_trials = 500) const {
    ExperimentConfig e;
    const double mu_hat = step.effective_step(n_taps, d, l, stats);
    e.filter = FilterSpec::with_effective_step(n_taps, d, l, mu_hat);
    e.plant_taps = plant_taps;
    e.noise_power_db = noise_power_db;
    e.n_trials = n_trials.value_or(default_trials);
    e.n_samples = n_samples.value_or(default_sample_count(n_taps, d, l));
    e.seed = seed;
    e.steady_state_window = steady_state_window;
    e.workers = workers;
    e.validate();
    return e;
  }
};

/// Sweep trial length in whole blocks: eight times N + 2S, and at least 2000
/// samples. Near the bound the transient stalls close to 0 dB, and shorter
/// runs read that as divergence.
inline std::size_t default_sweep_samples(std::size_t n_taps, std::size_t delay,
                                         std::size_t block_size) {
  const std::size_t s = (delay + 1) * block_size;
  const std::size_t n = std::max<std::size_t>(2000, 8 * (n_taps + 2 * s));
  return (n + block_size - 1) / block_size * block_size;
}

namespace detail {

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline std::size_t get_count(const json& v, const std::string& name,
                             std::size_t min_value) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw ConfigError(name + " must be an integer");
  }
  const auto i = v.get<std::int64_t>();
  if (i < static_cast<std::int64_t>(min_value)) {
    throw ConfigError(name + " must be >= " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(i);
}

inline double get_real(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(name + " must be a number");
  return v.get<double>();
}

inline std::vector<std::size_t> get_counts(const json& v,
                                           const std::string& name,
                                           std::size_t min_value) {
  if (!v.is_array()) throw ConfigError(name + " must be an array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(get_count(e, name, min_value));
  return out;
}

inline StepChoice parse_step(const json& f) {
  int given = 0;
  StepChoice s;
  if (f.contains("effective_step_size")) {
    ++given;
    const auto& v = f["effective_step_size"];
    if (v.is_string()) {
      if (v.get<std::string>() != "opt") {
        throw ConfigError("effective_step_size must be a number or \"opt\"");
      }
      s = {StepKind::optimal, 0.0};
    } else {
      s = {StepKind::effective, get_real(v, "effective_step_size")};
    }
  }
  if (f.contains("step_size")) {
    ++given;
    s = {StepKind::raw, get_real(f["step_size"], "step_size")};
  }
  if (f.contains("critical_fraction")) {
    ++given;
    s = {StepKind::crit_fraction,
         get_real(f["critical_fraction"], "critical_fraction")};
  }
  if (given > 1) {
    throw ConfigError(
        "give only one of effective_step_size, step_size, critical_fraction");
  }
  if (!(s.value >= 0.0) || !std::isfinite(s.value)) {
    throw ConfigError("step size must be finite and >= 0");
  }
  return s;
}

inline void parse_filter(const json& f, Config& c) {
  check_keys(f, "filter",
             {"n_taps", "delay", "block_size", "pairs", "effective_step_size",
              "step_size", "critical_fraction"});
  if (f.contains("n_taps")) c.n_taps = get_count(f["n_taps"], "filter.n_taps", 1);
  if (f.contains("pairs") && (f.contains("delay") || f.contains("block_size"))) {
    throw ConfigError("filter.pairs cannot be combined with delay/block_size");
  }
  if (f.contains("pairs")) {
    if (!f["pairs"].is_array()) throw ConfigError("filter.pairs must be an array");
    for (const auto& p : f["pairs"]) {
      if (!p.is_array() || p.size() != 2) {
        throw ConfigError("each filter.pairs entry must be [delay, block_size]");
      }
      c.pairs.push_back({get_count(p[0], "pair delay", 0),
                         get_count(p[1], "pair block_size", 1)});
    }
  } else {
    DelayBlock one;
    if (f.contains("delay")) one.delay = get_count(f["delay"], "filter.delay", 0);
    if (f.contains("block_size")) {
      one.block_size = get_count(f["block_size"], "filter.block_size", 1);
    }
    c.pairs.push_back(one);
  }
  c.step = parse_step(f);
}

inline void parse_statistics(const json& s, Config& c) {
  check_keys(s, "statistics", {"sigma2", "rho", "kurtosis", "eigenvalues", "min_mse"});
  if (s.contains("eigenvalues")) {
    if (s.contains("sigma2") || s.contains("rho")) {
      throw ConfigError("statistics.eigenvalues replaces sigma2 and rho");
    }
    std::vector<double> ev;
    if (!s["eigenvalues"].is_array()) throw ConfigError("statistics.eigenvalues must be an array");
    for (const auto& e : s["eigenvalues"]) ev.push_back(get_real(e, "eigenvalue"));
    c.stats = EigenStats::from_eigenvalues(ev);
  }
  if (s.contains("sigma2")) c.stats.sigma2 = get_real(s["sigma2"], "statistics.sigma2");
  if (s.contains("rho")) c.stats.rho = get_real(s["rho"], "statistics.rho");
  if (s.contains("kurtosis")) {
    c.stats.kurtosis = get_real(s["kurtosis"], "statistics.kurtosis");
  }
  if (s.contains("min_mse")) {
    c.min_mse = get_real(s["min_mse"], "statistics.min_mse");
    if (!(*c.min_mse >= 0.0)) throw ConfigError("statistics.min_mse must be >= 0");
  }
  c.stats.validate();
}

inline void parse_experiment(const json& e, Config& c) {
  check_keys(e, "experiment",
             {"plant_taps", "noise_power_db", "n_trials", "n_samples", "seed",
              "steady_state_window", "workers"});
  if (e.contains("plant_taps")) c.plant_taps = get_count(e["plant_taps"], "experiment.plant_taps", 1);
  if (e.contains("noise_power_db")) {
    // null means a noiseless run
    c.noise_power_db = e["noise_power_db"].is_null()
                           ? -std::numeric_limits<double>::infinity()
                           : get_real(e["noise_power_db"], "experiment.noise_power_db");
  }
  if (e.contains("n_trials")) c.n_trials = get_count(e["n_trials"], "experiment.n_trials", 1);
  if (e.contains("n_samples")) c.n_samples = get_count(e["n_samples"], "experiment.n_samples", 1);
  if (e.contains("seed")) {
    if (!e["seed"].is_number_unsigned() && !e["seed"].is_number_integer()) {
      throw ConfigError("experiment.seed must be an unsigned integer");
    }
    if (e["seed"].is_number_integer() && e["seed"].get<std::int64_t>() < 0) {
      throw ConfigError("experiment.seed must be >= 0");
    }
    c.seed = e["seed"].get<std::uint64_t>();
  }
  if (e.contains("steady_state_window")) {
    c.steady_state_window = get_real(e["steady_state_window"], "experiment.steady_state_window");
    if (!(c.steady_state_window > 0.0 && c.steady_state_window <= 0.5)) {
      throw ConfigError("experiment.steady_state_window must lie in (0, 0.5]");
    }
  }
  if (e.contains("workers")) c.workers = get_count(e["workers"], "experiment.workers", 0);
}

inline void parse_sweep(const json& s, Config& c) {
  check_keys(s, "sweep",
             {"axis", "n_taps", "values", "companions", "grid_fraction",
              "max_fraction", "n_trials", "n_samples"});
  SweepSettings& w = c.sweep;
  if (s.contains("axis")) {
    const auto& a = s["axis"];
    if (a == "delay") {
      w.axis = SweepAxis::delay;
    } else if (a == "block_size") {
      w.axis = SweepAxis::block_size;
    } else {
      throw ConfigError("sweep.axis must be \"delay\" or \"block_size\"");
    }
  }
  const std::size_t axis_min = w.axis == SweepAxis::delay ? 0 : 1;
  if (s.contains("n_taps")) w.n_taps = get_count(s["n_taps"], "sweep.n_taps", 1);
  if (s.contains("values")) w.values = get_counts(s["values"], "sweep.values", axis_min);
  if (s.contains("companions")) {
    w.companions = get_counts(s["companions"], "sweep.companions", 1 - axis_min);
  }
  if (s.contains("grid_fraction")) {
    w.grid_fraction = get_real(s["grid_fraction"], "sweep.grid_fraction");
    if (!(w.grid_fraction > 0.0 && w.grid_fraction < 1.0)) {
      throw ConfigError("sweep.grid_fraction must lie in (0, 1)");
    }
  }
  if (s.contains("max_fraction")) {
    w.max_fraction = get_real(s["max_fraction"], "sweep.max_fraction");
    if (!(w.max_fraction > 0.0)) throw ConfigError("sweep.max_fraction must be > 0");
  }
  if (s.contains("n_trials")) w.n_trials = get_count(s["n_trials"], "sweep.n_trials", 1);
  if (s.contains("n_samples")) w.n_samples = get_count(s["n_samples"], "sweep.n_samples", 1);
}

inline void default_sweep_axes(SweepSettings& w, bool values_given,
                               bool companions_given) {
  if (!values_given) {
    w.values.clear();
    if (w.axis == SweepAxis::delay) {
      for (std::size_t d = 0; d < 32; ++d) w.values.push_back(d);
    } else {
      for (std::size_t l = 1; l <= 32; ++l) w.values.push_back(l);
    }
  }
  if (!companions_given) {
    w.companions = w.axis == SweepAxis::delay ? std::vector<std::size_t>{1, 4, 32}
                                              : std::vector<std::size_t>{0, 3, 31};
  }
}

}  // namespace detail

/// Default configuration: N = 32, one LMS pair at mu_hat_opt, white unit input,
/// -60 dB noise, the N = 32 bound-versus-D sweep.
inline Config default_config() {
  Config c;
  c.pairs.push_back({0, 1});
  detail::default_sweep_axes(c.sweep, false, false);
  return c;
}

inline Config parse_config(const json& root) {
  detail::check_keys(root, "config", {"filter", "statistics", "experiment", "sweep"});
  Config c;
  if (root.contains("filter")) {
    detail::parse_filter(root["filter"], c);
  } else {
    c.pairs.push_back({0, 1});
  }
  if (root.contains("statistics")) detail::parse_statistics(root["statistics"], c);
  if (root.contains("experiment")) detail::parse_experiment(root["experiment"], c);
  bool values_given = false, companions_given = false;
  if (root.contains("sweep")) {
    detail::parse_sweep(root["sweep"], c);
    values_given = root["sweep"].contains("values");
    companions_given = root["sweep"].contains("companions");
  }
  detail::default_sweep_axes(c.sweep, values_given, companions_given);
  for (const auto& p : c.pairs) {
    FilterSpec{c.n_taps, p.delay, p.block_size, 0.0}.validate();
  }
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

}  // namespace dblms::cli
