#pragma once

// The six dblms subcommands. Each builds Tables and hands them to the writer;
// none of them plots.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dblms/analysis.hpp"
#include "dblms/cli/config.hpp"
#include "dblms/cli/output.hpp"
#include "dblms/simulation.hpp"

namespace dblms::cli {

enum class Command { predict, run, sweep, table2, fig_alpha, fig_bound };

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kUnstable = 3,      ///< a step size at or past the stability bound
  kAllDiverged = 4,   ///< an ensemble had no surviving trial
};

struct RunManifest {
  Command command{Command::predict};
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path output_dir{"."};
  std::optional<std::uint64_t> seed_override;
  OutputFormat format{OutputFormat::csv};
};

/// Worst exit code wins; 4 beats 3 beats 0.
inline int merge_exit(int a, int b) { return std::max(a, b); }

inline std::string pair_stem(const char* prefix, std::size_t n, std::size_t d,
                             std::size_t l) {
  return std::string(prefix) + "_N" + std::to_string(n) + "_D" +
         std::to_string(d) + "_L" + std::to_string(l);
}

inline std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

inline double to_db(double v) { return 10.0 * std::log10(v); }

/// Everything a run or table row needs for one (D, L) pair.
struct PairOutcome {
  ExperimentConfig experiment;
  EnsembleResult ensemble;
  std::optional<ConvergencePrediction> prediction;  ///< empty past the bound
  std::vector<double> predicted_curve;
  std::size_t predicted_convergence{0};
};

inline PairOutcome evaluate_pair(const Config& cfg, const DelayBlock& p,
                                 std::size_t default_trials = 500) {
  PairOutcome out;
  out.experiment = cfg.experiment(p.delay, p.block_size, default_trials);
  out.ensemble = run_ensemble(out.experiment);
  const auto& spec = out.experiment.filter;
  try {
    out.prediction = predict(spec, cfg.stats, out.ensemble.min_mse, 0.0);
    const auto plant = make_plant(out.experiment.plant_order(), cfg.seed);
    double modeled = 0.0;
    for (std::size_t i = 0; i < std::min(plant.size(), spec.n_taps); ++i) {
      modeled += plant[i] * plant[i];
    }
    out.predicted_curve =
        predict_mse_curve(spec, cfg.stats, out.ensemble.min_mse, 0.0,
                          modeled * cfg.stats.sigma2, out.experiment.n_samples);
    out.predicted_convergence = settling_index(
        out.predicted_curve, out.ensemble.min_mse + out.prediction->excess_mse, 1.0);
  } catch (const OutOfBoundError&) {
    out.prediction.reset();
  } catch (const PredictedDivergenceError&) {
    out.prediction.reset();
  }
  return out;
}

inline int cmd_predict(const Config& cfg, const RunManifest& m, std::ostream& log) {
  Table t{"predict",
          {"n_taps", "delay", "block_size", "algorithm", "step_size",
           "effective_step_size", "mu_hat_crit", "mu_hat_opt", "misadjustment",
           "min_mse", "excess_mse", "alpha", "tau_samples",
           "slope_db_per_sample"},
          {}};
  const double min_mse = cfg.min_mse.value_or(cfg.noise_variance());
  for (const auto& p : cfg.pairs) {
    const double mu_hat =
        cfg.step.effective_step(cfg.n_taps, p.delay, p.block_size, cfg.stats);
    const auto spec =
        FilterSpec::with_effective_step(cfg.n_taps, p.delay, p.block_size, mu_hat);
    ConvergencePrediction pr;
    try {
      pr = predict(spec, cfg.stats, min_mse, 0.0);
    } catch (const OutOfBoundError& e) {
      log << "dblms: N=" << cfg.n_taps << " D=" << p.delay << " L=" << p.block_size
          << ": effective step size " << format_number(e.step())
          << " is not below the stability bound " << format_number(e.bound()) << "\n";
      return kUnstable;
    }
    t.add({as_int(cfg.n_taps), as_int(p.delay), as_int(p.block_size),
           std::string(to_string(specialize(spec))), spec.step_size, mu_hat,
           pr.mu_hat_crit, pr.mu_hat_opt, pr.misadjustment, pr.min_mse,
           pr.excess_mse, pr.alpha, pr.tau_samples, pr.slope_db_per_sample});
  }
  write_table(t, m.output_dir, m.format);
  return kOk;
}

inline int cmd_run(const Config& cfg, const RunManifest& m, std::ostream& log) {
  Table summary{"run_summary",
                {"n_taps", "delay", "block_size", "algorithm",
                 "effective_step_size", "min_mse_db", "steady_state_db",
                 "predicted_steady_state_db", "simulated_misadjustment",
                 "predicted_misadjustment", "measured_slope_db_per_sample",
                 "predicted_slope_db_per_sample", "settling_sample",
                 "convergence_sample", "predicted_convergence_sample",
                 "diverged_fraction"},
                {}};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  int code = kOk;
  for (const auto& p : cfg.pairs) {
    PairOutcome o;
    try {
      o = evaluate_pair(cfg, p);
    } catch (const EnsembleError& e) {
      log << "dblms: N=" << cfg.n_taps << " D=" << p.delay << " L=" << p.block_size
          << ": " << e.what() << "\n";
      code = merge_exit(code, kAllDiverged);
      continue;
    }
    const auto& r = o.ensemble;
    const auto& spec = o.experiment.filter;
    if (!o.prediction) {
      log << "dblms: N=" << cfg.n_taps << " D=" << p.delay << " L=" << p.block_size
          << ": step size is outside the stability bound "
          << format_number(critical_step_size(spec.n_taps, spec.delay,
                                              spec.block_size, cfg.stats))
          << "; predictions omitted\n";
      code = merge_exit(code, kUnstable);
    }

    Table curve{pair_stem("run", cfg.n_taps, p.delay, p.block_size),
                {"sample_index", "simulated_mse_db", "predicted_mse_db",
                 "steady_state_db", "convergence_marker"},
                {}};
    for (std::size_t i = 0; i < r.mse_curve_db.size(); ++i) {
      curve.add({as_int(i), r.mse_curve_db[i],
                 o.prediction ? to_db(o.predicted_curve[i]) : nan,
                 r.steady_state_mse_db,
                 std::int64_t{i == r.convergence_sample ? 1 : 0}});
    }
    write_table(curve, m.output_dir, m.format);

    const auto& pr = o.prediction;
    summary.add({as_int(cfg.n_taps), as_int(p.delay), as_int(p.block_size),
                 std::string(to_string(specialize(spec))), spec.effective_step(),
                 to_db(r.min_mse), r.steady_state_mse_db,
                 pr ? to_db(r.min_mse + pr->excess_mse) : nan,
                 r.simulated_misadjustment, pr ? pr->misadjustment : nan,
                 r.measured_slope_db_per_sample,
                 pr ? pr->slope_db_per_sample : nan, as_int(r.settling_sample),
                 as_int(r.convergence_sample),
                 pr ? as_int(o.predicted_convergence) : std::int64_t{-1},
                 r.diverged_fraction});
  }
  if (!cfg.pairs.empty()) write_table(summary, m.output_dir, m.format);
  return code;
}

inline std::string sweep_stem(const char* prefix, const SweepSettings& s,
                              std::size_t companion) {
  return std::string(prefix) + "_N" + std::to_string(s.n_taps) +
         (s.axis == SweepAxis::delay ? "_L" : "_D") + std::to_string(companion);
}

inline DelayBlock sweep_point(const SweepSettings& s, std::size_t axis_value,
                              std::size_t companion) {
  return s.axis == SweepAxis::delay ? DelayBlock{axis_value, companion}
                                    : DelayBlock{companion, axis_value};
}

inline int cmd_sweep(const Config& cfg, const RunManifest& m, std::ostream& log) {
  const SweepSettings& s = cfg.sweep;
  for (std::size_t c : s.companions) {
    Table t{sweep_stem("sweep", s, c),
            {"axis_value", "analytic_bound", "simulated_bound_noiseless",
             "simulated_bound_noisy"},
            {}};
    for (std::size_t v : s.values) {
      const auto p = sweep_point(s, v, c);
      ExperimentConfig e;
      e.filter = FilterSpec{s.n_taps, p.delay, p.block_size, 0.0};
      e.plant_taps = cfg.plant_taps;
      e.noise_power_db = cfg.noise_power_db;
      e.n_trials = s.n_trials;
      e.n_samples = s.n_samples.value_or(
          default_sweep_samples(s.n_taps, p.delay, p.block_size));
      e.seed = cfg.seed;
      e.steady_state_window = cfg.steady_state_window;
      e.workers = cfg.workers;
      const auto quiet = stability_sweep(e, false, s.grid_fraction, s.max_fraction);
      const auto noisy = stability_sweep(e, true, s.grid_fraction, s.max_fraction);
      t.add({as_int(v), quiet.analytic_bound, quiet.simulated_bound,
             noisy.simulated_bound});
      log << "sweep N=" << s.n_taps << " D=" << p.delay << " L=" << p.block_size
          << " analytic=" << format_number(quiet.analytic_bound)
          << " noiseless=" << format_number(quiet.simulated_bound)
          << " noisy=" << format_number(noisy.simulated_bound) << "\n";
    }
    write_table(t, m.output_dir, m.format);
  }
  return kOk;
}

struct Table2Row {
  std::size_t n_taps;
  std::size_t delay;
  std::size_t block_size;
};

/// The twelve (N, D, L) rows: N = 32 with S = 32, then N = 16 with S = 12.
inline std::vector<Table2Row> table2_rows() {
  return {{32, 0, 32}, {32, 1, 16}, {32, 3, 8},  {32, 7, 4},
          {32, 15, 2}, {32, 31, 1}, {16, 0, 12}, {16, 1, 6},
          {16, 2, 4},  {16, 3, 3},  {16, 5, 2},  {16, 11, 1}};
}

inline int cmd_table2(const Config& base, const RunManifest& m, std::ostream& log) {
  Table t{"table2",
          {"n_taps", "speedup", "delay", "block_size", "estimated_misadjustment",
           "simulated_misadjustment", "estimated_slope_db_per_sample",
           "simulated_slope_db_per_sample", "convergence_sample",
           "diverged_fraction"},
          {}};
  int code = kOk;
  for (const auto& row : table2_rows()) {
    Config cfg = base;
    cfg.n_taps = row.n_taps;
    cfg.step = {StepKind::optimal, 0.0};
    const DelayBlock p{row.delay, row.block_size};
    PairOutcome o;
    try {
      o = evaluate_pair(cfg, p);
    } catch (const EnsembleError& e) {
      log << "dblms: table2 row N=" << row.n_taps << " D=" << row.delay
          << " L=" << row.block_size << ": " << e.what() << "\n";
      code = merge_exit(code, kAllDiverged);
      continue;
    }
    const auto& spec = o.experiment.filter;
    const double mu_hat = spec.effective_step();
    const double est_m = misadjustment(mu_hat, spec.n_taps, spec.delay,
                                       spec.block_size, cfg.stats);
    const double est_slope = slope(spec.delay, spec.block_size, mu_hat, cfg.stats);
    t.add({as_int(row.n_taps), as_int(spec.speedup()), as_int(row.delay),
           as_int(row.block_size), est_m, o.ensemble.simulated_misadjustment,
           est_slope, o.ensemble.measured_slope_db_per_sample,
           as_int(o.ensemble.convergence_sample), o.ensemble.diverged_fraction});
    log << "table2 N=" << row.n_taps << " D=" << row.delay << " L=" << row.block_size
        << " M=" << format_number(o.ensemble.simulated_misadjustment)
        << " slope=" << format_number(o.ensemble.measured_slope_db_per_sample) << "\n";
  }
  write_table(t, m.output_dir, m.format);
  return code;
}

/// Slope factor at mu_hat_opt versus D for L in {1, 4, 9, 16}, and versus L
/// for D in {0, 3, 8, 15}.
inline int cmd_fig_alpha(const Config& cfg, const RunManifest& m, std::ostream&) {
  const std::size_t n = cfg.n_taps;
  auto alpha_at = [&](std::size_t d, std::size_t l) {
    return slope_factor(d, l, optimal_step_size(n, d, l, cfg.stats), cfg.stats);
  };
  Table by_delay{"alpha_vs_delay_N" + std::to_string(n),
                 {"delay", "block_size", "alpha"}, {}};
  for (std::size_t l : {1, 4, 9, 16}) {
    for (std::size_t d = 0; d < 32; ++d) {
      by_delay.add({as_int(d), as_int(l), alpha_at(d, l)});
    }
  }
  Table by_block{"alpha_vs_block_size_N" + std::to_string(n),
                 {"block_size", "delay", "alpha"}, {}};
  for (std::size_t d : {0, 3, 8, 15}) {
    for (std::size_t l = 1; l <= 32; ++l) {
      by_block.add({as_int(l), as_int(d), alpha_at(d, l)});
    }
  }
  write_table(by_delay, m.output_dir, m.format);
  write_table(by_block, m.output_dir, m.format);
  return kOk;
}

/// Analytic critical step size along the sweep axis, one file per companion.
inline int cmd_fig_bound(const Config& cfg, const RunManifest& m, std::ostream&) {
  const SweepSettings& s = cfg.sweep;
  for (std::size_t c : s.companions) {
    Table t{sweep_stem("bound", s, c),
            {"axis_value", "analytic_bound", "optimal_step_size"}, {}};
    for (std::size_t v : s.values) {
      const auto p = sweep_point(s, v, c);
      const double crit = critical_step_size(s.n_taps, p.delay, p.block_size, cfg.stats);
      t.add({as_int(v), crit, 0.5 * crit});
    }
    write_table(t, m.output_dir, m.format);
  }
  return kOk;
}

/// Loads the config (or the defaults), applies the seed override and runs the
/// command. Configuration problems surface as ConfigError before any output.
inline int run_command(const RunManifest& m, std::ostream& log = std::cerr) {
  const bool needs_config = m.command == Command::predict ||
                            m.command == Command::run ||
                            m.command == Command::sweep;
  if (needs_config && !m.config_path) {
    throw ConfigError("this command requires --config");
  }
  Config cfg = m.config_path ? load_config(*m.config_path) : default_config();
  if (m.seed_override) cfg.seed = *m.seed_override;
  std::filesystem::create_directories(m.output_dir);
  switch (m.command) {
    case Command::predict: return cmd_predict(cfg, m, log);
    case Command::run: return cmd_run(cfg, m, log);
    case Command::sweep: return cmd_sweep(cfg, m, log);
    case Command::table2: return cmd_table2(cfg, m, log);
    case Command::fig_alpha: return cmd_fig_alpha(cfg, m, log);
    case Command::fig_bound: return cmd_fig_bound(cfg, m, log);
  }
  return kFailure;
}

}  // namespace dblms::cli
