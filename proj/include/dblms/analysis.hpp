#pragma once

// Closed-form convergence predictors for the delayed-block LMS filter:
// stability bound, optimum step size, steady-state excess MSE and
// misadjustment, mapping-matrix determinants, slope factor, time constant
// and transient slope.
//
// All statistics are per-sample: sigma2 is the mean eigenvalue of the
// per-sample input correlation matrix, not of the L-scaled block matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "dblms/errors.hpp"
#include "dblms/filter.hpp"

namespace dblms {

/// Second- and fourth-order input statistics feeding every predictor.
struct EigenStats {
  double sigma2{1.0};    ///< mean eigenvalue, input power for white input
  double rho{1.0};       ///< lambda_rms^2 / sigma^4, >= 1
  double kurtosis{3.0};  ///< nu, 3 for Gaussian input

  double lambda_rms2() const { return rho * sigma2 * sigma2; }

  /// P = N + (nu - 1) L.
  double excess_constant(std::size_t n_taps, std::size_t block_size) const {
    return static_cast<double>(n_taps) +
           (kurtosis - 1.0) * static_cast<double>(block_size);
  }

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      throw ConfigError("sigma2 must be positive and finite");
    }
    if (!(rho >= 1.0 - 1e-12) || !std::isfinite(rho)) {
      throw ConfigError("rho must be >= 1");
    }
    if (!(kurtosis > 0.0) || !std::isfinite(kurtosis)) {
      throw ConfigError("kurtosis must be positive");
    }
  }

  static EigenStats white(double sigma2 = 1.0) { return {sigma2, 1.0, 3.0}; }

  static EigenStats from_eigenvalues(std::span<const double> lambdas,
                                     double kurtosis = 3.0) {
    if (lambdas.empty()) throw ConfigError("no eigenvalues given");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double l : lambdas) {
      if (!(l > 0.0)) throw ConfigError("eigenvalues must be positive");
      sum += l;
      sum_sq += l * l;
    }
    const double n = static_cast<double>(lambdas.size());
    const double mean = sum / n;
    EigenStats s{mean, (sum_sq / n) / (mean * mean), kurtosis};
    s.rho = std::max(s.rho, 1.0);  // rounding can land just below 1
    return s;
  }
};

struct ConvergencePrediction {
  double mu_hat_crit{0.0};
  double mu_hat_opt{0.0};
  double misadjustment{0.0};
  double excess_mse{0.0};
  double min_mse{0.0};
  double alpha{1.0};
  double tau_samples{0.0};
  double slope_db_per_sample{0.0};
};

namespace detail {

// rho P + 2 D L; with nu = 3 this is rho N + 2 (D + rho) L.
inline double bound_coefficient(std::size_t n_taps, std::size_t delay,
                                std::size_t block_size,
                                const EigenStats& stats) {
  return stats.rho * stats.excess_constant(n_taps, block_size) +
         2.0 * static_cast<double>(delay) * static_cast<double>(block_size);
}

inline void check_structure(std::size_t n_taps, std::size_t block_size,
                            const EigenStats& stats) {
  if (n_taps < 1) throw ConfigError("n_taps must be >= 1");
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  stats.validate();
}

inline void check_step(double mu_hat) {
  if (!(mu_hat >= 0.0) || !std::isfinite(mu_hat)) {
    throw ConfigError("effective step size must be finite and >= 0");
  }
}

}  // namespace detail

/// mu_hat_crit = 2 / ((rho N + 2 (D + rho) L) sigma^2).
inline double critical_step_size(std::size_t n_taps, std::size_t delay,
                                  std::size_t block_size,
                                  const EigenStats& stats) {
  detail::check_structure(n_taps, block_size, stats);
  return 2.0 / (detail::bound_coefficient(n_taps, delay, block_size, stats) *
                stats.sigma2);
}

/// Exactly half of the critical step size.
inline double optimal_step_size(std::size_t n_taps, std::size_t delay,
                                std::size_t block_size,
                                const EigenStats& stats) {
  return 0.5 * critical_step_size(n_taps, delay, block_size, stats);
}

/// rho N mu_hat_hat / (2 - (rho N + 2 (D + rho) L) mu_hat_hat), with
/// mu_hat_hat = mu_hat sigma^2.
inline double misadjustment(double mu_hat, std::size_t n_taps,
                            std::size_t delay, std::size_t block_size,
                            const EigenStats& stats) {
  detail::check_structure(n_taps, block_size, stats);
  detail::check_step(mu_hat);
  const double crit = critical_step_size(n_taps, delay, block_size, stats);
  const double scaled = mu_hat * stats.sigma2;
  const double denom =
      2.0 - scaled * detail::bound_coefficient(n_taps, delay, block_size, stats);
  if (mu_hat >= crit || denom <= 0.0) throw OutOfBoundError(mu_hat, crit);
  return stats.rho * static_cast<double>(n_taps) * scaled / denom;
}

/// Steady-state excess MSE; the (min_mse + noise_var) factor follows the
/// recursion's driving terms. Pass noise_var = 0 when min_mse already
/// contains the measurement-noise floor.
inline double excess_mse(double mu_hat, std::size_t n_taps, std::size_t delay,
                         std::size_t block_size, const EigenStats& stats,
                         double min_mse, double noise_var) {
  if (!(min_mse >= 0.0) || !(noise_var >= 0.0)) {
    throw ConfigError("min_mse and noise_var must be >= 0");
  }
  return misadjustment(mu_hat, n_taps, delay, block_size, stats) *
         (min_mse + noise_var);
}

/// Inverse of misadjustment(): mu_hat = 2 / ((K + 2 D L) sigma^2) with
/// K = rho (N (1 + 1/M) + 2 L) for Gaussian input.
inline double step_size_for_misadjustment(double target_m, std::size_t n_taps,
                                          std::size_t delay,
                                          std::size_t block_size,
                                          const EigenStats& stats) {
  detail::check_structure(n_taps, block_size, stats);
  if (!(target_m > 0.0)) throw ConfigError("target misadjustment must be > 0");
  const double n = static_cast<double>(n_taps);
  const double k = stats.rho * (n / target_m +
                                stats.excess_constant(n_taps, block_size));
  const double dl = 2.0 * static_cast<double>(delay) *
                    static_cast<double>(block_size);
  return 2.0 / ((k + dl) * stats.sigma2);
}

/// D x D mapping matrix relating the delayed cross-excess terms to the
/// current excess MSE: identity, -1 on the sub-diagonal, plus `scale` on the
/// anti-diagonal. Odd D therefore carries 1+x at the centre, even D carries
/// -1+x just below it.
struct MappingMatrix {
  std::size_t order{0};
  double scale{0.0};
  std::vector<double> entries;  // row-major

  double operator()(std::size_t row, std::size_t col) const {
    return entries[row * order + col];
  }
};

inline MappingMatrix mapping_matrix(std::size_t delay, double scale) {
  MappingMatrix m{delay, scale, std::vector<double>(delay * delay, 0.0)};
  for (std::size_t r = 0; r < delay; ++r) {
    m.entries[r * delay + r] = 1.0;
    if (r > 0) m.entries[r * delay + r - 1] = -1.0;
    m.entries[r * delay + (delay - 1 - r)] += scale;
  }
  return m;
}

enum class DeterminantMethod { recursion, closed_form, direct };

namespace detail {

// |S_{x,D}| = |S_{x,D-2}| + x |S_{-x,D-1}|, |S_{x,0}| = 1, |S_{x,1}| = 1 + x.
// Advances the pair (|S_{x,d}|, |S_{-x,d}|) together.
inline double det_by_recursion(std::size_t delay, double x) {
  if (delay == 0) return 1.0;
  double plus_prev = 1.0, minus_prev = 1.0;       // d - 2
  double plus = 1.0 + x, minus = 1.0 - x;         // d - 1
  for (std::size_t d = 2; d <= delay; ++d) {
    const double next_plus = plus_prev + x * minus;
    const double next_minus = minus_prev - x * plus;
    plus_prev = plus;
    minus_prev = minus;
    plus = next_plus;
    minus = next_minus;
  }
  return plus;
}

// Pascal's triangle in exact integers while it fits (C(62,31) < 2^63).
inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  if (n <= 62) {
    // C(n-k+i, i) = C(n-k+i-1, i-1) * (n-k+i) / i, exact in 128-bit.
    unsigned __int128 c = 1;
    for (std::size_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return static_cast<double>(static_cast<std::uint64_t>(c));
  }
  return std::round(std::exp(std::lgamma(double(n) + 1) -
                             std::lgamma(double(k) + 1) -
                             std::lgamma(double(n - k) + 1)));
}

// sum_{m=0}^{D} (-1)^{floor(m/2)} C(floor((D+m)/2), m) x^m
inline double det_closed_form(std::size_t delay, double x) {
  double sum = 0.0;
  double power = 1.0;
  for (std::size_t m = 0; m <= delay; ++m) {
    const double sign = ((m / 2) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * binomial((delay + m) / 2, m) * power;
    power *= x;
  }
  return sum;
}

inline double det_direct(std::size_t delay, double x) {
  if (delay == 0) return 1.0;
  const MappingMatrix m = mapping_matrix(delay, x);
  Eigen::MatrixXd a(delay, delay);
  for (std::size_t r = 0; r < delay; ++r) {
    for (std::size_t c = 0; c < delay; ++c) a(r, c) = m(r, c);
  }
  return a.partialPivLu().determinant();
}

}  // namespace detail

inline double det_mapping(std::size_t delay, double scale,
                          DeterminantMethod method = DeterminantMethod::recursion) {
  switch (method) {
    case DeterminantMethod::recursion: return detail::det_by_recursion(delay, scale);
    case DeterminantMethod::closed_form: return detail::det_closed_form(delay, scale);
    case DeterminantMethod::direct: return detail::det_direct(delay, scale);
  }
  return detail::det_by_recursion(delay, scale);
}

/// alpha = |S_{-x,D-1}| / |S_{x,D}| with x = mu_hat sigma^2 L; exactly 1 for D = 0.
inline double slope_factor(std::size_t delay, std::size_t block_size,
                           double mu_hat, const EigenStats& stats) {
  detail::check_step(mu_hat);
  if (delay == 0) return 1.0;
  const double x = mu_hat * stats.sigma2 * static_cast<double>(block_size);
  return det_mapping(delay - 1, -x) / det_mapping(delay, x);
}

/// Time constant in samples, 1 / (4 mu_hat sigma^2 alpha).
inline double time_constant(std::size_t delay, std::size_t block_size,
                            double mu_hat, const EigenStats& stats) {
  const double alpha = slope_factor(delay, block_size, mu_hat, stats);
  const double scaled = mu_hat * stats.sigma2;
  if (scaled == 0.0) return std::numeric_limits<double>::infinity();
  if (!(alpha > 0.0)) {
    throw PredictedDivergenceError(
        1.0 - 2.0 * scaled * static_cast<double>(block_size) * alpha);
  }
  return 1.0 / (4.0 * scaled * alpha);
}

/// Transient slope in dB/sample, -10 log10(e) / (2 tau).
inline double slope(std::size_t delay, std::size_t block_size, double mu_hat,
                    const EigenStats& stats) {
  const double tau = time_constant(delay, block_size, mu_hat, stats);
  return -10.0 * std::numbers::log10e / (2.0 * tau);
}

/// Every predictor for the spec's configured effective step size.
inline ConvergencePrediction predict(const FilterSpec& spec,
                                     const EigenStats& stats, double min_mse,
                                     double noise_var) {
  spec.validate();
  const double mu_hat = spec.effective_step();
  ConvergencePrediction p;
  p.mu_hat_crit =
      critical_step_size(spec.n_taps, spec.delay, spec.block_size, stats);
  p.mu_hat_opt = 0.5 * p.mu_hat_crit;
  p.misadjustment =
      misadjustment(mu_hat, spec.n_taps, spec.delay, spec.block_size, stats);
  p.excess_mse = excess_mse(mu_hat, spec.n_taps, spec.delay, spec.block_size,
                            stats, min_mse, noise_var);
  p.min_mse = min_mse;
  p.alpha = slope_factor(spec.delay, spec.block_size, mu_hat, stats);
  p.tau_samples = time_constant(spec.delay, spec.block_size, mu_hat, stats);
  p.slope_db_per_sample = slope(spec.delay, spec.block_size, mu_hat, stats);
  return p;
}

enum class DecayModel {
  envelope,   ///< exp(-n / (2 tau)) per sample
  geometric,  ///< (1 - 2 mu_hat_hat L alpha)^floor(n / L), stepped per block
};

/// Predicted per-sample MSE:
///   min + ex_inf + (ex_0 - ex_inf) * decay(n), never below min + ex_inf.
inline std::vector<double> predict_mse_curve(const FilterSpec& spec,
                                             const EigenStats& stats,
                                             double min_mse, double noise_var,
                                             double initial_excess,
                                             std::size_t n_samples,
                                             DecayModel model = DecayModel::envelope) {
  spec.validate();
  const double mu_hat = spec.effective_step();
  const double ex_inf = excess_mse(mu_hat, spec.n_taps, spec.delay,
                                   spec.block_size, stats, min_mse, noise_var);
  const double alpha = slope_factor(spec.delay, spec.block_size, mu_hat, stats);
  const double l = static_cast<double>(spec.block_size);
  const double ratio = 1.0 - 2.0 * mu_hat * stats.sigma2 * l * alpha;
  if (!(ratio > 0.0 && ratio < 1.0)) throw PredictedDivergenceError(ratio);

  const double floor_level = min_mse + ex_inf;
  const double tau = time_constant(spec.delay, spec.block_size, mu_hat, stats);
  std::vector<double> curve(n_samples);
  for (std::size_t n = 0; n < n_samples; ++n) {
    const double decay =
        model == DecayModel::envelope
            ? std::exp(-static_cast<double>(n) / (2.0 * tau))
            : std::pow(ratio, static_cast<double>(n / spec.block_size));
    curve[n] = std::max(floor_level + (initial_excess - ex_inf) * decay,
                        floor_level);
  }
  return curve;
}

/// First index from which `curve` stays within `tol_db` of `level`.
inline std::size_t settling_index(std::span<const double> curve, double level,
                                  double tol_db = 1.0) {
  const double level_db = 10.0 * std::log10(level);
  std::size_t first = 0;
  for (std::size_t n = 0; n < curve.size(); ++n) {
    const double db = 10.0 * std::log10(curve[n]);
    if (!(std::abs(db - level_db) <= tol_db)) first = n + 1;
  }
  return first;
}

struct WienerSolution {
  std::vector<double> coefficients;
  double min_mse{0.0};
  double condition{1.0};
};

/// Solves R w* = p and returns xi_min = (sigma_d^2 - p^T w*) / L, where R, p
/// and sigma_d^2 = E[d^T d] are block-level (delayed-block) statistics.
inline WienerSolution wiener_and_min_mse(const Eigen::MatrixXd& autocorrelation,
                                         const Eigen::VectorXd& cross_correlation,
                                         double desired_energy,
                                         std::size_t block_size) {
  const auto n = autocorrelation.rows();
  if (n == 0 || autocorrelation.cols() != n || cross_correlation.size() != n) {
    throw ConfigError("autocorrelation must be square and match the cross-correlation length");
  }
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  const double scale = autocorrelation.cwiseAbs().maxCoeff();
  if (!(autocorrelation - autocorrelation.transpose()).isZero(1e-12 * std::max(scale, 1.0))) {
    throw SolverError("autocorrelation matrix is not symmetric",
                      std::numeric_limits<double>::infinity());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(autocorrelation,
                                                     Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || condition > 1e12) {
    throw SolverError("autocorrelation matrix is singular or ill-conditioned",
                      condition);
  }
  const Eigen::VectorXd w = autocorrelation.llt().solve(cross_correlation);
  WienerSolution sol;
  sol.coefficients.assign(w.data(), w.data() + w.size());
  sol.min_mse =
      (desired_energy - cross_correlation.dot(w)) / static_cast<double>(block_size);
  sol.condition = condition;
  return sol;
}

}  // namespace dblms
