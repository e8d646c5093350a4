#ifndef GPCPD_GP_HPP
#define GPCPD_GP_HPP

/** @file
 *
 * Zero-mean GP on unit-spaced time indices: marginal likelihood, one-step
 * posterior predictive and hyperparameter fitting.
 */

#include <gpcpd/error.hpp>
#include <gpcpd/kernels.hpp>
#include <gpcpd/matcore.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace gpcpd {

using Series = std::vector<double>;

inline void validate_series(std::span<const double> x, std::size_t min_length = 1) {
  if (x.size() < min_length) {
    throw ValidationError("series needs at least " + std::to_string(min_length) + " values, got " +
                          std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw ValidationError("non-finite value at index " + std::to_string(i + 1));
  }
}

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// log N(x; 0, m) given the factor of m.
inline double gaussian_log_density(const SpdFactorization& f, const Vector& x) {
  return -0.5 * quad_form(f, x) - 0.5 * log_det(f) - 0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

inline std::vector<double> index_range(double first, std::size_t n) {
  std::vector<double> t(n);
  std::iota(t.begin(), t.end(), first);
  return t;
}

inline double log_marginal_likelihood(const KernelSpec& k, std::span<const double> x,
                                      double first_index = 1.0) {
  validate_series(x);
  const auto f = cholesky(covariance_at(k, index_range(first_index, x.size())));
  return gaussian_log_density(f, to_vector(x));
}

struct PredictiveGaussian {
  double mean = 0.0;
  double variance = 1.0;
};

/// Predictive for the observation at `horizon_index` given values observed at
/// `history_times`. An empty history yields the prior N(0, s2 + noise).
inline PredictiveGaussian posterior_predictive(const KernelSpec& k, std::span<const double> history,
                                               std::span<const double> history_times,
                                               double horizon_index) {
  if (history.size() != history_times.size()) {
    throw DimensionMismatch("history values and times differ in length");
  }
  if (history.empty()) return {0.0, k.marginal_variance()};
  const double last = *std::max_element(history_times.begin(), history_times.end());
  if (!(horizon_index > last)) throw ValidationError("horizon index must follow the history");

  const auto f = cholesky(covariance_at(k, history_times));
  Vector cross(static_cast<Eigen::Index>(history.size()));
  for (Eigen::Index i = 0; i < cross.size(); ++i) {
    cross(i) = k(horizon_index - history_times[static_cast<std::size_t>(i)]);
  }
  const Vector alpha = solve(f, to_vector(history));
  const Vector w = whiten(f, cross);
  const double var = k.marginal_variance() - w.squaredNorm();
  return {cross.dot(alpha), std::max(var, k.noise_variance)};
}

/// History at indices 1..h.
inline PredictiveGaussian posterior_predictive(const KernelSpec& k, std::span<const double> history,
                                               double horizon_index) {
  const auto times = index_range(1.0, history.size());
  return posterior_predictive(k, history, times, horizon_index);
}

/// d log p(x) / d(signal_variance, length_scale, noise_variance).
inline std::array<double, 3> log_ml_gradient(const KernelSpec& k, std::span<const double> x) {
  validate_series(x);
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto f = cholesky(covariance_matrix(k, n));
  const Vector alpha = solve(f, to_vector(x));
  const Matrix inner = alpha * alpha.transpose() - inverse(f);
  const auto grads = kernel_gradients(k, n);
  auto half_trace = [&](const SymMatrix& d) { return 0.5 * inner.cwiseProduct(d.dense()).sum(); };
  return {half_trace(grads.d_signal_variance), half_trace(grads.d_length_scale),
          half_trace(grads.d_noise_variance)};
}

struct FitConfig {
  int max_iters = 200;
  double tolerance = 1e-6;
  double lower_bound = 1e-4;
  double upper_bound = 1e4;
};

struct FitResult {
  KernelSpec kernel;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  /// False when no step increased the likelihood; `kernel` is then the init.
  bool improved = false;
};

/**
 * Bounded gradient ascent on the log marginal likelihood in log-parameter space
 * with Armijo backtracking. Every accepted step increases the likelihood, so the
 * result never scores below the initial spec.
 */
inline FitResult fit_hyperparameters(std::span<const double> x, const KernelSpec& init,
                                     const FitConfig& cfg = {}) {
  validate_series(x, 4);
  init.validate();
  const double lo = std::log(cfg.lower_bound);
  const double hi = std::log(cfg.upper_bound);

  auto to_kernel = [](const std::array<double, 3>& th) {
    return KernelSpec{KernelFamily::RBF, std::exp(th[0]), std::exp(th[1]), std::exp(th[2])};
  };
  auto evaluate = [&](const std::array<double, 3>& th, double& value) {
    try {
      value = log_marginal_likelihood(to_kernel(th), x);
      return std::isfinite(value);
    } catch (const NumericalError&) {
      return false;
    }
  };

  // Zero noise maps to the lower bound in log space.
  std::array<double, 3> theta{
      std::clamp(std::log(init.signal_variance), lo, hi),
      std::clamp(std::log(init.length_scale), lo, hi),
      std::clamp(std::log(std::max(init.noise_variance, cfg.lower_bound)), lo, hi)};

  FitResult result{init, log_marginal_likelihood(init, x), 0.0, 0, false, false};
  result.initial_log_likelihood = result.log_likelihood;
  double current = 0.0;
  if (!evaluate(theta, current)) return result;

  double step = 1.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    result.iterations = iter + 1;
    const KernelSpec k = to_kernel(theta);
    const auto g_nat = log_ml_gradient(k, x);
    std::array<double, 3> g{g_nat[0] * k.signal_variance, g_nat[1] * k.length_scale,
                            g_nat[2] * k.noise_variance};
    // Project out components pushing against an active bound.
    for (int i = 0; i < 3; ++i) {
      if ((theta[i] <= lo && g[i] < 0.0) || (theta[i] >= hi && g[i] > 0.0)) g[i] = 0.0;
    }
    if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    std::array<double, 3> trial{};
    double trial_value = 0.0;
    for (int halving = 0; halving < 60; ++halving) {
      double directional = 0.0;
      for (int i = 0; i < 3; ++i) {
        trial[i] = std::clamp(theta[i] + step * g[i], lo, hi);
        directional += g[i] * (trial[i] - theta[i]);
      }
      if (evaluate(trial, trial_value) && trial_value >= current + 1e-4 * directional &&
          trial_value > current) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.converged = true;
      break;
    }
    const double gain = trial_value - current;
    theta = trial;
    current = trial_value;
    result.improved = true;
    step *= 2.0;
    if (gain < cfg.tolerance) {
      result.converged = true;
      break;
    }
  }

  if (result.improved && current > result.initial_log_likelihood) {
    result.kernel = to_kernel(theta);
    result.log_likelihood = current;
  } else {
    result.improved = false;
  }
  return result;
}

}  // namespace gpcpd

#endif
