#ifndef GPCPD_CBOCPD_HPP
#define GPCPD_CBOCPD_HPP

/** @file
 *
 * Confirmatory BOCPD: a structural-break likelihood ratio test on the window
 * x_{t-m..t+m} overrides the hazard of step t.
 *
 *   hazard_t = 1 - delta   both tests reject and the window maximizer is t
 *            = delta       neither test rejects
 *            = H_const     otherwise, and for t <= m or t >= n - m
 */

#include <gpcpd/bocpd.hpp>
#include <gpcpd/error.hpp>
#include <gpcpd/glrt.hpp>
#include <gpcpd/gp.hpp>
#include <gpcpd/kernels.hpp>

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gpcpd {

struct CbocpdConfig {
  long half_window = 25;
  double delta = 0.05;
  double hazard_const = 1.0 / 200.0;
  int mc_samples = 1000;
  std::uint64_t seed = 0;
  bool refit_alternative = true;
  unsigned threads = 1;
  FitConfig fit{};
  BocpdConfig bocpd{};
  /// Replaces calibration with fixed (r_h0, r_h1).
  std::optional<std::pair<double, double>> fixed_thresholds;

  long window_length() const { return 2 * half_window + 1; }

  void validate(std::size_t series_length) const {
    if (half_window < 1) throw ValidationError("half_window must be >= 1");
    if (static_cast<std::size_t>(window_length()) > series_length) {
      throw ValidationError("window 2m+1 = " + std::to_string(window_length()) + " exceeds series length " +
                            std::to_string(series_length));
    }
    if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("delta must lie in (0, 0.5)");
    if (!(hazard_const > 0.0 && hazard_const < 1.0)) throw ValidationError("hazard_const must lie in (0, 1)");
    if (mc_samples < 1) throw ValidationError("mc_samples must be positive");
    bocpd.validate();
  }
};

/// Rounds to 4 significant digits.
inline double round_significant(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  const double mag = std::pow(10.0, std::floor(std::log10(std::abs(v))) - 3.0);
  return std::round(v / mag) * mag;
}

inline KernelSpec round_kernel(const KernelSpec& k) {
  return {k.family, round_significant(k.signal_variance), round_significant(k.length_scale),
          round_significant(k.noise_variance)};
}

/// Empirical thresholds keyed on (rounded null kernel, rounded alternative
/// kernel, window length, delta). Calibration always runs on the rounded
/// kernels, so a lookup never depends on which window populated the entry.
class ThresholdCache {
 public:
  EmpiricalThresholds get(const KernelSpec& null_k, const KernelSpec& alt_k, long window_n, double delta,
                          const CalibrationConfig& cal) {
    const KernelSpec rn = round_kernel(null_k), ra = round_kernel(alt_k);
    const Key key{rn.signal_variance, rn.length_scale, rn.noise_variance, ra.signal_variance,
                  ra.length_scale,    ra.noise_variance, static_cast<double>(window_n), delta};
    if (const auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
    const auto th = calibrate_empirical_thresholds(rn, ra, window_n, delta, cal);
    cache_.emplace(key, th);
    return th;
  }

  std::size_t size() const noexcept { return cache_.size(); }
  std::size_t hits() const noexcept { return hits_; }

 private:
  using Key = std::array<double, 8>;
  std::map<Key, EmpiricalThresholds> cache_;
  std::size_t hits_ = 0;
};

struct WindowResult {
  LrtOutcome outcome;
  KernelSpec alternative;
};

/// Structural-break test on one window of length 2m+1 with verdicts set.
inline WindowResult window_verdict(std::span<const double> window, const KernelSpec& null_k, const CbocpdConfig& cfg,
                                   ThresholdCache& cache) {
  const auto n = static_cast<long>(window.size());
  if (n != cfg.window_length()) throw ValidationError("window length must be 2m+1");
  validate_series(window);

  KernelSpec alt = null_k;
  if (cfg.refit_alternative) {
    const auto second = window.subspan(static_cast<std::size_t>(cfg.half_window));
    alt = fit_hyperparameters(second, null_k, cfg.fit).kernel;
  }
  const auto cands = CandidateSet::for_length(n);
  LrtOutcome out = structural_break_lrt(window, null_k, alt, cands);

  double h0 = 0.0, h1 = 0.0;
  if (cfg.fixed_thresholds) {
    std::tie(h0, h1) = *cfg.fixed_thresholds;
  } else {
    const auto th = cache.get(null_k, alt, n, cfg.delta, {cfg.mc_samples, cfg.seed, cfg.threads});
    h0 = th.r_h0;
    h1 = th.r_h1;
  }
  return {run_test(std::move(out), h0, h1), alt};
}

struct WindowDecision {
  long t = 0;
  double statistic = 0.0;
  double threshold_h0 = 0.0;
  double threshold_h1 = 0.0;
};

struct CbocpdResult {
  BocpdResult bocpd;
  std::vector<WindowDecision> confirmed_changes;
  std::vector<WindowDecision> confirmed_nonchanges;
  std::vector<std::string> warnings;
  std::size_t windows_tested = 0;
  std::size_t calibrations = 0;
};

/// Hazard for step t (1-based) from the window tests, plus the decisions made.
struct HazardSchedule {
  std::vector<double> hazards;
  std::vector<WindowDecision> changes;
  std::vector<WindowDecision> nonchanges;
  std::vector<std::string> warnings;
  std::size_t windows_tested = 0;
  std::size_t calibrations = 0;
};

inline HazardSchedule confirmatory_hazards(std::span<const double> x, const KernelSpec& null_k,
                                           const CbocpdConfig& cfg) {
  const auto n = static_cast<long>(x.size());
  const long m = cfg.half_window;
  HazardSchedule s;
  s.hazards.assign(x.size(), cfg.hazard_const);
  ThresholdCache cache;
  for (long t = m + 1; t < n - m; ++t) {
    const auto window = x.subspan(static_cast<std::size_t>(t - m - 1), static_cast<std::size_t>(2 * m + 1));
    ++s.windows_tested;
    WindowResult w;
    try {
      w = window_verdict(window, null_k, cfg, cache);
    } catch (const NumericalError& e) {
      s.warnings.push_back("t=" + std::to_string(t) + ": " + e.what() + "; using constant hazard");
      continue;
    }
    const WindowDecision d{t, w.outcome.stat_max, w.outcome.threshold_h0, w.outcome.threshold_h1};
    if (w.outcome.verdict == Verdict::Change && w.outcome.t_star == m + 1) {
      s.hazards[static_cast<std::size_t>(t - 1)] = 1.0 - cfg.delta;
      s.changes.push_back(d);
    } else if (w.outcome.verdict == Verdict::NoChange) {
      s.hazards[static_cast<std::size_t>(t - 1)] = cfg.delta;
      s.nonchanges.push_back(d);
    }
  }
  s.calibrations = cache.size();
  return s;
}

/// Window tests depend only on the data, so the hazard schedule is assembled
/// first and then fed to the sequential run-length filter.
inline CbocpdResult cbocpd_run(std::span<const double> x, const KernelSpec& null_k, const CbocpdConfig& cfg) {
  validate_series(x);
  null_k.validate();
  cfg.validate(x.size());
  HazardSchedule schedule = confirmatory_hazards(x, null_k, cfg);
  CbocpdResult res;
  res.bocpd = run_detector(x, GpRunLengthModel(null_k, model_capacity(x.size(), cfg.bocpd)), cfg.bocpd,
                           [&](long t) { return schedule.hazards[static_cast<std::size_t>(t - 1)]; });
  res.confirmed_changes = std::move(schedule.changes);
  res.confirmed_nonchanges = std::move(schedule.nonchanges);
  res.warnings = std::move(schedule.warnings);
  res.windows_tested = schedule.windows_tested;
  res.calibrations = schedule.calibrations;
  return res;
}

}  // namespace gpcpd

#endif
