#ifndef GPCPD_BOCPD_HPP
#define GPCPD_BOCPD_HPP

/** @file
 *
 * Bayesian online change point detection with a GP underlying predictive
 * model. The run-length posterior is propagated in log space; the hazard of
 * each step may be overridden (this is how the confirmatory variant plugs in).
 */

#include <gpcpd/error.hpp>
#include <gpcpd/gp.hpp>
#include <gpcpd/kernels.hpp>
#include <gpcpd/matcore.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gpcpd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double normal_log_density(double x, const PredictiveGaussian& p) {
  const double r = x - p.mean;
  return -0.5 * (kLog2Pi + std::log(p.variance) + r * r / p.variance);
}

/// Constant hazard 1/lambda with optional per-step overrides (t is 1-based).
struct HazardPolicy {
  double base = 1.0 / 200.0;
  std::map<long, double> overrides;

  static HazardPolicy constant(double h) {
    HazardPolicy p{h, {}};
    p.validate();
    return p;
  }

  void validate() const {
    auto check = [](double h) {
      if (!(h > 0.0 && h < 1.0)) throw ValidationError("hazard must lie in (0, 1), got " + std::to_string(h));
    };
    check(base);
    for (const auto& [t, h] : overrides) check(h);
  }

  double at(long t) const {
    const auto it = overrides.find(t);
    return it == overrides.end() ? base : it->second;
  }
};

/**
 * One-step GP predictive for every run length from a single factorization.
 *
 * With a stationary kernel on unit spacing, the covariance of the r most
 * recent points plus the next one is the leading (r+1)-block of one Toeplitz
 * matrix. Row r of G = L^{-1} then encodes the conditional of point r+1 given
 * points 1..r: mean = -sum_{i<r} G(r,i) h_i / G(r,r), variance = 1/G(r,r)^2.
 */
class GpRunLengthModel {
 public:
  GpRunLengthModel(const KernelSpec& k, long max_run_length) : kernel_(k), max_r_(max_run_length) {
    k.validate();
    if (max_run_length < 0) throw ValidationError("max run length must be nonnegative");
    const auto f = cholesky(covariance_matrix(k, max_run_length + 1));
    inv_factor_ = f.triangular().solve(Matrix(Matrix::Identity(max_run_length + 1, max_run_length + 1)));
  }

  const KernelSpec& kernel() const noexcept { return kernel_; }
  long max_run_length() const noexcept { return max_r_; }

  /// Predictive for the next point given `recent` (oldest first).
  PredictiveGaussian predict(std::span<const double> recent) const {
    const auto r = static_cast<Eigen::Index>(recent.size());
    if (r > max_r_) throw ValidationError("run length exceeds model capacity");
    const double g = inv_factor_(r, r);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) acc += inv_factor_(r, i) * recent[static_cast<std::size_t>(i)];
    return {-acc / g, std::max(1.0 / (g * g), kernel_.noise_variance)};
  }

 private:
  KernelSpec kernel_;
  long max_r_;
  Matrix inv_factor_;
};

struct BocpdConfig {
  /// Run lengths beyond this are merged into the cap bin.
  long max_run_length = 256;
  /// Posterior entries below this mass are dropped after each step.
  double prune_threshold = 1e-12;
  bool truncate = true;
  /// A change is declared when the MAP run length falls below `declare_low`
  /// after having reached `declare_high`.
  long declare_high = 10;
  long declare_low = 3;

  void validate() const {
    if (max_run_length < 1) throw ValidationError("max_run_length must be >= 1");
    if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) throw ValidationError("prune_threshold must lie in [0, 1)");
    if (declare_low < 0 || declare_high < declare_low) throw ValidationError("need 0 <= declare_low <= declare_high");
  }
};

struct StepOutput {
  /// Mixture predictive for x_t before it is observed.
  PredictiveGaussian predictive;
  /// log p(x_t | x_{1:t-1}) under the run-length mixture.
  double log_evidence = 0.0;
  long map_run_length = 0;
  /// Mass removed by pruning or moved into the cap bin.
  double pruned_mass = 0.0;
};

/**
 * Sequential run-length filter. `Model` supplies
 * `PredictiveGaussian predict(std::span<const double> recent) const`.
 * Steps must be applied in time order.
 */
template <class Model>
class BocpdDetector {
 public:
  BocpdDetector(Model model, BocpdConfig cfg) : model_(std::move(model)), cfg_(cfg) {
    cfg_.validate();
    log_probs_.assign(1, 0.0);
  }

  long time() const noexcept { return static_cast<long>(history_.size()); }

  /// Log posterior over run lengths 0..size()-1 after the latest step.
  const std::vector<double>& log_posterior() const noexcept { return log_probs_; }

  std::vector<double> posterior() const {
    std::vector<double> p(log_probs_.size());
    std::transform(log_probs_.begin(), log_probs_.end(), p.begin(), [](double l) { return std::exp(l); });
    return p;
  }

  StepOutput step(double x, double hazard) {
    if (!(hazard > 0.0 && hazard < 1.0)) throw ValidationError("hazard must lie in (0, 1)");
    if (!std::isfinite(x)) throw ValidationError("non-finite observation");

    const std::size_t support = log_probs_.size();
    std::vector<double> joint(support, kNegInf);
    double mix_mean = 0.0, mix_second = 0.0;
    for (std::size_t r = 0; r < support; ++r) {
      if (log_probs_[r] == kNegInf) continue;
      const std::span<const double> recent(history_.data() + history_.size() - r, r);
      const PredictiveGaussian pred = model_.predict(recent);
      const double w = std::exp(log_probs_[r]);
      mix_mean += w * pred.mean;
      mix_second += w * (pred.variance + pred.mean * pred.mean);
      joint[r] = log_probs_[r] + normal_log_density(x, pred);
    }

    StepOutput out;
    out.predictive = {mix_mean, std::max(mix_second - mix_mean * mix_mean, 0.0)};
    out.log_evidence = log_sum_exp(joint);
    if (out.log_evidence == kNegInf) throw NumericalError("run-length posterior collapsed to zero mass");

    std::vector<double> next(support + 1, kNegInf);
    const double log_grow = std::log1p(-hazard);
    for (std::size_t r = 0; r < support; ++r) {
      if (joint[r] != kNegInf) next[r + 1] = joint[r] + log_grow;
    }
    next[0] = out.log_evidence + std::log(hazard);
    normalize(next);

    if (cfg_.truncate) out.pruned_mass = truncate(next);

    history_.push_back(x);
    log_probs_ = std::move(next);
    out.map_run_length = static_cast<long>(std::max_element(log_probs_.begin(), log_probs_.end()) - log_probs_.begin());
    return out;
  }

 private:
  static void normalize(std::vector<double>& lp) {
    const double z = log_sum_exp(lp);
    for (double& v : lp) v -= z;
  }

  double truncate(std::vector<double>& lp) const {
    double moved = 0.0;
    const auto cap = static_cast<std::size_t>(cfg_.max_run_length);
    if (lp.size() > cap + 1) {
      for (std::size_t r = cap + 1; r < lp.size(); ++r) {
        moved += std::exp(lp[r]);
        const double hi = std::max(lp[cap], lp[r]);
        if (hi != kNegInf) lp[cap] = hi + std::log(std::exp(lp[cap] - hi) + std::exp(lp[r] - hi));
      }
      lp.resize(cap + 1);
    }
    const double floor = std::log(cfg_.prune_threshold);
    const std::size_t best = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    bool dropped = false;
    for (std::size_t r = 0; r < lp.size(); ++r) {
      if (r != best && lp[r] != kNegInf && lp[r] < floor) {
        moved += std::exp(lp[r]);
        lp[r] = kNegInf;
        dropped = true;
      }
    }
    if (dropped) normalize(lp);
    while (lp.size() > 1 && lp.back() == kNegInf) lp.pop_back();
    return moved;
  }

  Model model_;
  BocpdConfig cfg_;
  std::vector<double> history_;
  std::vector<double> log_probs_;
};

/// Run-length posterior trace: row t-1 holds P(r_t | x_{1:t}) for r = 0..row size-1.
struct RunLengthPosterior {
  std::vector<std::vector<double>> rows;

  std::size_t steps() const { return rows.size(); }
  std::size_t max_width() const {
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.size());
    return w;
  }
};

struct BocpdResult {
  RunLengthPosterior posterior;
  std::vector<PredictiveGaussian> predictive;
  std::vector<double> log_evidence;
  std::vector<double> hazards;
  std::vector<long> map_run_length;
  /// 1-based times at which the MAP run length dropped (see BocpdConfig).
  std::vector<long> change_points;
};

inline std::vector<long> declare_changes(std::span<const long> map_path, long high, long low) {
  std::vector<long> cps;
  bool armed = false;
  for (std::size_t i = 0; i < map_path.size(); ++i) {
    if (map_path[i] >= high) armed = true;
    if (armed && map_path[i] < low) {
      cps.push_back(static_cast<long>(i) + 1);
      armed = false;
    }
  }
  return cps;
}

/// Drives a detector through `x`, taking hazard_t from `hazard_of(t)`.
template <class Model, class HazardFn>
BocpdResult run_detector(std::span<const double> x, Model model, const BocpdConfig& cfg, HazardFn&& hazard_of) {
  BocpdDetector<Model> det(std::move(model), cfg);
  BocpdResult res;
  res.posterior.rows.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long t = static_cast<long>(i) + 1;
    const double h = hazard_of(t);
    const StepOutput s = det.step(x[i], h);
    res.hazards.push_back(h);
    res.predictive.push_back(s.predictive);
    res.log_evidence.push_back(s.log_evidence);
    res.map_run_length.push_back(s.map_run_length);
    res.posterior.rows.push_back(det.posterior());
  }
  res.change_points = declare_changes(res.map_run_length, cfg.declare_high, cfg.declare_low);
  return res;
}

inline long model_capacity(std::size_t n, const BocpdConfig& cfg) {
  return cfg.truncate ? std::min<long>(cfg.max_run_length, static_cast<long>(n)) : static_cast<long>(n);
}

inline BocpdResult bocpd_run(std::span<const double> x, const KernelSpec& k, const HazardPolicy& hazard,
                             const BocpdConfig& cfg = {}) {
  validate_series(x);
  hazard.validate();
  return run_detector(x, GpRunLengthModel(k, model_capacity(x.size(), cfg)), cfg,
                      [&](long t) { return hazard.at(t); });
}

}  // namespace gpcpd

#endif
