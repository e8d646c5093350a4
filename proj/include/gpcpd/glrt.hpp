#ifndef GPCPD_GLRT_HPP
#define GPCPD_GLRT_HPP

/** @file
 *
 * Generalized likelihood ratio tests for a single change point:
 *
 *   2L_t = x' S^{-1} x - x' S_t'^{-1} x + ln(|S| / |S_t'|)
 *
 * maximized over a candidate set, together with the mean-change GLRT,
 * closed-form variance/scale estimates, theoretical thresholds and
 * Monte-Carlo threshold calibration.
 */

#include <gpcpd/error.hpp>
#include <gpcpd/gp.hpp>
#include <gpcpd/kernels.hpp>
#include <gpcpd/matcore.hpp>
#include <gpcpd/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace gpcpd {

/// Candidate change points t (1-based) with margin < t <= n - margin.
struct CandidateSet {
  std::vector<long> indices;
  long margin = 0;

  static long default_margin(long n) {
    return std::max<long>(2, static_cast<long>(std::ceil(0.05 * static_cast<double>(n))));
  }

  static CandidateSet with_margin(long n, long margin) {
    if (margin < 0) throw ValidationError("candidate margin must be nonnegative");
    CandidateSet c;
    c.margin = margin;
    // t = 1 would leave the first regime empty.
    for (long t = std::max<long>(margin + 1, 2); t <= n - margin; ++t) c.indices.push_back(t);
    if (c.indices.empty()) {
      throw ValidationError("no candidates for n = " + std::to_string(n) + " with margin " +
                            std::to_string(margin));
    }
    return c;
  }

  static CandidateSet for_length(long n) { return with_margin(n, default_margin(n)); }

  std::size_t size() const { return indices.size(); }

  void validate(long n, long lowest = 2) const {
    if (indices.empty()) throw ValidationError("candidate set is empty");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const long t = indices[i];
      if (t < lowest || t > n) {
        throw CandidateOutOfRange("t = " + std::to_string(t) + " for series of length " + std::to_string(n));
      }
      if (i > 0 && t <= indices[i - 1]) throw ValidationError("candidates must be strictly increasing");
    }
  }
};

enum class Verdict { Change, NoChange, Inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Change: return "change";
    case Verdict::NoChange: return "no-change";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct LrtOutcome {
  std::vector<long> candidates;
  std::vector<double> stats;
  /// Per-candidate plug-in estimate (b-hat or alpha-hat); empty when not applicable.
  std::vector<double> estimates;
  /// Candidates whose statistic could not be formed (degenerate tail, no positive root).
  std::vector<long> skipped;
  long t_star = 0;
  double stat_max = -std::numeric_limits<double>::infinity();
  double threshold_h0 = std::numeric_limits<double>::quiet_NaN();
  double threshold_h1 = std::numeric_limits<double>::quiet_NaN();
  bool verdict_t0 = false;
  bool verdict_t1 = false;
  Verdict verdict = Verdict::Inconclusive;
  bool verdicts_set = false;

  double stat_at(long t) const {
    const auto it = std::find(candidates.begin(), candidates.end(), t);
    if (it == candidates.end()) throw CandidateOutOfRange("t = " + std::to_string(t) + " not a candidate");
    return stats[static_cast<std::size_t>(it - candidates.begin())];
  }
};

/// Sets t_star/stat_max; ties go to the smallest t. NaN statistics never win.
inline void locate_maximum(LrtOutcome& out) {
  out.stat_max = -std::numeric_limits<double>::infinity();
  out.t_star = out.candidates.empty() ? 0 : out.candidates.front();
  for (std::size_t i = 0; i < out.stats.size(); ++i) {
    if (out.stats[i] > out.stat_max) {
      out.stat_max = out.stats[i];
      out.t_star = out.candidates[i];
    }
  }
}

inline LrtOutcome run_test(LrtOutcome outcome, double threshold_h0, double threshold_h1) {
  outcome.threshold_h0 = threshold_h0;
  outcome.threshold_h1 = threshold_h1;
  outcome.verdict_t0 = outcome.stat_max >= threshold_h0;
  outcome.verdict_t1 = outcome.stat_max >= threshold_h1;
  if (outcome.verdict_t0 && outcome.verdict_t1) {
    outcome.verdict = Verdict::Change;
  } else if (!outcome.verdict_t0 && !outcome.verdict_t1) {
    outcome.verdict = Verdict::NoChange;
  } else {
    outcome.verdict = Verdict::Inconclusive;
  }
  outcome.verdicts_set = true;
  return outcome;
}

// ---------------------------------------------------------------------------
// Mean change

/// R_{n,delta} = 1 + 2 [log(2n/delta) + sqrt(log(2n/delta))].
inline double mean_glrt_threshold(long n, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  const double l = std::log(2.0 * static_cast<double>(n) / delta);
  return 1.0 + 2.0 * (l + std::sqrt(l));
}

/// Mean-shift GLRT with zeta_t(k) = sign(k - t), sign(0) = 0; single threshold.
inline LrtOutcome mean_glrt(std::span<const double> x, const SymMatrix& sigma, const CandidateSet& cands,
                            double delta) {
  validate_series(x);
  const auto n = static_cast<long>(x.size());
  if (sigma.order() != n) throw DimensionMismatch("covariance order does not match series length");
  cands.validate(n, 1);

  const auto f = cholesky(sigma);
  const Vector sx = solve(f, to_vector(x));
  LrtOutcome out;
  out.candidates = cands.indices;
  out.stats.reserve(cands.size());
  Vector zeta(n);
  for (long t : cands.indices) {
    for (long k = 1; k <= n; ++k) zeta(k - 1) = (k > t) - (k < t);
    const double num = zeta.dot(sx);
    const double den = quad_form(f, zeta);
    out.stats.push_back(den > 0.0 ? num * num / den : 0.0);
  }
  locate_maximum(out);
  const double r = mean_glrt_threshold(n, delta);
  return run_test(std::move(out), r, r);
}

// ---------------------------------------------------------------------------
// Covariance change

namespace detail {

struct NullTerms {
  SpdFactorization factor;
  double quad;
  double log_det;
};

inline NullTerms null_terms(const SymMatrix& sigma, const Vector& x) {
  auto f = cholesky(sigma);
  const double q = quad_form(f, x);
  const double ld = log_det(f);
  return {std::move(f), q, ld};
}

}  // namespace detail

/// Positive root of a z^2 - b z - c = 0.
inline double positive_quadratic_root(double a, double b, double c) {
  if (!(a > 0.0)) throw NoPositiveRoot("leading coefficient must be positive");
  const double disc = b * b + 4.0 * a * c;
  if (!(disc >= 0.0)) throw NoPositiveRoot("negative discriminant");
  const double root = (b + std::sqrt(disc)) / (2.0 * a);
  if (!(root > 0.0) || !std::isfinite(root)) throw NoPositiveRoot("root is not positive");
  return root;
}

/// Sufficient statistics of the scaled-covariance likelihood at candidate t:
/// with S^{-1} = [A B; B' C] split at t, cross = x1' B x2 and tail = x2' C x2.
struct ScaledTerms {
  double cross = 0.0;
  double tail = 0.0;
  long tail_length = 0;
};

inline ScaledTerms scaled_terms(const SpdFactorization& null_factor, const Vector& x, long t) {
  const auto n = x.size();
  detail::check_candidate(n, t);
  const Eigen::Index split = t - 1;
  Vector rhs = Vector::Zero(n);
  rhs.tail(n - split) = x.tail(n - split);
  const Vector u = solve(null_factor, rhs);
  return {x.head(split).dot(u.head(split)), x.tail(n - split).dot(u.tail(n - split)), static_cast<long>(n - split)};
}

/// 2L as a function of alpha for fixed sufficient statistics.
inline double scaled_statistic(const ScaledTerms& s, double alpha) {
  return 2.0 * (1.0 - 1.0 / alpha) * s.cross + (1.0 - 1.0 / (alpha * alpha)) * s.tail -
         2.0 * static_cast<double>(s.tail_length) * std::log(alpha);
}

inline double scaled_alpha(const ScaledTerms& s) {
  return positive_quadratic_root(static_cast<double>(s.tail_length), s.cross, s.tail);
}

/// Maximum-likelihood scale of the post-change block for a change at t.
inline double scaled_alpha(std::span<const double> x, const KernelSpec& null_k, long t) {
  validate_series(x);
  const auto f = cholesky(covariance_matrix(null_k, static_cast<Eigen::Index>(x.size())));
  return scaled_alpha(scaled_terms(f, to_vector(x), t));
}

/**
 * Per-candidate statistic by explicit factorization of each alternative
 * covariance. A ScaledCovariance family without a fixed alpha estimates it per
 * candidate; candidates without a positive root are skipped (statistic -inf).
 */
inline LrtOutcome cov_lrt(std::span<const double> x, const ChangeFamily& fam, const CandidateSet& cands) {
  validate_series(x);
  fam.validate();
  const auto n = static_cast<long>(x.size());
  cands.validate(n);
  const Vector xv = to_vector(x);
  const auto null = detail::null_terms(null_covariance(fam, n), xv);
  const bool estimate_alpha = fam.kind == ChangeKind::ScaledCovariance && !fam.scale;

  LrtOutcome out;
  out.candidates = cands.indices;
  out.stats.reserve(cands.size());
  for (long t : cands.indices) {
    std::optional<double> alpha;
    if (estimate_alpha) {
      try {
        alpha = scaled_alpha(scaled_terms(null.factor, xv, t));
      } catch (const NoPositiveRoot&) {
        out.stats.push_back(-std::numeric_limits<double>::infinity());
        out.estimates.push_back(std::numeric_limits<double>::quiet_NaN());
        out.skipped.push_back(t);
        continue;
      }
      out.estimates.push_back(*alpha);
    }
    const auto alt = cholesky(alternative_covariance(fam, n, t, alpha));
    out.stats.push_back(null.quad - quad_form(alt, xv) + null.log_det - log_det(alt));
  }
  locate_maximum(out);
  return out;
}

/**
 * Structural-break statistics for every split of a length-n window from two
 * factorizations.
 *
 * Leading blocks of the null covariance are leading blocks of its Cholesky
 * factor, so prefix sums of the whitened data give every first-segment term.
 * The stationary post-change covariance is persymmetric, so its trailing
 * blocks are leading blocks seen through the reversed series.
 */
class StructuralBreakScorer {
 public:
  StructuralBreakScorer(const KernelSpec& pre, const KernelSpec& post, Eigen::Index n)
      : n_(n),
        pre_(cholesky(covariance_matrix(pre, n))),
        post_(cholesky(covariance_matrix(with_noise(post, pre.noise_variance), n))),
        pre_logdet_(prefix_logdet(pre_)),
        post_logdet_(prefix_logdet(post_)) {}

  Eigen::Index order() const noexcept { return n_; }
  const SpdFactorization& null_factor() const noexcept { return pre_; }
  const SpdFactorization& post_factor() const noexcept { return post_; }
  double jitter_applied() const noexcept { return std::max(pre_.jitter_applied(), post_.jitter_applied()); }

  /// Statistic at every t in 2..n; element t-2.
  Vector profile(const Vector& x) const {
    if (x.size() != n_) throw DimensionMismatch("window length does not match scorer order");
    const Vector z = whiten(pre_, x);
    const Vector w = whiten(post_, x.reverse());
    Vector zq(n_ + 1), wq(n_ + 1);
    zq(0) = wq(0) = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      zq(i + 1) = zq(i) + z(i) * z(i);
      wq(i + 1) = wq(i) + w(i) * w(i);
    }
    Vector stats(n_ - 1);
    for (Eigen::Index split = 1; split < n_; ++split) {
      const Eigen::Index tail = n_ - split;
      stats(split - 1) = zq(n_) - zq(split) - wq(tail) + pre_logdet_(n_) - pre_logdet_(split) - post_logdet_(tail);
    }
    return stats;
  }

  double max_statistic(const Vector& x, const CandidateSet& cands) const {
    const Vector p = profile(x);
    double best = -std::numeric_limits<double>::infinity();
    for (long t : cands.indices) best = std::max(best, p(t - 2));
    return best;
  }

  LrtOutcome score(const Vector& x, const CandidateSet& cands) const {
    cands.validate(n_);
    const Vector p = profile(x);
    LrtOutcome out;
    out.candidates = cands.indices;
    for (long t : cands.indices) out.stats.push_back(p(t - 2));
    locate_maximum(out);
    return out;
  }

 private:
  static KernelSpec with_noise(KernelSpec k, double noise) {
    k.noise_variance = noise;
    return k;
  }

  static Vector prefix_logdet(const SpdFactorization& f) {
    Vector c(f.order() + 1);
    c(0) = 0.0;
    for (Eigen::Index i = 0; i < f.order(); ++i) c(i + 1) = c(i) + 2.0 * std::log(f.lower()(i, i));
    return c;
  }

  Eigen::Index n_;
  SpdFactorization pre_;
  SpdFactorization post_;
  Vector pre_logdet_;
  Vector post_logdet_;
};

/// Structural-break GLRT via the prefix-sum scorer; equals cov_lrt on the same family.
inline LrtOutcome structural_break_lrt(std::span<const double> x, const KernelSpec& pre,
                                       const KernelSpec& post, const CandidateSet& cands) {
  validate_series(x);
  const StructuralBreakScorer scorer(pre, post, static_cast<Eigen::Index>(x.size()));
  return scorer.score(to_vector(x), cands);
}

/// Closed-form GLRT for a diagonal variance change a -> b with b estimated as the
/// mean square of the tail {t..n}. A zero tail gives +inf and marks the candidate.
inline LrtOutcome variance_lrt(std::span<const double> x, double a, const CandidateSet& cands) {
  validate_series(x);
  if (!(a > 0.0)) throw ValidationError("pre-change variance must be positive");
  const auto n = static_cast<long>(x.size());
  cands.validate(n);
  if (cands.indices.back() > n - 1) throw ValidationError("each candidate must leave >= 2 tail points");

  std::vector<double> tail_sq(static_cast<std::size_t>(n) + 1, 0.0);
  for (long i = n - 1; i >= 0; --i) {
    tail_sq[static_cast<std::size_t>(i)] = tail_sq[static_cast<std::size_t>(i) + 1] + x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  }
  LrtOutcome out;
  out.candidates = cands.indices;
  for (long t : cands.indices) {
    const double m = static_cast<double>(n - t + 1);
    const double s = tail_sq[static_cast<std::size_t>(t - 1)];
    out.estimates.push_back(s / m);
    if (s == 0.0) {
      out.stats.push_back(std::numeric_limits<double>::infinity());
      out.skipped.push_back(t);
      continue;
    }
    out.stats.push_back(s / a - m + m * std::log(a * m / s));
  }
  locate_maximum(out);
  return out;
}

/// Scaled-covariance GLRT with alpha estimated in closed form per candidate.
inline LrtOutcome scaled_lrt(std::span<const double> x, const KernelSpec& null_k, const CandidateSet& cands) {
  validate_series(x);
  const auto n = static_cast<long>(x.size());
  cands.validate(n);
  const Vector xv = to_vector(x);
  const auto f = cholesky(covariance_matrix(null_k, n));
  LrtOutcome out;
  out.candidates = cands.indices;
  for (long t : cands.indices) {
    const auto terms = scaled_terms(f, xv, t);
    try {
      const double alpha = scaled_alpha(terms);
      out.estimates.push_back(alpha);
      out.stats.push_back(scaled_statistic(terms, alpha));
    } catch (const NoPositiveRoot&) {
      out.estimates.push_back(std::numeric_limits<double>::quiet_NaN());
      out.stats.push_back(-std::numeric_limits<double>::infinity());
      out.skipped.push_back(t);
    }
  }
  locate_maximum(out);
  return out;
}

// ---------------------------------------------------------------------------
// Spectra and thresholds

/// Ascending eigenvalues of S^{1/2} S'^{-1} S^{1/2}. Swap the arguments for the
/// alternative-hypothesis spectrum.
inline std::vector<double> lrt_spectrum(const SymMatrix& sigma, const SymMatrix& sigma_alt) {
  if (sigma.order() != sigma_alt.order()) throw DimensionMismatch("covariance orders differ");
  const auto f = cholesky(sigma);
  const auto g = cholesky(sigma_alt);
  // L' S'^{-1} L is similar to S^{1/2} S'^{-1} S^{1/2}.
  const Matrix w = g.triangular().solve(f.lower());
  Matrix m = w.transpose() * w;
  m = 0.5 * (m + m.transpose()).eval();
  return sym_eigenvalues(SymMatrix(std::move(m)));
}

struct ThresholdSpec {
  double delta = 0.05;
  double bound_V = 1.0;
  double c0 = 0.0;
  double r_h0 = 0.0;
  double r_h1 = 0.0;

  /// Both error bounds hold simultaneously only when r_h1 >= r_h0.
  bool valid() const { return r_h1 >= r_h0; }
};

/// C_t = 1/lambda_min(S) + 1/lambda_min(S_t').
inline double c_constant(const ChangeFamily& fam, Eigen::Index n, long t) {
  return 1.0 / min_eigenvalue(null_covariance(fam, n)) + 1.0 / min_eigenvalue(alternative_covariance(fam, n, t));
}

/// Uniform bound on C_t, taking the all-post-change covariance as the second
/// interlacing endpoint.
inline double c0_constant(const ChangeFamily& fam, Eigen::Index n) {
  const double lmin = min_eigenvalue(null_covariance(fam, n));
  const double lpost = min_eigenvalue(post_regime_covariance(fam, n));
  return 1.0 / lmin + 1.0 / std::min(lmin, lpost);
}

/// Subgaussian-concentration thresholds over the candidate set.
inline ThresholdSpec theoretical_thresholds(const ChangeFamily& fam, Eigen::Index n, const CandidateSet& cands,
                                            double delta, double bound_V) {
  fam.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(bound_V > 0.0)) throw ValidationError("bound V must be positive");
  if (fam.kind == ChangeKind::ScaledCovariance && !fam.scale) {
    throw ValidationError("theoretical thresholds need a fixed alpha");
  }
  cands.validate(n);

  const auto f = cholesky(null_covariance(fam, n));
  const double ld_null = log_det(f);
  const double dn = static_cast<double>(n);
  double h0_core = -std::numeric_limits<double>::infinity();
  double h1_core = std::numeric_limits<double>::infinity();
  for (long t : cands.indices) {
    const auto g = cholesky(alternative_covariance(fam, n, t));
    const double ld_ratio = ld_null - log_det(g);
    const double tr_null_alt = g.triangular().solve(f.lower()).squaredNorm();  // Tr(S S'^{-1})
    const double tr_alt_null = f.triangular().solve(g.lower()).squaredNorm();  // Tr(S' S^{-1})
    h0_core = std::max(h0_core, dn - tr_null_alt + ld_ratio);
    h1_core = std::min(h1_core, tr_alt_null - dn + ld_ratio);
  }
  ThresholdSpec spec;
  spec.delta = delta;
  spec.bound_V = bound_V;
  spec.c0 = c0_constant(fam, n);
  const double spread = spec.c0 * bound_V * bound_V * dn * std::sqrt(0.5 * std::log(2.0 / delta));
  spec.r_h0 = h0_core + spread;
  spec.r_h1 = h1_core - spread;
  return spec;
}

/// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct EmpiricalThresholds {
  double r_h0 = 0.0;
  double r_h1 = 0.0;
};

struct CalibrationConfig {
  int mc_samples = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Window center (1-based) used for the planted break of the H1 draws.
inline long window_center(long window_n) { return window_n / 2 + 1; }

/// Max-over-candidates structural-break statistic for draws under H0 (null
/// kernel throughout) and H1 (null kernel before the window center, the
/// alternative kernel from it on). Sample i draws from its own stream.
struct CalibrationDraws {
  std::vector<double> h0;
  std::vector<double> h1;
};

inline CalibrationDraws calibration_draws(const KernelSpec& null_k, const KernelSpec& alt_k, long window_n,
                                          const CandidateSet& cands, const CalibrationConfig& cfg) {
  if (cfg.mc_samples < 1) throw ValidationError("mc_samples must be positive");
  cands.validate(window_n);
  const StructuralBreakScorer scorer(null_k, alt_k, window_n);
  const long center = window_center(window_n);
  KernelSpec alt_noisy = alt_k;
  alt_noisy.noise_variance = null_k.noise_variance;
  const auto h1_factor = cholesky(alternative_covariance(ChangeFamily::structural_break(null_k, alt_noisy), window_n, center));

  const auto samples = static_cast<std::size_t>(cfg.mc_samples);
  CalibrationDraws draws{std::vector<double>(samples), std::vector<double>(samples)};
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng r0(mix_seed(cfg.seed, 2 * i));
      Rng r1(mix_seed(cfg.seed, 2 * i + 1));
      draws.h0[i] = scorer.max_statistic(sample_gaussian(scorer.null_factor(), r0), cands);
      draws.h1[i] = scorer.max_statistic(sample_gaussian(h1_factor, r1), cands);
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(samples)));
  if (threads == 1) {
    work(0, samples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (samples + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t b = w * chunk, e = std::min(samples, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  return draws;
}

/// r_h0 = (1 - delta) quantile of the H0 draws; r_h1 = delta quantile of the H1 draws.
inline EmpiricalThresholds calibrate_empirical_thresholds(const KernelSpec& null_k, const KernelSpec& alt_k,
                                                          long window_n, double delta,
                                                          const CalibrationConfig& cfg,
                                                          std::optional<CandidateSet> cands = std::nullopt) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  const CandidateSet c = cands ? *cands : CandidateSet::for_length(window_n);
  const auto draws = calibration_draws(null_k, alt_k, window_n, c, cfg);
  return {quantile(draws.h0, 1.0 - delta), quantile(draws.h1, delta)};
}

}  // namespace gpcpd

#endif
