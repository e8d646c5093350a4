#ifndef GPCPD_KERNELS_HPP
#define GPCPD_KERNELS_HPP

/** @file
 *
 * RBF kernel evaluation and covariance assembly on unit-spaced time indices,
 * including the alternative (post-change) covariances used by the likelihood
 * ratio tests.
 *
 * Candidate convention: a candidate t (1-based) splits the series into the
 * first regime {1, ..., t-1} and the second regime {t, ..., n}; x_t is the
 * first observation of the new regime.
 */

#include <gpcpd/error.hpp>
#include <gpcpd/matcore.hpp>

#include <cmath>
#include <optional>
#include <string>

namespace gpcpd {

enum class KernelFamily { RBF };

/// Squared-exponential kernel plus white observation noise.
struct KernelSpec {
  KernelFamily family = KernelFamily::RBF;
  double signal_variance = 1.0;
  double length_scale = 1.0;
  double noise_variance = 0.0;

  static KernelSpec rbf(double signal_variance, double length_scale, double noise_variance = 0.0) {
    KernelSpec k{KernelFamily::RBF, signal_variance, length_scale, noise_variance};
    k.validate();
    return k;
  }

  void validate() const {
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
      throw ValidationError("signal_variance must be positive and finite");
    }
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
      throw ValidationError("length_scale must be positive and finite");
    }
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
      throw ValidationError("noise_variance must be nonnegative and finite");
    }
  }

  /// Noise-free covariance at a time lag.
  double operator()(double lag) const {
    return signal_variance * std::exp(-0.5 * lag * lag / (length_scale * length_scale));
  }

  /// Prior variance of one observation.
  double marginal_variance() const { return signal_variance + noise_variance; }

  bool operator==(const KernelSpec&) const = default;
};

/// Covariance of observations at arbitrary time points (noise on the diagonal).
inline SymMatrix covariance_at(const KernelSpec& k, std::span<const double> times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    m(j, j) = k.marginal_variance();
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = k(times[static_cast<std::size_t>(i)] - times[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return SymMatrix(std::move(m));
}

namespace detail {

/// Noise-free Toeplitz covariance of n consecutive unit-spaced points.
inline Matrix rbf_block(const KernelSpec& k, Eigen::Index n) {
  Vector lags(n);
  for (Eigen::Index d = 0; d < n; ++d) lags(d) = k(static_cast<double>(d));
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = lags(std::abs(i - j));
  }
  return m;
}

}  // namespace detail

/// Sigma + noise * I on indices 1..n.
inline SymMatrix covariance_matrix(const KernelSpec& k, Eigen::Index n) {
  if (n < 1) throw ValidationError("covariance order must be >= 1");
  Matrix m = detail::rbf_block(k, n);
  m.diagonal().array() += k.noise_variance;
  return SymMatrix(std::move(m));
}

struct KernelGradients {
  SymMatrix d_signal_variance;
  SymMatrix d_length_scale;
  SymMatrix d_noise_variance;
};

inline KernelGradients kernel_gradients(const KernelSpec& k, Eigen::Index n) {
  if (n < 1) throw ValidationError("covariance order must be >= 1");
  Matrix ds(n, n), dl(n, n);
  const double l = k.length_scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = static_cast<double>(i - j);
      const double e = std::exp(-0.5 * d * d / (l * l));
      ds(i, j) = e;
      dl(i, j) = k.signal_variance * e * d * d / (l * l * l);
    }
  }
  return {SymMatrix(std::move(ds)), SymMatrix(std::move(dl)), SymMatrix::identity(n)};
}

enum class ChangeKind { GeneralChange, StructuralBreak, VarianceOnly, ScaledCovariance };

inline std::string to_string(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::GeneralChange: return "general";
    case ChangeKind::StructuralBreak: return "structural-break";
    case ChangeKind::VarianceOnly: return "variance";
    case ChangeKind::ScaledCovariance: return "scaled";
  }
  return "unknown";
}

/**
 * Null/alternative covariance pair for one kind of change.
 *
 * - GeneralChange: K before t, K' from t on, K'' across the split (absent = zero).
 * - StructuralBreak: K before t, K' from t on, independent segments.
 * - VarianceOnly: a*I before t, b*I from t on (only pre.noise_variance of pre is used).
 * - ScaledCovariance: D (K + noise) D with D = diag(1..1, alpha..alpha); alpha may be
 *   left unset so the tests estimate it per candidate.
 *
 * The observation noise of `pre` is shared by both hypotheses.
 */
struct ChangeFamily {
  ChangeKind kind = ChangeKind::StructuralBreak;
  KernelSpec pre{};
  std::optional<KernelSpec> post;
  std::optional<KernelSpec> cross;
  double pre_variance = 0.0;
  double post_variance = 0.0;
  std::optional<double> scale;

  static ChangeFamily general(const KernelSpec& pre, const KernelSpec& post,
                              std::optional<KernelSpec> cross) {
    ChangeFamily f;
    f.kind = ChangeKind::GeneralChange;
    f.pre = pre;
    f.post = post;
    f.cross = cross;
    f.validate();
    return f;
  }

  static ChangeFamily structural_break(const KernelSpec& pre, const KernelSpec& post) {
    ChangeFamily f;
    f.kind = ChangeKind::StructuralBreak;
    f.pre = pre;
    f.post = post;
    f.validate();
    return f;
  }

  static ChangeFamily variance_only(double a, double b, double noise_variance = 0.0) {
    ChangeFamily f;
    f.kind = ChangeKind::VarianceOnly;
    f.pre = KernelSpec{KernelFamily::RBF, a, 1.0, noise_variance};
    f.pre_variance = a;
    f.post_variance = b;
    f.validate();
    return f;
  }

  static ChangeFamily scaled(const KernelSpec& pre, std::optional<double> alpha) {
    ChangeFamily f;
    f.kind = ChangeKind::ScaledCovariance;
    f.pre = pre;
    f.scale = alpha;
    f.validate();
    return f;
  }

  void validate() const {
    pre.validate();
    switch (kind) {
      case ChangeKind::GeneralChange:
        if (!post) throw ValidationError("general change needs a post-change kernel");
        post->validate();
        if (cross) cross->validate();
        break;
      case ChangeKind::StructuralBreak:
        if (!post) throw ValidationError("structural break needs a post-change kernel");
        if (cross) throw ValidationError("structural break has no cross kernel");
        post->validate();
        break;
      case ChangeKind::VarianceOnly:
        if (!(pre_variance > 0.0) || !(post_variance > 0.0)) {
          throw ValidationError("variance change needs positive pre/post variances");
        }
        break;
      case ChangeKind::ScaledCovariance:
        if (scale && !(*scale > 0.0)) throw ValidationError("scale alpha must be positive");
        break;
    }
  }
};

/// Covariance under the no-change hypothesis.
inline SymMatrix null_covariance(const ChangeFamily& fam, Eigen::Index n) {
  if (fam.kind == ChangeKind::VarianceOnly) {
    return SymMatrix(Matrix(Vector::Constant(n, fam.pre_variance + fam.pre.noise_variance).asDiagonal()));
  }
  return covariance_matrix(fam.pre, n);
}

namespace detail {

/// Alternative covariance with the second regime starting at 0-based offset
/// `split` (0 means the whole series follows the post-change model).
inline SymMatrix alternative_at_split(const ChangeFamily& fam, Eigen::Index n, Eigen::Index split,
                                      std::optional<double> alpha) {
  const double noise = fam.pre.noise_variance;
  const Eigen::Index tail = n - split;
  Matrix m;
  switch (fam.kind) {
    case ChangeKind::GeneralChange:
    case ChangeKind::StructuralBreak: {
      m = Matrix::Zero(n, n);
      if (split > 0) m.topLeftCorner(split, split) = rbf_block(fam.pre, split);
      m.bottomRightCorner(tail, tail) = rbf_block(*fam.post, tail);
      if (fam.kind == ChangeKind::GeneralChange && fam.cross && split > 0) {
        for (Eigen::Index j = 0; j < split; ++j) {
          for (Eigen::Index i = split; i < n; ++i) {
            const double v = (*fam.cross)(static_cast<double>(i - j));
            m(i, j) = v;
            m(j, i) = v;
          }
        }
      }
      m.diagonal().array() += noise;
      break;
    }
    case ChangeKind::VarianceOnly: {
      Vector d(n);
      d.head(split).setConstant(fam.pre_variance + noise);
      d.tail(tail).setConstant(fam.post_variance + noise);
      m = d.asDiagonal();
      break;
    }
    case ChangeKind::ScaledCovariance: {
      if (!alpha) throw ValidationError("scaled covariance needs a resolved alpha");
      m = covariance_matrix(fam.pre, n).dense();
      m.bottomRows(tail) *= *alpha;
      m.rightCols(tail) *= *alpha;
      break;
    }
  }
  return SymMatrix(std::move(m));
}

inline void check_candidate(Eigen::Index n, long t) {
  if (t <= 1 || t > n) {
    throw CandidateOutOfRange("t = " + std::to_string(t) + " not in (1, " + std::to_string(n) + "]");
  }
}

}  // namespace detail

/// Covariance under a change at candidate t (1 < t <= n). For ScaledCovariance
/// an explicit alpha overrides the family's.
inline SymMatrix alternative_covariance(const ChangeFamily& fam, Eigen::Index n, long t,
                                        std::optional<double> alpha = std::nullopt) {
  detail::check_candidate(n, t);
  return detail::alternative_at_split(fam, n, t - 1, alpha ? alpha : fam.scale);
}

/// Covariance with every index in the post-change regime.
inline SymMatrix post_regime_covariance(const ChangeFamily& fam, Eigen::Index n,
                                        std::optional<double> alpha = std::nullopt) {
  return detail::alternative_at_split(fam, n, 0, alpha ? alpha : fam.scale);
}

}  // namespace gpcpd

#endif
