#ifndef GPCPD_EVAL_HPP
#define GPCPD_EVAL_HPP

#include <gpcpd/bocpd.hpp>
#include <gpcpd/error.hpp>
#include <gpcpd/gp.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>
#include <vector>

namespace gpcpd {

struct PointScore {
  double nll = 0.0;
  double squared_error = 0.0;
};

struct ScoreSummary {
  double mean_nll = 0.0;
  double mean_mse = 0.0;
  /// 95% half-widths, 1.96 sd / sqrt(n).
  double ci95_nll = 0.0;
  double ci95_mse = 0.0;
  std::size_t n_points = 0;
};

inline PointScore score_point(const PredictiveGaussian& p, double x) {
  const double r = x - p.mean;
  return {-normal_log_density(x, p), r * r};
}

inline std::vector<PointScore> point_scores(std::span<const PredictiveGaussian> predictives,
                                            std::span<const double> actual) {
  if (predictives.size() != actual.size()) {
    throw DimensionMismatch("predictive trace has " + std::to_string(predictives.size()) + " entries, series has " +
                            std::to_string(actual.size()));
  }
  std::vector<PointScore> out(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) out[i] = score_point(predictives[i], actual[i]);
  return out;
}

namespace detail {

inline std::pair<double, double> mean_ci95(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace detail

/// Scores points [begin, end) (0-based) of aligned traces.
inline ScoreSummary score(std::span<const PredictiveGaussian> predictives, std::span<const double> actual,
                          std::size_t begin, std::size_t end) {
  if (predictives.size() != actual.size()) throw DimensionMismatch("predictive trace and series are misaligned");
  if (begin >= end || end > actual.size()) throw ValidationError("evaluation range is empty or out of bounds");
  const auto pts = point_scores(predictives.subspan(begin, end - begin), actual.subspan(begin, end - begin));
  std::vector<double> nll(pts.size()), se(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    nll[i] = pts[i].nll;
    se[i] = pts[i].squared_error;
  }
  ScoreSummary s;
  std::tie(s.mean_nll, s.ci95_nll) = detail::mean_ci95(nll);
  std::tie(s.mean_mse, s.ci95_mse) = detail::mean_ci95(se);
  s.n_points = pts.size();
  return s;
}

inline ScoreSummary score(std::span<const PredictiveGaussian> predictives, std::span<const double> actual) {
  return score(predictives, actual, 0, actual.size());
}

struct PairedComparison {
  double mean_difference = 0.0;  ///< mean of a - b
  double t_statistic = 0.0;
  /// One-sided p-value for "a is lower than b".
  double p_value = 0.5;
  std::size_t runs = 0;
};

/// Paired one-sided t-test with n-1 degrees of freedom. A zero spread of the
/// differences gives p = 0.5 at zero mean and p in {0, 1} otherwise.
inline PairedComparison paired_compare(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("paired score lists differ in length");
  if (a.size() < 2) throw ValidationError("insufficient runs: paired comparison needs at least 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);

  PairedComparison out;
  out.mean_difference = mean;
  out.runs = d.size();
  if (se == 0.0) {
    out.t_statistic = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    out.p_value = mean == 0.0 ? 0.5 : (mean < 0.0 ? 0.0 : 1.0);
    return out;
  }
  out.t_statistic = mean / se;
  const boost::math::students_t dist(n - 1.0);
  out.p_value = boost::math::cdf(dist, out.t_statistic);
  return out;
}

}  // namespace gpcpd

#endif
