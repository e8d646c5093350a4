#include <gpcpd/glrt.hpp>
#include <gpcpd/random.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <cmath>
#include <limits>

using namespace gpcpd;

namespace {

KernelSpec random_kernel(Rng& rng, double noise) {
  return KernelSpec::rbf(0.3 + 2.5 * rng.uniform(), 0.5 + 6.0 * rng.uniform(), noise);
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST(CandidateSet, DefaultMargin) {
  const auto c = CandidateSet::for_length(51);
  EXPECT_EQ(c.margin, 3);
  EXPECT_EQ(c.indices.front(), 4);
  EXPECT_EQ(c.indices.back(), 48);
  EXPECT_EQ(CandidateSet::for_length(10).margin, 2);
  EXPECT_THROW(CandidateSet::with_margin(4, 2), ValidationError);
}

TEST(MeanGlrt, HandExampleWithExcludedMidpoint) {
  const std::vector<double> x{-1, -1, 1, 1};
  CandidateSet c;
  c.indices = {2};
  const auto out = mean_glrt(x, SymMatrix::identity(4), c, 0.05);
  // zeta = [-1, 0, 1, 1]
  EXPECT_NEAR(out.stats[0], 3.0, 1e-12);
}

TEST(MeanGlrt, ZeroSeriesGivesZeroStatistics) {
  const std::vector<double> x(12, 0.0);
  const auto out = mean_glrt(x, SymMatrix::identity(12), CandidateSet::for_length(12), 0.05);
  for (double s : out.stats) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(out.verdict, Verdict::NoChange);
}

TEST(MeanGlrt, ThresholdClosedForm) {
  const double l = std::log(16000.0);
  EXPECT_NEAR(mean_glrt_threshold(400, 0.05), 1.0 + 2.0 * (l + std::sqrt(l)), 1e-12);
  EXPECT_NEAR(mean_glrt_threshold(400, 0.05), 26.583, 1e-3);
}

TEST(CovLrt, IdenticalKernelsGiveZeroCurve) {
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  Rng rng(1);
  const Vector x = rng.normal_vector(20);
  for (const auto& fam : {ChangeFamily::general(k, k, k), ChangeFamily::scaled(k, 1.0)}) {
    const auto out = cov_lrt(as_span(x), fam, CandidateSet::for_length(20));
    for (double s : out.stats) EXPECT_NEAR(s, 0.0, 1e-9);
    EXPECT_EQ(out.t_star, out.candidates.front());
  }
}

TEST(CovLrt, MatchesTwoDensityOracleForEveryFamily) {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const long n = rng.uniform_int(4, 16);
    const double noise = 0.05 + 0.2 * rng.uniform();
    const auto k = random_kernel(rng, noise);
    const std::vector<ChangeFamily> fams{
        ChangeFamily::general(k, random_kernel(rng, 0.0), KernelSpec::rbf(0.2 * rng.uniform() + 0.01, 1.0 + rng.uniform())),
        ChangeFamily::structural_break(k, random_kernel(rng, 0.0)),
        ChangeFamily::variance_only(0.5 + rng.uniform(), 0.5 + 3 * rng.uniform(), noise),
        ChangeFamily::scaled(k, 0.3 + 2 * rng.uniform()),
        ChangeFamily::scaled(k, std::nullopt)};
    const Vector x = rng.normal_vector(n);
    const auto cands = CandidateSet::with_margin(n, 1);
    for (const auto& fam : fams) {
      const auto out = cov_lrt(as_span(x), fam, cands);
      const double null_ld = oracle::mvn_log_density(x, null_covariance(fam, n).dense());
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const long t = cands.indices[i];
        if (std::isinf(out.stats[i])) continue;
        std::optional<double> alpha;
        if (!out.estimates.empty()) alpha = out.estimates[i];
        const double alt_ld = oracle::mvn_log_density(x, alternative_covariance(fam, n, t, alpha).dense());
        EXPECT_NEAR(out.stats[i], 2.0 * (alt_ld - null_ld), 1e-8) << to_string(fam.kind) << " t=" << t;
      }
    }
  }
}

TEST(CovLrt, ZeroDataReducesToLogDetRatio) {
  const auto k = KernelSpec::rbf(1.0, 2.0, 0.1);
  const auto fam = ChangeFamily::structural_break(k, KernelSpec::rbf(3.0, 5.0));
  const std::vector<double> x(10, 0.0);
  const auto out = cov_lrt(x, fam, CandidateSet::for_length(10));
  const double ld = log_det(cholesky(covariance_matrix(k, 10)));
  for (std::size_t i = 0; i < out.stats.size(); ++i) {
    const double ldp = log_det(cholesky(alternative_covariance(fam, 10, out.candidates[i])));
    EXPECT_NEAR(out.stats[i], ld - ldp, 1e-10);
  }
}

TEST(CovLrt, TiesResolveToSmallestCandidate) {
  LrtOutcome o;
  o.candidates = {3, 4, 5, 6};
  o.stats = {1.0, 2.0, 2.0, 0.5};
  locate_maximum(o);
  EXPECT_EQ(o.t_star, 4);
  EXPECT_EQ(o.stat_max, 2.0);
}

TEST(CovLrt, ConstantShiftKeepsMaximizer) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LrtOutcome o;
    for (long t = 2; t < 15; ++t) {
      o.candidates.push_back(t);
      o.stats.push_back(rng.normal());
    }
    locate_maximum(o);
    LrtOutcome shifted = o;
    const double c = 10 * rng.normal();
    for (double& s : shifted.stats) s += c;
    locate_maximum(shifted);
    EXPECT_EQ(shifted.t_star, o.t_star);
    EXPECT_NEAR(shifted.stat_max, o.stat_max + c, 1e-12);
  }
}

TEST(StructuralBreakScorer, AgreesWithExplicitFactorizations) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const long n = rng.uniform_int(5, 60);
    const auto k = random_kernel(rng, 0.05 + 0.2 * rng.uniform());
    const auto kp = random_kernel(rng, 0.7);  // post noise is replaced by the null's
    const Vector x = rng.normal_vector(n);
    const auto cands = CandidateSet::for_length(n);
    const auto fast = structural_break_lrt(as_span(x), k, kp, cands);
    KernelSpec kp_noise = kp;
    kp_noise.noise_variance = k.noise_variance;
    const auto slow = cov_lrt(as_span(x), ChangeFamily::structural_break(k, kp_noise), cands);
    for (std::size_t i = 0; i < cands.size(); ++i) EXPECT_NEAR(fast.stats[i], slow.stats[i], 1e-8);
    EXPECT_EQ(fast.t_star, slow.t_star);
  }
}

TEST(VarianceLrt, HandExample) {
  // Tail {t..n} = {2, 2} at t = 3: b = 4, 2L = 3 + 3 + 2 ln(2/8).
  const std::vector<double> x{0, 0, 2, 2};
  CandidateSet c;
  c.indices = {3};
  const auto out = variance_lrt(x, 1.0, c);
  EXPECT_NEAR(out.estimates[0], 4.0, 1e-15);
  EXPECT_NEAR(out.stats[0], 6.0 + 2.0 * std::log(0.25), 1e-12);
  EXPECT_NEAR(out.stats[0], 3.2274, 1e-4);
}

TEST(VarianceLrt, MatchedTailVarianceGivesZero) {
  const std::vector<double> x{0.3, -1.0, 1.0, -1.0, 1.0};
  CandidateSet c;
  c.indices = {2, 3};
  const auto out = variance_lrt(x, 1.0, c);
  EXPECT_NEAR(out.stats[0], 0.0, 1e-12);
  EXPECT_NEAR(out.estimates[0], 1.0, 1e-15);
}

TEST(VarianceLrt, EstimateIsTailMeanSquareAndMaximizesLikelihood) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const long n = rng.uniform_int(6, 30);
    const double a = 0.5 + rng.uniform();
    Vector x = rng.normal_vector(n) * (0.5 + 2 * rng.uniform());
    const auto cands = CandidateSet::with_margin(n, 1);
    const auto out = variance_lrt(as_span(x), a, cands);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const long t = cands.indices[i];
      const double m = static_cast<double>(n - t + 1);
      const double bhat = x.tail(n - t + 1).squaredNorm() / m;
      EXPECT_NEAR(out.estimates[i], bhat, 1e-12);
      // plug-in statistic equals the general one at b = b-hat
      const auto general = cov_lrt(as_span(x), ChangeFamily::variance_only(a, bhat), CandidateSet{{t}, 0});
      EXPECT_NEAR(out.stats[i], general.stats[0], 1e-9);
    }
  }
}

TEST(VarianceLrt, ZeroTailIsDegenerate) {
  const std::vector<double> x{1.0, 2.0, 0.0, 0.0};
  CandidateSet c;
  c.indices = {2, 3};
  const auto out = variance_lrt(x, 1.0, c);
  EXPECT_TRUE(std::isinf(out.stats[1]));
  ASSERT_EQ(out.skipped.size(), 1u);
  EXPECT_EQ(out.skipped[0], 3);
}

TEST(ScaledAlpha, QuadraticRootClosedForms) {
  EXPECT_NEAR(positive_quadratic_root(5.0, 0.0, 5.0), 1.0, 1e-15);
  EXPECT_NEAR(positive_quadratic_root(5.0, 0.0, 20.0), 2.0, 1e-15);
  EXPECT_THROW(positive_quadratic_root(5.0, -1.0, 0.0), NoPositiveRoot);
}

TEST(ScaledAlpha, AgreesWithGoldenSectionAndIsStationary) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto k = random_kernel(rng, 0.1);
    const Vector x = rng.normal_vector(10) * (0.5 + 2 * rng.uniform());
    const long t = rng.uniform_int(3, 9);
    const double alpha = scaled_alpha(as_span(x), k, t);
    const auto fam = ChangeFamily::scaled(k, std::nullopt);
    auto stat = [&](double a) {
      return 2.0 * (oracle::mvn_log_density(x, alternative_covariance(fam, 10, t, a).dense()) -
                    oracle::mvn_log_density(x, covariance_matrix(k, 10).dense()));
    };
    const double numeric = oracle::golden_section_max(stat, 1e-3, 50.0);
    EXPECT_NEAR(alpha, numeric, 1e-6 * alpha);
    const double h = 1e-5 * alpha;
    EXPECT_LT(std::abs((stat(alpha + h) - stat(alpha - h)) / (2 * h)), 1e-6);
  }
}

TEST(ScaledLrt, ClosedFormMatchesGeneralPath) {
  Rng rng(7);
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const Vector x = rng.normal_vector(25);
  const auto cands = CandidateSet::for_length(25);
  const auto closed = scaled_lrt(as_span(x), k, cands);
  const auto general = cov_lrt(as_span(x), ChangeFamily::scaled(k, std::nullopt), cands);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    EXPECT_NEAR(closed.stats[i], general.stats[i], 1e-8);
    EXPECT_NEAR(closed.estimates[i], general.estimates[i], 1e-12);
  }
}

TEST(LrtSpectrum, ClosedForms) {
  const auto s = covariance_matrix(KernelSpec::rbf(1.0, 2.0, 0.1), 5);
  for (double v : lrt_spectrum(s, s)) EXPECT_NEAR(v, 1.0, 1e-12);
  const std::vector<double> d{2.0, 2.0};
  for (double v : lrt_spectrum(SymMatrix::identity(2), SymMatrix::diagonal(d))) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(LrtSpectrum, SimilarityInvariance) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix s(oracle::random_spd(6, rng));
    const SymMatrix sp(oracle::random_spd(6, rng));
    const auto ev = lrt_spectrum(s, sp);
    const auto ref = oracle::general_eigenvalues(s.dense() * sp.dense().inverse());
    ASSERT_EQ(ev.size(), ref.size());
    for (std::size_t i = 0; i < ev.size(); ++i) {
      EXPECT_GT(ev[i], 0.0);
      EXPECT_NEAR(ev[i], ref[i], 1e-8 * std::max(1.0, ref[i]));
    }
  }
}

TEST(TheoreticalThresholds, IdenticalHypothesesLeaveOnlySpread) {
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const auto fam = ChangeFamily::structural_break(k, k);
  // With K' = K the structural break still removes the cross block, so use
  // the general family with K'' = K to make S_t' = S.
  const auto same = ChangeFamily::general(k, k, k);
  const long n = 20;
  const double delta = 0.1, V = 2.0;
  const auto spec = theoretical_thresholds(same, n, CandidateSet::for_length(n), delta, V);
  const double spread = spec.c0 * V * V * n * std::sqrt(0.5 * std::log(2.0 / delta));
  EXPECT_NEAR(spec.r_h0, spread, 1e-6 * spread);
  EXPECT_NEAR(spec.r_h1, -spread, 1e-6 * spread);
  EXPECT_FALSE(spec.valid());
  EXPECT_NO_THROW(theoretical_thresholds(fam, n, CandidateSet::for_length(n), delta, V));
}

TEST(TheoreticalThresholds, DeltaNearOneFactor) {
  EXPECT_NEAR(std::sqrt(0.5 * std::log(2.0)), 0.5887, 1e-4);
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const auto same = ChangeFamily::general(k, k, k);
  const auto spec = theoretical_thresholds(same, 10, CandidateSet::for_length(10), 1.0 - 1e-12, 1.0);
  EXPECT_NEAR(spec.r_h0 / (spec.c0 * 10), std::sqrt(0.5 * std::log(2.0)), 1e-6);
}

TEST(TheoreticalThresholds, CtBoundedByC0) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const double noise = 0.01 + 0.2 * rng.uniform();
    const auto k = KernelSpec::rbf(0.2 + 3 * rng.uniform(), 0.5 + 20 * rng.uniform(), noise);
    const auto kp = KernelSpec::rbf(0.2 + 3 * rng.uniform(), 0.5 + 20 * rng.uniform());
    const auto fam = ChangeFamily::structural_break(k, kp);
    const double c0 = c0_constant(fam, 16);
    for (long t = 2; t <= 16; ++t) EXPECT_LE(c_constant(fam, 16, t), c0 * (1 + 1e-9)) << "t=" << t;
  }
}

TEST(RunTest, VerdictTable) {
  LrtOutcome o;
  o.candidates = {2};
  o.stats = {1.0};
  locate_maximum(o);
  EXPECT_EQ(run_test(o, 2.0, 3.0).verdict, Verdict::NoChange);
  EXPECT_EQ(run_test(o, 0.0, 0.5).verdict, Verdict::Change);
  EXPECT_EQ(run_test(o, 2.0, 0.5).verdict, Verdict::Inconclusive);
  const auto boundary = run_test(o, 1.0, 1.0);
  EXPECT_TRUE(boundary.verdict_t0);
  EXPECT_TRUE(boundary.verdict_t1);
  const auto forced = run_test(o, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(forced.verdict, Verdict::Inconclusive);
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_NEAR(quantile({1, 2, 3, 4}, 0.5), 2.5, 1e-15);
  EXPECT_NEAR(quantile({4, 1, 3, 2}, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(quantile({1, 2, 3, 4}, 1.0), 4.0, 1e-15);
  EXPECT_NEAR(quantile({0, 10}, 0.25), 2.5, 1e-15);
}

TEST(Calibration, SameKernelsOrderQuantiles) {
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const auto th = calibrate_empirical_thresholds(k, k, 30, 0.05, {400, 12, 1});
  EXPECT_LE(th.r_h1, th.r_h0);
}

TEST(Calibration, HalfDeltaGivesMedians) {
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const auto kp = KernelSpec::rbf(4.0, 3.0, 0.1);
  const CalibrationConfig cfg{301, 5, 1};
  const auto cands = CandidateSet::for_length(30);
  const auto th = calibrate_empirical_thresholds(k, kp, 30, 0.5, cfg);
  const auto draws = calibration_draws(k, kp, 30, cands, cfg);
  auto h0 = draws.h0, h1 = draws.h1;
  std::nth_element(h0.begin(), h0.begin() + 150, h0.end());
  std::nth_element(h1.begin(), h1.begin() + 150, h1.end());
  EXPECT_EQ(th.r_h0, h0[150]);
  EXPECT_EQ(th.r_h1, h1[150]);
}

TEST(Calibration, DeterministicAcrossThreadCounts) {
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const auto kp = KernelSpec::rbf(2.0, 5.0, 0.1);
  const auto a = calibrate_empirical_thresholds(k, kp, 25, 0.05, {200, 99, 1});
  const auto b = calibrate_empirical_thresholds(k, kp, 25, 0.05, {200, 99, 4});
  EXPECT_EQ(a.r_h0, b.r_h0);
  EXPECT_EQ(a.r_h1, b.r_h1);
  const auto c = calibrate_empirical_thresholds(k, kp, 25, 0.05, {200, 100, 1});
  EXPECT_NE(a.r_h0, c.r_h0);
}

TEST(Calibration, NullRejectionRateNearDelta) {
  const auto k = KernelSpec::rbf(1.0, 3.0, 0.1);
  const auto kp = KernelSpec::rbf(4.0, 3.0, 0.1);
  const long n = 50;
  const auto th = calibrate_empirical_thresholds(k, kp, n, 0.05, {2000, 1, 1});
  const auto cands = CandidateSet::for_length(n);
  const StructuralBreakScorer scorer(k, kp, n);
  int rejections = 0;
  for (int i = 0; i < 2000; ++i) {
    Rng r(mix_seed(424242, static_cast<std::uint64_t>(i)));
    if (scorer.max_statistic(sample_gaussian(scorer.null_factor(), r), cands) >= th.r_h0) ++rejections;
  }
  EXPECT_NEAR(rejections / 2000.0, 0.05, 0.02);
}
