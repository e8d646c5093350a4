#include <gpcpd/io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace gpcpd;

TEST(ReadSeriesCsv, HeaderlessSingleColumn) {
  std::istringstream in("1.5\n-2\n\n3e-1\n");
  EXPECT_EQ(read_series_csv(in), (Series{1.5, -2.0, 0.3}));
}

TEST(ReadSeriesCsv, SingleHeader) {
  std::istringstream in("flow\r\n1120\r\n1160\r\n963\r\n");
  EXPECT_EQ(read_series_csv(in), (Series{1120, 1160, 963}));
}

TEST(ReadSeriesCsv, MultiColumnNeedsSelector) {
  const std::string csv = "year,flow\n1871,1120\n1872,1160\n";
  std::istringstream a(csv);
  EXPECT_THROW(read_series_csv(a), ValidationError);
  std::istringstream b(csv);
  EXPECT_EQ(read_series_csv(b, "flow"), (Series{1120, 1160}));
  std::istringstream c(csv);
  EXPECT_EQ(read_series_csv(c, "0"), (Series{1871, 1872}));
  std::istringstream d(csv);
  EXPECT_THROW(read_series_csv(d, "depth"), ValidationError);
}

TEST(ReadSeriesCsv, RejectsBadRows) {
  std::istringstream a("value\n1\nabc\n");
  EXPECT_THROW(read_series_csv(a), ValidationError);
  std::istringstream b("value\n");
  EXPECT_THROW(read_series_csv(b), ValidationError);
  std::istringstream c("1\nnan\n");
  EXPECT_THROW(read_series_csv(c), ValidationError);
  EXPECT_THROW(read_series_csv(std::string("/nonexistent/file.csv")), IoError);
}

TEST(WriteSeriesCsv, RoundTripsExactly) {
  const Series x{0.1, -1.0 / 3.0, 1e-300, 12345.678901234567};
  std::stringstream ss;
  write_series_csv(ss, x);
  EXPECT_EQ(read_series_csv(ss), x);
}

TEST(RunLengthCsv, DenseWithZeroFill) {
  RunLengthPosterior p;
  p.rows = {{0.25, 0.75}, {0.5, 0.25, 0.25}};
  std::ostringstream out;
  write_run_length_csv(out, p);
  EXPECT_EQ(out.str(), "0.25,0.75,0\n0.5,0.25,0.25\n");
}

TEST(PredictionsCsv, RoundTrip) {
  const std::vector<PredictiveGaussian> pred{{0.1, 1.0}, {-0.5, 0.25}};
  const std::vector<double> x{0.0, 1.0};
  std::stringstream ss;
  write_predictions_csv(ss, pred, x);
  const auto back = read_predictions_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].mean, -0.5);
  EXPECT_EQ(back[1].variance, 0.25);
  std::istringstream bad("t,mean,variance\n1,0,0\n");
  EXPECT_THROW(read_predictions_csv(bad), ValidationError);
}

TEST(Json, NonFiniteNumbers) {
  EXPECT_EQ(number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_TRUE(std::isinf(number_from(Json("-inf"))));
  EXPECT_EQ(number_from(Json(2.5)), 2.5);
  EXPECT_THROW(number_from(Json("x")), ValidationError);
}

TEST(Json, KernelRoundTripAndUnknownKeys) {
  const auto k = KernelSpec::rbf(1.5, 2.5, 0.1);
  EXPECT_EQ(kernel_from_json(to_json(k)), k);
  EXPECT_THROW(kernel_from_json(Json{{"signal_variance", 1.0}, {"length_scale", 1.0}, {"period", 3}}),
               ValidationError);
  EXPECT_THROW(kernel_from_json(Json{{"signal_variance", -1.0}, {"length_scale", 1.0}}), ValidationError);
}

TEST(Json, ScenarioRoundTrip) {
  const auto spec = preset(Preset::VarChange, 9);
  const auto back = scenario_from_json(to_json(spec));
  EXPECT_EQ(sample_piecewise_gp(back).values, sample_piecewise_gp(spec).values);
  Json j = to_json(spec);
  j["extra"] = 1;
  EXPECT_THROW(scenario_from_json(j), ValidationError);
}

TEST(Json, LrtOutcomeKeysInStableOrder) {
  const std::vector<double> x{-1, -1, 1, 1, 1};
  const auto o = mean_glrt(x, SymMatrix::identity(5), CandidateSet::with_margin(5, 1), 0.05);
  const auto j = to_json(o);
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys.front(), "t_star");
  EXPECT_EQ(keys.back(), "per_candidate");
  EXPECT_EQ(j["verdict"], "no-change");
  EXPECT_EQ(j["per_candidate"].size(), 3u);
}
