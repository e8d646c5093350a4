#ifndef GPCPD_IO_HPP
#define GPCPD_IO_HPP

/** @file
 *
 * CSV ingestion/emission and JSON encodings of the domain types.
 */

#include <gpcpd/bocpd.hpp>
#include <gpcpd/cbocpd.hpp>
#include <gpcpd/error.hpp>
#include <gpcpd/eval.hpp>
#include <gpcpd/glrt.hpp>
#include <gpcpd/kernels.hpp>
#include <gpcpd/synth.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gpcpd {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace detail

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (first) {
      first = false;
      bool numeric = true;
      for (const auto& f : fields) numeric = numeric && detail::parse_double(f).has_value();
      if (!numeric) {
        t.header = std::move(fields);
        continue;
      }
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

/// One numeric column from a CSV with an optional header row. `column` is a
/// header name or a 0-based index; required when the file has several columns.
inline Series read_series_csv(std::istream& in, const std::optional<std::string>& column = std::nullopt) {
  const CsvTable t = read_csv_table(in);
  if (t.rows.empty()) throw ValidationError("CSV contains no data rows");
  const std::size_t width = t.header.empty() ? t.rows.front().size() : t.header.size();
  std::size_t col = 0;
  if (column) {
    const auto it = std::find(t.header.begin(), t.header.end(), *column);
    if (it != t.header.end()) {
      col = static_cast<std::size_t>(it - t.header.begin());
    } else if (const auto idx = detail::parse_double(*column); idx && *idx >= 0 && *idx == std::floor(*idx)) {
      col = static_cast<std::size_t>(*idx);
    } else {
      throw ValidationError("column '" + *column + "' not found");
    }
    if (col >= width) throw ValidationError("column index out of range");
  } else if (width != 1) {
    throw ValidationError("CSV has " + std::to_string(width) + " columns; select one with --column");
  }
  Series out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto v = col < row.size() ? detail::parse_double(row[col]) : std::nullopt;
    if (!v || !std::isfinite(*v)) throw ValidationError("non-numeric value in data row " + std::to_string(r + 1));
    out.push_back(*v);
  }
  return out;
}

inline Series read_series_csv(const std::string& path, const std::optional<std::string>& column = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_series_csv(in, column);
}

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline void write_series_csv(std::ostream& out, std::span<const double> x) {
  out << "value\n";
  for (double v : x) out << format_double(v) << '\n';
}

/// Dense matrix, row t, column r, linear probabilities; absent cells are 0.
inline void write_run_length_csv(std::ostream& out, const RunLengthPosterior& p) {
  const std::size_t width = p.max_width();
  for (const auto& row : p.rows) {
    for (std::size_t r = 0; r < width; ++r) {
      if (r) out << ',';
      out << (r < row.size() ? format_double(row[r]) : "0");
    }
    out << '\n';
  }
}

inline void write_predictions_csv(std::ostream& out, std::span<const PredictiveGaussian> pred,
                                  std::span<const double> actual) {
  out << "t,mean,variance,value\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out << i + 1 << ',' << format_double(pred[i].mean) << ',' << format_double(pred[i].variance) << ','
        << (i < actual.size() ? format_double(actual[i]) : "") << '\n';
  }
}

inline std::vector<PredictiveGaussian> read_predictions_csv(std::istream& in) {
  const CsvTable t = read_csv_table(in);
  auto index_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw ValidationError("predictions CSV lacks a '" + name + "' column");
    return static_cast<std::size_t>(it - t.header.begin());
  };
  const std::size_t mc = index_of("mean"), vc = index_of("variance");
  std::vector<PredictiveGaussian> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto m = mc < row.size() ? detail::parse_double(row[mc]) : std::nullopt;
    const auto v = vc < row.size() ? detail::parse_double(row[vc]) : std::nullopt;
    if (!m || !v || !(*v > 0.0)) throw ValidationError("bad prediction in row " + std::to_string(r + 1));
    out.push_back({*m, *v});
  }
  return out;
}

inline void write_point_scores_csv(std::ostream& out, std::span<const PointScore> scores) {
  out << "t,nll,squared_error\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << i + 1 << ',' << format_double(scores[i].nll) << ',' << format_double(scores[i].squared_error) << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON

/// Non-finite doubles become strings ("inf", "-inf", "nan").
inline Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number_from(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ValidationError("expected a number, got " + j.dump());
}

inline Json to_json(const KernelSpec& k) {
  return Json{{"family", "rbf"},
              {"signal_variance", k.signal_variance},
              {"length_scale", k.length_scale},
              {"noise_variance", k.noise_variance}};
}

/// Accepts the flat record written by to_json; unknown keys are rejected.
inline KernelSpec kernel_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("kernel must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "family" && key != "signal_variance" && key != "length_scale" && key != "noise_variance") {
      throw ValidationError("unknown kernel key '" + key + "'");
    }
  }
  if (j.contains("family") && j.at("family") != "rbf") throw ValidationError("only the rbf kernel family is supported");
  KernelSpec k;
  try {
    k.signal_variance = j.at("signal_variance").get<double>();
    k.length_scale = j.at("length_scale").get<double>();
    k.noise_variance = j.value("noise_variance", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad kernel record: ") + e.what());
  }
  k.validate();
  return k;
}

inline Json to_json(const LrtOutcome& o) {
  Json stats = Json::array();
  for (std::size_t i = 0; i < o.candidates.size(); ++i) {
    Json row{{"t", o.candidates[i]}, {"stat", number(o.stats[i])}};
    if (i < o.estimates.size()) row["estimate"] = number(o.estimates[i]);
    stats.push_back(std::move(row));
  }
  Json j{{"t_star", o.t_star}, {"stat_max", number(o.stat_max)}};
  if (o.verdicts_set) {
    j["threshold_h0"] = number(o.threshold_h0);
    j["threshold_h1"] = number(o.threshold_h1);
    j["verdict_t0"] = o.verdict_t0;
    j["verdict_t1"] = o.verdict_t1;
    j["verdict"] = to_string(o.verdict);
  }
  j["skipped"] = o.skipped;
  j["per_candidate"] = std::move(stats);
  return j;
}

inline Json to_json(const ThresholdSpec& t) {
  return Json{{"delta", t.delta}, {"bound_V", t.bound_V}, {"c0", number(t.c0)}, {"r_h0", number(t.r_h0)},
              {"r_h1", number(t.r_h1)}, {"valid", t.valid()}};
}

inline Json to_json(const ScoreSummary& s) {
  return Json{{"mean_nll", s.mean_nll}, {"ci95_nll", s.ci95_nll}, {"mean_mse", s.mean_mse},
              {"ci95_mse", s.ci95_mse}, {"n_points", s.n_points}};
}

inline Json to_json(const PairedComparison& c) {
  return Json{{"mean_difference", c.mean_difference},
              {"t_statistic", number(c.t_statistic)},
              {"p_value", c.p_value},
              {"runs", c.runs}};
}

inline Json to_json(const WindowDecision& d) {
  return Json{{"t", d.t},
              {"statistic", number(d.statistic)},
              {"threshold_h0", number(d.threshold_h0)},
              {"threshold_h1", number(d.threshold_h1)}};
}

inline Json to_json(const ScenarioSpec& s) {
  Json segs = Json::array();
  for (const auto& seg : s.segments) segs.push_back(Json{{"start", seg.start}, {"kernel", to_json(seg.kernel)}});
  Json iv = Json::array();
  for (const auto& i : s.cp_draw_intervals) iv.push_back(Json::array({i.lo, i.hi}));
  return Json{{"length", s.length},
              {"noise_variance", s.noise_variance},
              {"seed", s.seed},
              {"segments", std::move(segs)},
              {"cp_draw_intervals", std::move(iv)}};
}

inline ScenarioSpec scenario_from_json(const Json& j) {
  static const std::vector<std::string> allowed{"length", "noise_variance", "seed", "segments", "cp_draw_intervals"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("unknown scenario key '" + key + "'");
    }
  }
  ScenarioSpec s;
  try {
    s.length = j.at("length").get<long>();
    s.noise_variance = j.value("noise_variance", 0.1);
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& seg : j.at("segments")) {
      s.segments.push_back({seg.value("start", 1L), kernel_from_json(seg.at("kernel"))});
    }
    if (j.contains("cp_draw_intervals")) {
      for (const auto& iv : j.at("cp_draw_intervals")) s.cp_draw_intervals.push_back({iv.at(0).get<long>(), iv.at(1).get<long>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad scenario spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline Json bocpd_summary_json(const BocpdResult& r) {
  Json pred = Json::array();
  for (const auto& p : r.predictive) pred.push_back(Json::array({p.mean, p.variance}));
  return Json{{"steps", r.predictive.size()},
              {"change_points", r.change_points},
              {"map_run_length", r.map_run_length},
              {"hazards", r.hazards},
              {"predictive", std::move(pred)}};
}

}  // namespace gpcpd

#endif
