// gpcpd command-line driver: simulate, fit, test, bocpd, cbocpd, eval.

#include <gpcpd/gpcpd.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace gpcpd;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

void emit(const Json& report, const std::string& path) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

Json header(const std::string& command, Json config) {
  return Json{{"command", command}, {"version", kVersion}, {"config", std::move(config)}};
}

/// "a:b", 1-based inclusive; either side may be empty.
std::pair<long, long> parse_range(const std::string& s, long n) {
  if (s.empty()) return {1, n};
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ValidationError("range must look like a:b, got '" + s + "'");
  auto part = [&](const std::string& p, long dflt) {
    if (p.empty()) return dflt;
    try {
      std::size_t used = 0;
      const long v = std::stol(p, &used);
      if (used != p.size()) throw std::invalid_argument(p);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad range bound '" + p + "'");
    }
  };
  const long a = part(s.substr(0, colon), 1), b = part(s.substr(colon + 1), n);
  if (a < 1 || b > n || a > b) {
    throw ValidationError("range " + s + " is outside 1:" + std::to_string(n) + " or empty");
  }
  return {a, b};
}

double parse_threshold(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("bad threshold '" + s + "'");
  }
}

// ---------------------------------------------------------------------------

struct DataArgs {
  std::string path;
  std::string column;

  void add(CLI::App* app) {
    app->add_option("--data", path, "Input CSV (one value per row)")->required();
    app->add_option("--column", column, "Column name or 0-based index for multi-column CSVs");
  }
  Series load() const {
    const auto opt = column.empty() ? std::nullopt : std::optional<std::string>(column);
    return read_series_csv(path, opt);
  }
  Json json() const { return Json{{"path", path}, {"column", column.empty() ? Json(nullptr) : Json(column)}}; }
};

/// Kernel from a JSON file (a bare kernel or any report with a "kernel" key)
/// or from individual hyperparameter flags.
struct KernelArgs {
  std::string prefix;
  std::string file;
  double signal_variance = 1.0;
  double length_scale = 10.0;
  double noise_variance = 0.1;
  std::vector<CLI::Option*> opts;

  KernelArgs(std::string p, double sv, double ls, double nv)
      : prefix(std::move(p)), signal_variance(sv), length_scale(ls), noise_variance(nv) {}

  void add(CLI::App* app, const std::string& what) {
    opts.push_back(app->add_option("--" + prefix + "kernel", file, what + " kernel JSON"));
    opts.push_back(app->add_option("--" + prefix + "signal-variance", signal_variance, what + " signal variance")
                       ->capture_default_str());
    opts.push_back(
        app->add_option("--" + prefix + "length-scale", length_scale, what + " length scale")->capture_default_str());
    opts.push_back(app->add_option("--" + prefix + "noise-variance", noise_variance, what + " noise variance")
                       ->capture_default_str());
  }

  bool given() const {
    for (auto* o : opts)
      if (o->count() > 0) return true;
    return false;
  }

  KernelSpec resolve() const {
    if (!file.empty()) {
      const Json j = read_json_file(file);
      return kernel_from_json(j.contains("kernel") ? j.at("kernel") : j);
    }
    return KernelSpec::rbf(signal_variance, length_scale, noise_variance);
  }
};

struct FitArgs {
  int max_iters = FitConfig{}.max_iters;
  double tolerance = FitConfig{}.tolerance;

  void add(CLI::App* app) {
    app->add_option("--max-iters", max_iters, "Optimizer iteration cap")->capture_default_str();
    app->add_option("--tolerance", tolerance, "Optimizer relative tolerance")->capture_default_str();
  }
  FitConfig config() const {
    FitConfig c;
    c.max_iters = max_iters;
    c.tolerance = tolerance;
    return c;
  }
};

Json fit_json(const FitResult& r) {
  return Json{{"kernel", to_json(r.kernel)},
              {"log_likelihood", r.log_likelihood},
              {"initial_log_likelihood", r.initial_log_likelihood},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"improved", r.improved}};
}

/// Affine map to zero mean and unit variance, estimated on the training rows.
struct Standardizer {
  double mean = 0.0;
  double sd = 1.0;

  static Standardizer from(std::span<const double> x) {
    Standardizer s;
    for (double v : x) s.mean += v;
    s.mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
    if (!(s.sd > 0.0)) s.sd = 1.0;
    return s;
  }

  Series apply(const Series& x) const {
    Series z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean) / sd;
    return z;
  }

  void restore(std::vector<PredictiveGaussian>& pred) const {
    for (auto& p : pred) p = {p.mean * sd + mean, p.variance * sd * sd};
  }

  Json json() const { return Json{{"mean", mean}, {"sd", sd}}; }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateCmd {
  std::string preset_name;
  std::string spec_file;
  std::uint64_t seed = 0;
  std::string out;
  std::string truth;
  CLI::Option* seed_opt = nullptr;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("simulate", "Sample a piecewise-stationary GP series");
    auto* p = app->add_option("--preset", preset_name, "LEN_CHANGE or VAR_CHANGE");
    auto* s = app->add_option("--spec", spec_file, "Scenario JSON");
    p->excludes(s);
    seed_opt = app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--out", out, "Output data CSV")->required();
    app->add_option("--truth", truth, "Truth JSON (default: <out>.truth.json)");
    app->callback([this] { run(); });
  }

  void run() {
    ScenarioSpec spec;
    if (!preset_name.empty()) {
      spec = preset(parse_preset(preset_name), seed);
    } else if (!spec_file.empty()) {
      spec = scenario_from_json(read_json_file(spec_file));
      if (seed_opt->count() > 0) spec.seed = seed;
    } else {
      throw ValidationError("simulate needs --preset or --spec");
    }
    const auto scenario = sample_piecewise_gp(spec);
    std::ostringstream csv;
    write_series_csv(csv, scenario.values);
    write_file(out, csv.str());

    Json cfg{{"preset", preset_name.empty() ? Json(nullptr) : Json(preset_name)},
             {"spec_file", spec_file.empty() ? Json(nullptr) : Json(spec_file)},
             {"seed", spec.seed},
             {"out", out}};
    Json report = header("simulate", std::move(cfg));
    report["spec"] = to_json(spec);
    report["true_cps"] = scenario.true_cps;
    emit(report, truth.empty() ? out + ".truth.json" : truth);
  }
};

// ---------------------------------------------------------------------------
// fit

struct FitCmd {
  DataArgs data;
  KernelArgs init{"", 1.0, 10.0, 0.1};
  FitArgs fit;
  std::string train = "1:100";
  bool standardize = false;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("fit", "Fit RBF hyperparameters by maximum marginal likelihood");
    data.add(app);
    init.add(app, "Initial");
    fit.add(app);
    app->add_flag("--standardize", standardize, "Fit on training rows scaled to zero mean, unit variance");
    app->add_option("--train", train, "Training rows a:b (1-based, inclusive; clipped to the series)")
        ->capture_default_str();
    app->add_option("--out", out, "Report JSON (default: stdout)");
    app->callback([this] { run(); });
  }

  void run() {
    Series x = data.load();
    const auto n = static_cast<long>(x.size());
    const auto [a, b] = parse_range(train, n, true);
    const std::span<const double> rows(x.data() + a - 1, static_cast<std::size_t>(b - a + 1));
    const Standardizer st = standardize ? Standardizer::from(rows) : Standardizer{};
    x = st.apply(x);
    const std::span<const double> xs(x.data() + a - 1, static_cast<std::size_t>(b - a + 1));
    const KernelSpec k0 = init.resolve();
    const auto r = fit_hyperparameters(xs, k0, fit.config());
    Json cfg{{"data", data.json()},
             {"train", {a, b}},
             {"standardize", standardize ? st.json() : Json(false)},
             {"init", to_json(k0)},
             {"max_iters", fit.max_iters},
             {"tolerance", fit.tolerance}};
    Json report = header("fit", std::move(cfg));
    report.update(fit_json(r));
    emit(report, out);
  }

  static std::pair<long, long> parse_range(const std::string& s, long n, bool clip) {
    if (!clip) return ::parse_range(s, n);
    const auto colon = s.find(':');
    if (colon != std::string::npos && colon + 1 < s.size()) {
      const std::string hi = s.substr(colon + 1);
      long b = 0;
      try {
        b = std::stol(hi);
      } catch (const std::exception&) {
        throw ValidationError("bad range bound '" + hi + "'");
      }
      return ::parse_range(s.substr(0, colon + 1) + std::to_string(std::min(b, n)), n);
    }
    return ::parse_range(s, n);
  }
};

/// Kernel used by the detectors: given explicitly, or fitted on the training rows.
struct DetectorKernel {
  KernelArgs kernel{"", 1.0, 10.0, 0.1};
  FitArgs fit;
  std::string train = "1:100";
  bool standardize = false;

  void add(CLI::App* app) {
    kernel.add(app, "Detector (skips fitting when given)");
    fit.add(app);
    app->add_option("--train", train, "Rows used to fit the kernel and excluded from scoring")->capture_default_str();
    app->add_flag("--standardize", standardize,
                  "Run on data scaled by the training rows' mean and sd; predictions are mapped back");
  }

  std::pair<long, long> train_range(long n) const { return FitCmd::parse_range(train, n, true); }

  Standardizer standardizer(const Series& x, Json& cfg) const {
    if (!standardize) {
      cfg["standardize"] = false;
      return {};
    }
    const auto [a, b] = train_range(static_cast<long>(x.size()));
    const auto st = Standardizer::from(std::span<const double>(x.data() + a - 1, static_cast<std::size_t>(b - a + 1)));
    cfg["standardize"] = st.json();
    return st;
  }

  KernelSpec resolve(const Series& x, Json& report, Json& cfg) const {
    const auto [a, b] = train_range(static_cast<long>(x.size()));
    cfg["train"] = {a, b};
    if (kernel.given()) {
      const KernelSpec k = kernel.resolve();
      cfg["kernel_source"] = "given";
      return k;
    }
    const KernelSpec k0 = kernel.resolve();
    cfg["kernel_source"] = "fit";
    cfg["fit_init"] = to_json(k0);
    cfg["fit_max_iters"] = fit.max_iters;
    cfg["fit_tolerance"] = fit.tolerance;
    const std::span<const double> xs(x.data() + a - 1, static_cast<std::size_t>(b - a + 1));
    const auto r = fit_hyperparameters(xs, k0, fit.config());
    report["fit"] = fit_json(r);
    return r.kernel;
  }
};

// ---------------------------------------------------------------------------
// test

struct TestCmd {
  DataArgs data;
  KernelArgs null_k{"", 1.0, 10.0, 0.1};
  KernelArgs alt_k{"alt-", 1.0, 10.0, 0.1};
  KernelArgs cross_k{"cross-", 0.1, 10.0, 0.0};
  std::string family = "structural-break";
  std::string mode = "empirical";
  double delta = 0.05;
  long margin = -1;
  double pre_variance = std::numeric_limits<double>::quiet_NaN();
  double post_variance = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  int mc_samples = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("test", "Likelihood ratio test for a single change point");
    data.add(app);
    null_k.add(app, "Null");
    alt_k.add(app, "Post-change (structural-break, general)");
    cross_k.add(app, "Cross-regime (general)");
    app->add_option("--family", family, "structural-break | general | variance | scaled | mean")
        ->check(CLI::IsMember({"structural-break", "general", "variance", "scaled", "mean"}))
        ->capture_default_str();
    app->add_option("--mode", mode, "Thresholds: theoretical | empirical")
        ->check(CLI::IsMember({"theoretical", "empirical"}))
        ->capture_default_str();
    app->add_option("--delta", delta, "Error level")->capture_default_str();
    app->add_option("--margin", margin, "Candidates are margin+1..n-margin (default max(2, ceil(0.05 n)))");
    app->add_option("--pre-variance", pre_variance, "variance: pre-change variance (default null marginal)");
    app->add_option("--post-variance", post_variance, "variance: fixed post-change variance (default estimated)");
    app->add_option("--alpha", alpha, "scaled: fixed scale (default estimated)");
    app->add_option("--bound", bound, "theoretical: bound V on |x| (default max |x|)");
    app->add_option("--mc-samples", mc_samples, "empirical: draws per hypothesis")->capture_default_str();
    app->add_option("--seed", seed, "empirical: calibration seed")->capture_default_str();
    app->add_option("--threads", threads, "empirical: worker threads")->capture_default_str();
    app->add_option("--out", out, "Report JSON (default: stdout)");
    app->callback([this] { run(); });
  }

  std::optional<ChangeFamily> fixed_family(const KernelSpec& k) const {
    if (family == "structural-break") return ChangeFamily::structural_break(k, alt_k.resolve());
    if (family == "general") return ChangeFamily::general(k, alt_k.resolve(), cross_k.resolve());
    if (family == "variance" && std::isfinite(post_variance)) return ChangeFamily::variance_only(pre(k), post_variance);
    if (family == "scaled" && std::isfinite(alpha)) return ChangeFamily::scaled(k, alpha);
    return std::nullopt;
  }

  double pre(const KernelSpec& k) const { return std::isfinite(pre_variance) ? pre_variance : k.marginal_variance(); }

  void run() {
    const Series x = data.load();
    const auto n = static_cast<long>(x.size());
    const KernelSpec k = null_k.resolve();
    const CandidateSet cands = margin < 0 ? CandidateSet::for_length(n) : CandidateSet::with_margin(n, margin);
    cands.validate(n);

    Json cfg{{"data", data.json()}, {"family", family},        {"mode", mode},
             {"delta", delta},      {"margin", cands.margin}, {"null_kernel", to_json(k)}};
    Json extra = Json::object();

    LrtOutcome o;
    const auto fam = fixed_family(k);
    if (family == "mean") {
      o = mean_glrt(x, covariance_matrix(k, n), cands, delta);
      extra["threshold"] = mean_glrt_threshold(n, delta);
    } else if (family == "structural-break") {
      o = structural_break_lrt(x, k, fam->post.value(), cands);
    } else if (fam) {
      o = cov_lrt(x, *fam, cands);
    } else if (family == "variance") {
      o = variance_lrt(x, pre(k), cands);
    } else {
      o = scaled_lrt(x, k, cands);
    }
    if (fam) {
      if (fam->post) cfg["alt_kernel"] = to_json(*fam->post);
      if (fam->cross) cfg["cross_kernel"] = to_json(*fam->cross);
    }
    if (family == "variance") {
      cfg["pre_variance"] = pre(k);
      cfg["post_variance"] = number(post_variance);
    }
    if (family == "scaled") cfg["alpha"] = number(alpha);

    if (family != "mean") {
      if (mode == "theoretical") {
        if (!fam) throw ValidationError("theoretical thresholds need a fixed alternative (--post-variance / --alpha)");
        double v = bound;
        if (!std::isfinite(v)) {
          v = 0.0;
          for (double e : x) v = std::max(v, std::abs(e));
        }
        cfg["bound_V"] = v;
        const auto spec = theoretical_thresholds(*fam, n, cands, delta, v);
        o = run_test(std::move(o), spec.r_h0, spec.r_h1);
        extra["thresholds"] = to_json(spec);
        extra["no_valid_threshold"] = !spec.valid();
      } else {
        if (family != "structural-break") {
          throw ValidationError("empirical calibration is available for the structural-break family only");
        }
        cfg["mc_samples"] = mc_samples;
        cfg["seed"] = seed;
        cfg["threads"] = threads;
        const auto th = calibrate_empirical_thresholds(k, fam->post.value(), n, delta,
                                                       {mc_samples, seed, threads}, cands);
        o = run_test(std::move(o), th.r_h0, th.r_h1);
      }
    }
    Json report = header("test", std::move(cfg));
    report["n"] = n;
    report.update(extra);
    report["outcome"] = to_json(o);
    emit(report, out);
  }
};

// ---------------------------------------------------------------------------
// bocpd / cbocpd

struct DetectorOutputs {
  std::string out;
  std::string run_length_out;
  std::string predictions_out;
  long max_run_length = BocpdConfig{}.max_run_length;
  double prune = BocpdConfig{}.prune_threshold;
  bool no_truncate = false;
  double lambda = 200.0;

  void add(CLI::App* app) {
    app->add_option("--lambda", lambda, "Expected run length; hazard = 1/lambda")->capture_default_str();
    app->add_option("--max-run-length", max_run_length, "Run-length cap")->capture_default_str();
    app->add_option("--prune", prune, "Drop run lengths below this posterior mass")->capture_default_str();
    app->add_flag("--no-truncate", no_truncate, "Keep every run length");
    app->add_option("--out", out, "Report JSON (default: stdout)");
    app->add_option("--run-length-out", run_length_out, "Run-length posterior CSV (row t, column r)");
    app->add_option("--predictions-out", predictions_out, "One-step predictions CSV");
  }

  BocpdConfig config() const {
    BocpdConfig c;
    c.max_run_length = max_run_length;
    c.prune_threshold = prune;
    c.truncate = !no_truncate;
    return c;
  }

  double hazard() const {
    if (!(lambda > 1.0)) throw ValidationError("lambda must exceed 1");
    return 1.0 / lambda;
  }

  void fill(Json& cfg) const {
    const auto c = config();
    cfg["lambda"] = lambda;
    cfg["max_run_length"] = c.max_run_length;
    cfg["prune_threshold"] = c.prune_threshold;
    cfg["truncate"] = c.truncate;
    cfg["declare_high"] = c.declare_high;
    cfg["declare_low"] = c.declare_low;
  }

  void write(const BocpdResult& r, const Series& x, long train_end, Json& report) const {
    if (!run_length_out.empty()) {
      std::ostringstream s;
      write_run_length_csv(s, r.posterior);
      write_file(run_length_out, s.str());
    }
    if (!predictions_out.empty()) {
      std::ostringstream s;
      write_predictions_csv(s, r.predictive, x);
      write_file(predictions_out, s.str());
    }
    report["summary"] = bocpd_summary_json(r);
    const auto n = x.size();
    if (static_cast<std::size_t>(train_end) < n) {
      report["score"] = to_json(score(r.predictive, x, static_cast<std::size_t>(train_end), n));
      report["score_range"] = {train_end + 1, static_cast<long>(n)};
    }
  }
};

struct BocpdCmd {
  DataArgs data;
  DetectorKernel kernel;
  DetectorOutputs outputs;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("bocpd", "Bayesian online change point detection with a GP predictive");
    data.add(app);
    kernel.add(app);
    outputs.add(app);
    app->callback([this] { run(); });
  }

  void run() {
    const Series x = data.load();
    Json cfg{{"data", data.json()}};
    Json report = Json::object();
    const Standardizer st = kernel.standardizer(x, cfg);
    const Series z = st.apply(x);
    const KernelSpec k = kernel.resolve(z, report, cfg);
    cfg["kernel"] = to_json(k);
    outputs.fill(cfg);
    auto r = bocpd_run(z, k, HazardPolicy::constant(outputs.hazard()), outputs.config());
    st.restore(r.predictive);
    Json full = header("bocpd", std::move(cfg));
    full.update(report);
    outputs.write(r, x, kernel.train_range(static_cast<long>(x.size())).second, full);
    emit(full, outputs.out);
  }
};

struct CbocpdCmd {
  DataArgs data;
  DetectorKernel kernel;
  DetectorOutputs outputs;
  CbocpdConfig cb;
  bool no_refit = false;
  std::vector<std::string> fixed;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("cbocpd", "BOCPD with window likelihood ratio tests setting the hazard");
    data.add(app);
    kernel.add(app);
    outputs.add(app);
    app->add_option("--half-window", cb.half_window, "Window is 2m+1 points")->capture_default_str();
    app->add_option("--delta", cb.delta, "Test error level")->capture_default_str();
    app->add_option("--mc-samples", cb.mc_samples, "Calibration draws per hypothesis")->capture_default_str();
    app->add_option("--seed", cb.seed, "Calibration seed")->capture_default_str();
    app->add_option("--threads", cb.threads, "Calibration worker threads")->capture_default_str();
    app->add_flag("--no-refit", no_refit, "Use the null kernel as the alternative instead of refitting");
    app->add_option("--fixed-thresholds", fixed, "Skip calibration: r_h0,r_h1 (accepts inf, -inf; write --fixed-thresholds=inf,-inf)")
        ->expected(2)
        ->delimiter(',');
    app->callback([this] { run(); });
  }

  void run() {
    const Series x = data.load();
    Json cfg{{"data", data.json()}};
    Json report = Json::object();
    const Standardizer st = kernel.standardizer(x, cfg);
    const Series z = st.apply(x);
    const KernelSpec k = kernel.resolve(z, report, cfg);
    cfg["kernel"] = to_json(k);
    outputs.fill(cfg);
    cb.hazard_const = outputs.hazard();
    cb.bocpd = outputs.config();
    cb.refit_alternative = !no_refit;
    cb.fit = kernel.fit.config();
    if (!fixed.empty()) cb.fixed_thresholds = std::make_pair(parse_threshold(fixed[0]), parse_threshold(fixed[1]));
    cfg["half_window"] = cb.half_window;
    cfg["delta"] = cb.delta;
    cfg["mc_samples"] = cb.mc_samples;
    cfg["seed"] = cb.seed;
    cfg["threads"] = cb.threads;
    cfg["refit_alternative"] = cb.refit_alternative;
    cfg["fixed_thresholds"] = cb.fixed_thresholds
                                  ? Json::array({number(cb.fixed_thresholds->first), number(cb.fixed_thresholds->second)})
                                  : Json(nullptr);

    auto r = cbocpd_run(z, k, cb);
    st.restore(r.bocpd.predictive);
    Json full = header("cbocpd", std::move(cfg));
    full.update(report);
    outputs.write(r.bocpd, x, kernel.train_range(static_cast<long>(x.size())).second, full);
    Json ch = Json::array(), nc = Json::array();
    for (const auto& d : r.confirmed_changes) ch.push_back(to_json(d));
    for (const auto& d : r.confirmed_nonchanges) nc.push_back(to_json(d));
    full["confirmed_changes"] = std::move(ch);
    full["confirmed_nonchanges"] = std::move(nc);
    full["windows_tested"] = r.windows_tested;
    full["calibrations"] = r.calibrations;
    full["warnings"] = r.warnings;
    emit(full, outputs.out);
  }
};

// ---------------------------------------------------------------------------
// eval

struct EvalCmd {
  std::vector<std::string> predictions;
  std::string data_path;
  std::string column;
  std::string range;
  std::string scores_out;
  std::vector<std::string> paired;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "Score one-step predictions or compare paired per-run scores");
    app->add_option("--predictions", predictions, "Predictions CSV (t,mean,variance[,value]); repeatable");
    app->add_option("--data", data_path, "Observed series (default: the predictions' value column)");
    app->add_option("--column", column, "Column of --data");
    app->add_option("--range", range, "Scored rows a:b (1-based, inclusive; default all)");
    app->add_option("--scores-out", scores_out, "Per-point scores CSV for every row (single predictions file)");
    app->add_option("--paired", paired, "Two per-run score CSVs A B; tests whether A is lower")->expected(2);
    app->add_option("--out", out, "Report JSON (default: stdout)");
    app->callback([this] { run(); });
  }

  Series observed(const std::string& pred_path) const {
    if (!data_path.empty()) {
      return read_series_csv(data_path, column.empty() ? std::nullopt : std::optional<std::string>(column));
    }
    return read_series_csv(pred_path, std::string("value"));
  }

  void run() {
    if (predictions.empty() && paired.empty()) throw ValidationError("eval needs --predictions or --paired");
    if (!scores_out.empty() && predictions.size() != 1) {
      throw ValidationError("--scores-out needs exactly one --predictions file");
    }
    Json cfg{{"predictions", predictions},
             {"data", data_path.empty() ? Json(nullptr) : Json(data_path)},
             {"column", column.empty() ? Json(nullptr) : Json(column)},
             {"range", range.empty() ? Json(nullptr) : Json(range)},
             {"paired", paired}};
    Json report = header("eval", std::move(cfg));

    if (!predictions.empty()) {
      Json results = Json::array();
      double best = std::numeric_limits<double>::infinity();
      for (const auto& path : predictions) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path + "'");
        const auto pred = read_predictions_csv(in);
        const Series x = observed(path);
        if (x.size() != pred.size()) throw DimensionMismatch("'" + path + "' and the series differ in length");
        const auto [a, b] = parse_range(range, static_cast<long>(x.size()));
        const auto s = score(pred, x, static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b));
        if (!scores_out.empty()) {
          std::ostringstream csv;
          write_point_scores_csv(csv, point_scores(pred, x));
          write_file(scores_out, csv.str());
        }
        Json row{{"predictions", path}, {"range", {a, b}}};
        row.update(to_json(s));
        best = std::min(best, s.mean_nll);
        results.push_back(std::move(row));
      }
      for (auto& row : results) row["mean_nll_rebased"] = row["mean_nll"].get<double>() - best;
      report["scores"] = std::move(results);
    }
    if (!paired.empty()) {
      const Series a = read_series_csv(paired[0]);
      const Series b = read_series_csv(paired[1]);
      report["paired"] = to_json(paired_compare(a, b));
    }
    emit(report, out);
  }
};

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation:
      return kExitValidation;
    case ErrorCategory::Numerical:
      return kExitNumerical;
    case ErrorCategory::Io:
      return kExitIo;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process change point detection"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SimulateCmd simulate;
  FitCmd fit;
  TestCmd test;
  BocpdCmd bocpd;
  CbocpdCmd cbocpd;
  EvalCmd eval;
  simulate.add(app);
  fit.add(app);
  test.add(app);
  bocpd.add(app);
  cbocpd.add(app);
  eval.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
