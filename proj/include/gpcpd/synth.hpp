#ifndef GPCPD_SYNTH_HPP
#define GPCPD_SYNTH_HPP

#include <gpcpd/error.hpp>
#include <gpcpd/gp.hpp>
#include <gpcpd/kernels.hpp>
#include <gpcpd/random.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace gpcpd {

struct SegmentSpec {
  /// 1-based first index of the segment.
  long start = 1;
  /// Only the RBF part is used; observation noise comes from the scenario.
  KernelSpec kernel;
};

/// Closed integer range [lo, hi].
struct Interval {
  long lo = 0;
  long hi = 0;
};

struct ScenarioSpec {
  long length = 0;
  std::vector<SegmentSpec> segments;
  double noise_variance = 0.0;
  /// When present, segment k+1 starts at a uniform draw from interval k.
  std::vector<Interval> cp_draw_intervals;
  std::uint64_t seed = 0;

  void validate() const {
    if (length < 1) throw ValidationError("scenario length must be positive");
    if (segments.empty()) throw ValidationError("scenario needs at least one segment");
    if (!(noise_variance >= 0.0)) throw ValidationError("noise variance must be nonnegative");
    for (const auto& s : segments) s.kernel.validate();
    if (cp_draw_intervals.empty()) {
      if (segments.front().start != 1) throw ValidationError("first segment must start at 1");
      for (std::size_t i = 1; i < segments.size(); ++i) {
        if (segments[i].start <= segments[i - 1].start || segments[i].start > length) {
          throw ValidationError("segment starts must increase strictly within [1, T]");
        }
      }
    } else {
      if (cp_draw_intervals.size() + 1 != segments.size()) {
        throw ValidationError("need one draw interval per change point");
      }
      for (std::size_t i = 0; i < cp_draw_intervals.size(); ++i) {
        const auto& iv = cp_draw_intervals[i];
        if (iv.lo > iv.hi || iv.lo <= 1 || iv.hi >= length) {
          throw ValidationError("draw intervals must lie inside (1, T)");
        }
        if (i > 0 && iv.lo <= cp_draw_intervals[i - 1].hi) throw ValidationError("draw intervals must be disjoint and ordered");
      }
    }
  }
};

struct Scenario {
  Series values;
  /// 1-based first index of every segment after the first.
  std::vector<long> true_cps;
};

/// Independent zero-mean GP draw per segment plus white noise. The stream is
/// consumed as: change point draws, segment normals in order, noise normals.
inline Scenario sample_piecewise_gp(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<long> starts;
  starts.push_back(1);
  if (spec.cp_draw_intervals.empty()) {
    for (std::size_t i = 1; i < spec.segments.size(); ++i) starts.push_back(spec.segments[i].start);
  } else {
    for (const auto& iv : spec.cp_draw_intervals) starts.push_back(rng.uniform_int(iv.lo, iv.hi));
  }

  Scenario out;
  out.values.reserve(static_cast<std::size_t>(spec.length));
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const long begin = starts[s];
    const long end = s + 1 < starts.size() ? starts[s + 1] : spec.length + 1;
    if (s > 0) out.true_cps.push_back(begin);
    KernelSpec k = spec.segments[s].kernel;
    k.noise_variance = 0.0;
    const auto f = cholesky(covariance_matrix(k, end - begin));
    const Vector draw = sample_gaussian(f, rng);
    out.values.insert(out.values.end(), draw.data(), draw.data() + draw.size());
  }
  const double sd = std::sqrt(spec.noise_variance);
  for (double& v : out.values) v += sd * rng.normal();
  return out;
}

enum class Preset { LenChange, VarChange };

inline Preset parse_preset(const std::string& name) {
  if (name == "LEN_CHANGE" || name == "len-change") return Preset::LenChange;
  if (name == "VAR_CHANGE" || name == "var-change") return Preset::VarChange;
  throw ValidationError("unknown preset '" + name + "' (expected LEN_CHANGE or VAR_CHANGE)");
}

inline std::string to_string(Preset p) { return p == Preset::LenChange ? "LEN_CHANGE" : "VAR_CHANGE"; }

/// T = 400, change points uniform in [75, 125] and [275, 325], noise 0.1.
/// LEN_CHANGE: length scale 3 -> 20 -> 1 at unit variance.
/// VAR_CHANGE: variance 1 -> 4 -> 0.3 at length scale 3.
inline ScenarioSpec preset(Preset p, std::uint64_t seed) {
  ScenarioSpec s;
  s.length = 400;
  s.noise_variance = 0.1;
  s.cp_draw_intervals = {{75, 125}, {275, 325}};
  s.seed = seed;
  if (p == Preset::LenChange) {
    s.segments = {{1, KernelSpec::rbf(1.0, 3.0)}, {0, KernelSpec::rbf(1.0, 20.0)}, {0, KernelSpec::rbf(1.0, 1.0)}};
  } else {
    s.segments = {{1, KernelSpec::rbf(1.0, 3.0)}, {0, KernelSpec::rbf(4.0, 3.0)}, {0, KernelSpec::rbf(0.3, 3.0)}};
  }
  return s;
}

}  // namespace gpcpd

#endif
