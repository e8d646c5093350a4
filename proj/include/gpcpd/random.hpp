#ifndef GPCPD_RANDOM_HPP
#define GPCPD_RANDOM_HPP

#include <gpcpd/matcore.hpp>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cstdint>
#include <random>

namespace gpcpd {

/// MT19937-64 with Boost distributions, whose algorithms (unlike the std
/// ones) are fixed, so streams match across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  long uniform_int(long lo, long hi) {
    return boost::random::uniform_int_distribution<long>(lo, hi)(engine_);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finalizer; derives independent stream seeds from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// One draw from N(0, L L^T).
inline Vector sample_gaussian(const SpdFactorization& f, Rng& rng) {
  return f.lower() * rng.normal_vector(f.order());
}

}  // namespace gpcpd

#endif
