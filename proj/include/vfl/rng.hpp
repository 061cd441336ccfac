#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace vfl {

// All randomness flows through named counter-derived streams so that every
// experiment is reproducible bit-for-bit regardless of thread scheduling:
// each (purpose, client, round) triple owns an independent stream derived
// from the experiment seed, and nothing is ever drawn from a shared
// generator inside a parallel region.
enum class StreamPurpose : std::uint64_t {
  kWeightInit = 1,
  kHeadInit = 2,
  kServerInit = 3,
  kShuffle = 4,
  kDataSplit = 5,
  kDpNoise = 6,
  kLabelDp = 7,
  kSynthetic = 8,
  kNoisyTest = 9,
  kDenoiseInject = 10,
  kGeneric = 11,
};

// SplitMix64 sequence with a Box-Muller spare slot for normals.
struct RngStream {
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  bool has_spare = false;
  double spare = 0.0;

  std::uint64_t next_u64() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in the open interval (0,1); safe to pass to log().
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare = r * std::sin(theta);
    has_spare = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double laplace(double scale) {
    const double u = uniform01() - 0.5;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -scale * sign * std::log(1.0 - 2.0 * std::abs(u));
  }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

inline RngStream derive_stream(std::uint64_t seed, StreamPurpose purpose,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = detail::mix64(seed ^ 0xD1B54A32D192ED03ull);
  s = detail::mix64(s ^ (static_cast<std::uint64_t>(purpose) * 0xA0761D6478BD642Full));
  s = detail::mix64(s ^ (a + 1) * 0xE7037ED1A0B428DBull);
  s = detail::mix64(s ^ (b + 1) * 0x8EBC6AF09C88C6E3ull);
  RngStream stream;
  stream.state = s;
  return stream;
}

// Fisher-Yates permutation of [0, n) drawn from the given stream.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace vfl
