#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mwclust {

// 64-bit finalizing mixer (splitmix64 output function).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream derivation: seed for stream `stream` under a master
// seed. Pure function of its inputs, so replications can be handed to any
// worker in any order and still see identical randomness.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  return mix64(mix64(z) + 0x9e3779b97f4a7c15ULL);
}

// Wrapper around mt19937_64 with explicit uniform/bernoulli/normal draws.
// uniform() maps the top 53 bits to [0,1); normal() is the polar method with
// its own cache, so the draw sequence depends only on the seed, not on the
// standard library's distribution internals.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // p >= 1 short-circuits without consuming randomness so full-probability
  // gates are free; p <= 0 likewise.
  bool bernoulli(double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform() < p;
  }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return sd > 0.0 ? mean + sd * normal() : mean; }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mwclust
