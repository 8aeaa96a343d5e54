#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sdqos {

// Deterministic RNG built on std::mt19937_64 (fully specified by the
// standard, so traces are reproducible across platforms). Distributions
// are hand-rolled because std:: distribution algorithms are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Substream for one workload stream: seed mixed with a hash of the
  // stream id, so traces do not depend on stream interleaving.
  static Rng substream(std::uint64_t seed, std::string_view stream_id) {
    return Rng(splitmix64(seed ^ fnv1a(stream_id)));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  // Categorical draw over non-negative weights summing to ~1.
  std::size_t categorical(const std::vector<double>& weights) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace sdqos
