#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace magail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed plus named stream; identical (seed, stream) yields identical draws.
struct RngConfig {
  std::uint64_t seed = 0;
  std::string stream;
};

/**
 * Deterministic random source. Each consumer owns one stream, derived from
 * (seed, stream name). Doubles and categorical draws are generated from raw
 * 64-bit output rather than std:: distributions, whose results are
 * implementation-defined and would break cross-platform reproducibility.
 */
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream) {
    std::uint64_t state = seed ^ fnv1a64(stream);
    std::uint64_t s = splitmix64(state);
    gen_.seed(s);
  }
  explicit Rng(const RngConfig& cfg) : Rng(cfg.seed, cfg.stream) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  /// Draws an index from an (approximately normalized) probability vector.
  int categorical(std::span<const double> probs) {
    double u = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace magail
