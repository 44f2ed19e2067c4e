// Deterministic pseudo-random generator with a stable cross-platform stream.
//
// Standard-library distributions are not bit-reproducible across
// implementations, so experiment drivers and randomized tests draw through
// this generator instead.  The core is splitmix64, which also serves to
// derive independent substreams from (seed, label) pairs.
#pragma once

#include <cstdint>

namespace capnum {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds still produce well-mixed first draws.
    splitmix64(state_);
    splitmix64(state_);
  }

  // Derive an independent generator for a labelled subtask.
  Rng fork(std::uint64_t label) const {
    std::uint64_t s = state_ ^ (0x632be59bd9b4e019ULL * (label + 1));
    return Rng(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n), n > 0.
  int next_below(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::uint64_t state_;
};

}  // namespace capnum
