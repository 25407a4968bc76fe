#pragma once

#include <cstdint>

namespace parknet {

// Deterministic 64-bit generator (xoshiro256**). The uniform/normal mappings
// are implemented here rather than via <random> distributions so that streams
// are bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);

  // Standard normal via Box-Muller on two uniform draws.
  double normal(double mean = 0.0, double stddev = 1.0);

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  bool bernoulli(double p);

  // Independent substream: fork(k) with distinct k yields decorrelated
  // generators regardless of how much this one has been consumed.
  Rng fork(uint64_t stream) const;

 private:
  uint64_t seed_;
  uint64_t state_[4];
};

// splitmix64 step, used for seeding and stream derivation.
uint64_t splitmix64(uint64_t& x);

}  // namespace parknet
