#pragma once

#include <cstdint>
#include <vector>

namespace dualcs::rng {

// Deterministic pseudo-random engine with hand-rolled distributions.
//
// std::mt19937_64 itself is pinned by the standard, but the standard
// *distributions* are implementation-defined, which would break the
// byte-identical-rerun guarantee if we ever changed toolchains. Everything
// downstream therefore draws through these helpers only.
class Engine {
public:
  explicit Engine(std::uint64_t seed) : state_(seed) {
    // Warm up so that small, correlated seeds (0, 1, 2, ...) decorrelate.
    next_u64();
    next_u64();
  }

  // splitmix64 step; passes BigCrush as a 64-bit mixer and is trivially
  // reproducible on any platform.
  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound), rejection-sampled so it is exactly
  // unbiased. bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);

  // Uniform real in [a, b) using the top 53 bits of the stream.
  double uniform_real(double a, double b);

  // Standard normal deviate via Box-Muller (two uniforms per call; no
  // cached spare so call sequence stays position-independent).
  double gaussian();

private:
  std::uint64_t state_;
};

// Stable child-seed derivation for trial fan-out: hash(master, index).
// Changing worker counts or evaluation order must not change the stream a
// given trial sees, so every trial derives its own engine from this.
std::uint64_t child_seed(std::uint64_t master_seed, std::uint64_t index);

// m distinct indices drawn uniformly from {0, ..., n-1}, returned sorted
// ascending. Floyd's algorithm: O(m) memory regardless of n.
std::vector<int> sample_without_replacement(Engine& eng, int n, int m);

}  // namespace dualcs::rng
