#include "dualcs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace dualcs::rng {

std::uint64_t Engine::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_index: bound must be positive");
  // Classic rejection: drop the tail that would bias the modulo.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % bound;
}

double Engine::uniform_real(double a, double b) {
  const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;  // [0, 1)
  return a + (b - a) * u;
}

double Engine::gaussian() {
  // Box-Muller, cosine branch. u1 is shifted away from 0 so log() is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t child_seed(std::uint64_t master_seed, std::uint64_t index) {
  // One splitmix64 mix of (master, index); collision-free in index for a
  // fixed master and avalanching in both arguments.
  std::uint64_t z = master_seed + (index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<int> sample_without_replacement(Engine& eng, int n, int m) {
  if (n < 0 || m < 0 || m > n)
    throw std::invalid_argument("sample_without_replacement: need 0 <= m <= n");
  std::set<int> chosen;
  for (int j = n - m; j < n; ++j) {
    const int t = static_cast<int>(eng.uniform_index(static_cast<std::uint64_t>(j) + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return std::vector<int>(chosen.begin(), chosen.end());
}

}  // namespace dualcs::rng
