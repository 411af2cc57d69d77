#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfgc {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, counter), so sample i never depends on how many samples
// were drawn before it or on thread scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    std::uint64_t z = mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL));
    return mix(z ^ mix(counter + 0xd1b54a32d192ed03ULL));
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return (static_cast<double>(bits(stream, counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(std::uint64_t stream, std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(stream, counter);
  }

  // Standard normal via Box-Muller on two consecutive counters.
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    const double u1 = uniform(stream, 2 * counter);
    const double u2 = uniform(stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finaliser
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace mfgc
