#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace psilab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** with splitmix64 seeding. Streams are derived by hashing an
/// index path into the root seed, so per-codeword and per-slot streams are
/// decoupled by construction and independent of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t sm = a ^ (0x632be59bd9b4e019ULL + b * 0x9e3779b97f4a7c15ULL);
    return splitmix64(sm);
  }

  static Rng derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t acc = root;
    for (std::uint64_t v : path) acc = mix(acc, v);
    return Rng(acc);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  /// CDF inversion over an (approximately normalized) pmf; the last index
  /// with positive mass absorbs rounding slack.
  int sample(std::span<const double> pmf) {
    const double u = next_double();
    double cum = 0.0;
    int last_positive = 0;
    for (int i = 0; i < static_cast<int>(pmf.size()); ++i) {
      if (pmf[i] <= 0.0) continue;
      last_positive = i;
      cum += pmf[i];
      if (u < cum) return i;
    }
    return last_positive;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

}  // namespace psilab
