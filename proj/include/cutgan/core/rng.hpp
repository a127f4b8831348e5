#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cutgan {

// Deterministic, platform-independent PRNG (xoshiro256** seeded via splitmix64).
// Every stochastic stream in the project is a keyed stream derived from
// (seed, tag) so that runs are reproducible and resumable without saved RNG state.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static uint64_t hash_tag(std::string_view tag) {
    // FNV-1a 64-bit
    uint64_t h = 1469598103934665603ull;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  // Keyed stream: mixes an integer seed with a string tag and extra indices.
  static Rng keyed(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = hash_tag(tag);
    uint64_t sm = seed ^ (h + 0x9e3779b97f4a7c15ull);
    sm = splitmix64_mix(sm + a * 0xbf58476d1ce4e5b9ull);
    sm = splitmix64_mix(sm + b * 0x94d049bb133111ebull);
    return Rng(sm);
  }

  uint64_t u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1)
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n)
  uint64_t below(uint64_t n) { return u64() % n; }

  // Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates shuffle, deterministic given the stream state.
  template <typename V>
  void shuffle(V& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64_mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cutgan
