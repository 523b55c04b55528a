#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace gapdoor {

/// 64-bit FNV-1a. Used for config hashes and seed derivation tags.
constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic PRNG with a splitmix64 core. Self-contained so streams are
/// bit-identical across compilers, standard libraries and processes.
///
/// Seed splitting: every component draws its seed as
/// `derive_seed(global_seed, "tag", index...)`, so one integer reproduces a
/// whole experiment.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

  /// Uniform in [0,1), 24 bits of mantissa.
  float uniform() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int64_t index(int64_t n) {
    // Rejection sampling keeps the distribution exact.
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

  /// Standard normal via Box-Muller (no stdlib distribution, for portability).
  float normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    float u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 1e-12f);
    u2 = uniform();
    const float r = std::sqrt(-2.0f * std::log(u1));
    const float a = 6.28318530717958647692f * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(index(i + 1))]);
    }
  }

 private:
  uint64_t state_;
  float spare_ = 0.0f;
  bool have_spare_ = false;
};

inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
  return splitmix64(base ^ fnv1a64(tag));
}
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index) {
  return splitmix64(derive_seed(base, tag) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace gapdoor
