#pragma once

#include <cmath>
#include <cstdint>

namespace udts {

// Deterministic random-number utilities built on fixed-width integer
// arithmetic only, so every stream is identical across platforms and word
// sizes. Streams are derived statelessly: the same (seed, tag, index...)
// tuple always names the same generator, which is what makes parallel MC
// passes, batch partitioning, and checkpoint resume reproducible.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive combiner: derive(derive(seed, a), b) != derive(derive(seed, b), a).
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + (tag << 1));
  std::uint64_t h = splitmix64(s);
  s = h + tag;
  return splitmix64(s);
}

template <typename... Tags>
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
  return derive_stream(derive_stream(seed, tag), static_cast<std::uint64_t>(rest)...);
}

// Compile-time FNV-1a of a string literal, used to name stream purposes.
constexpr std::uint64_t stream_tag(const char* name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = name; *p != '\0'; ++p) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*p));
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256** generator.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
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

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller. Consumes two uniforms per call; no
  // cached spare, so the draw sequence is a pure function of call count.
  double next_normal() {
    const double u1 = 1.0 - next_unit();  // (0, 1]: keeps log() finite
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double next_normal(double mean, double stddev) { return mean + stddev * next_normal(); }

  bool next_bernoulli(double p_true) { return next_unit() < p_true; }

  // Uniform integer in [0, bound) by rejection, bias-free.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

}  // namespace udts
