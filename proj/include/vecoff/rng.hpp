#pragma once

#include <cstdint>
#include <random>

namespace vecoff {

// Portable, seed-deterministic random source. The standard distributions are
// implementation-defined, so draws are built directly on mt19937_64 output.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi]; returns lo when the range is degenerate.
  double uniform(double lo, double hi) {
    if (!(hi > lo)) return lo;
    return lo + (hi - lo) * uniform01();
  }

  // Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return lo + static_cast<std::int64_t>(x % span);
  }

  bool bernoulli(double p) { return uniform01() < p; }

private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix_seed(parent);
  s = mix_seed(s ^ (a + 0x632be59bd9b4e019ULL));
  s = mix_seed(s ^ (b + 0x2545f4914f6cdd1dULL));
  s = mix_seed(s ^ (c + 0x9e3779b97f4a7c15ULL));
  return s;
}

}  // namespace vecoff
