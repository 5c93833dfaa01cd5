#pragma once

#include <cmath>
#include <cstdint>

namespace lrlab {

// Counter-based random generation: every draw is a pure function of the
// (seed, stream, realization, index, counter) tuple, so parallel sampling is
// order-independent and replays are bit-identical.

namespace rng_stream {
constexpr std::uint64_t disorder = 0x1;
constexpr std::uint64_t grain = 0x2;
constexpr std::uint64_t lanczos = 0x3;
constexpr std::uint64_t probe = 0x4;
}  // namespace rng_stream

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stateless hash of a key tuple into a 64-bit word. Chaining splitmix64
/// through the components keeps distinct tuples decorrelated.
inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t realization, std::uint64_t index,
                             std::uint64_t counter = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (realization + 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ (index + 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (counter + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

/// Uniform double in [0, 1) from a 64-bit word (53 mantissa bits).
inline double uniform01(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

/// Uniform double in [-w, w].
inline double uniform_symmetric(std::uint64_t word, double w) {
  return w * (2.0 * uniform01(word) - 1.0);
}

/// Small counter-based stream: deterministic sequence of draws for a fixed
/// key. Gaussians use Box-Muller on consecutive counter values so the draw
/// count per sample is fixed (no rejection loop).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t realization,
             std::uint64_t index = 0)
      : seed_(seed), stream_(stream), realization_(realization), index_(index) {}

  std::uint64_t next_word() {
    return mix_key(seed_, stream_, realization_, index_, counter_++);
  }

  double next_uniform01() { return uniform01(next_word()); }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 nudged away from 0 to keep the log finite.
    double u1 = next_uniform01();
    double u2 = next_uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_, stream_, realization_, index_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lrlab
