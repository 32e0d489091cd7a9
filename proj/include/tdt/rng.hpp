#pragma once

#include <cstdint>

namespace tdt {

// Splittable deterministic RNG built on the splitmix64 finalizer.
//
// The generator is pure 64-bit integer arithmetic, so identical seeds
// produce identical streams on every platform. split(key) derives an
// independent substream from (state, key) without consuming the parent
// stream; init/reinit code splits per (layer index, purpose) so that any
// subset of layers can be re-drawn reproducibly.
//
// Doubles are filled from the top 53 bits of the next word, never through
// std::uniform_real_distribution (whose output is implementation-defined).
class SplitRng {
 public:
  explicit SplitRng(uint64_t seed) : state_(mix(seed + kGamma)) {}

  // Independent substream keyed by `key`; does not advance this stream.
  SplitRng split(uint64_t key) const {
    return SplitRng(mix(state_ ^ mix(key * kGamma + kGamma)), Raw{});
  }

  uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  bool bernoulli(double p) { return next_double() < p; }

  // Unbiased integer in [0, n) via rejection sampling; n must be > 0.
  uint64_t next_below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  uint64_t state() const { return state_; }

 private:
  struct Raw {};
  SplitRng(uint64_t raw_state, Raw) : state_(raw_state) {}

  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  // splitmix64 finalizer (Steele, Lea, Flood 2014)
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

// Fixed purpose keys for substream derivation. Kept in one place so the
// derivation scheme is auditable: stream(seed).split(purpose).split(...)
namespace rng_purpose {
inline constexpr uint64_t kInit = 1;      // parameter initialization, split per layer then per tensor
inline constexpr uint64_t kShuffle = 2;   // per-epoch data order
inline constexpr uint64_t kDropout = 3;   // dropout masks, split per (epoch, batch)
inline constexpr uint64_t kStage = 4;     // top-down stage reinit, split per frozen-top count
inline constexpr uint64_t kSplit = 5;     // dataset splitting
inline constexpr uint64_t kData = 6;      // synthetic data generation
}  // namespace rng_purpose

}  // namespace tdt
