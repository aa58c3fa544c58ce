#pragma once

#include <cstdint>
#include <random>

namespace gaze {

/// SplitMix64 finalizer. Used for seed derivation and hash-based splits.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed derived from a parent seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Deterministic random source. The std distributions are implementation
/// defined, so sampling is done here on top of the (fully specified)
/// mt19937_64 engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t index(std::uint64_t n);
  /// Standard normal via Box-Muller (one value per call, spare cached).
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gaze
