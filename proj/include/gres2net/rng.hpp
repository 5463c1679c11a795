#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace gres2net {

/// Seeded 64-bit Mersenne Twister with distribution code kept in-house so
/// that sequences do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; no cached second draw, so state stays a single engine.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Full engine state as text; restore() resumes the exact sequence.
  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 mix of (seed, stream): independent seeds for model init, shuffling, etc.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace gres2net
