#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace alpl {

/// SplitMix64 finalizer. Used to derive independent seeds from (seed, stream) pairs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded random stream. Every stochastic component takes one of these by reference;
/// a stream must not be shared between concurrent workers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream; does not advance this stream.
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  double normal() { return normal_(engine_); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace alpl
