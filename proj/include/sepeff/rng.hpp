// Counter-based splittable RNG.
//
// Every consumer derives an independent stream from a base seed plus a small
// key path, e.g. (seed, replication) for dataset sampling and
// (seed, replication, bootstrap_index) for resampling. Streams never share
// state, so simulation replications can run on any thread layout (or be
// re-run in isolation) and still produce bit-identical results.
//
// Core generator is SplitMix64 (public domain, Steele et al. splittable-RNG
// construction): the stream key is hashed into (state, gamma) and each draw
// advances the counter by the stream's gamma. Not cryptographic; statistical
// quality is ample for Monte Carlo use here.
#pragma once

#include <cstdint>
#include <vector>

namespace sepeff {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  // Stream keyed by (seed, k1, k2, k3). Unused key slots default to
  // sentinels so (seed), (seed, r) and (seed, r, b) are distinct streams.
  explicit Rng(std::uint64_t seed, std::uint64_t k1 = ~0ull,
               std::uint64_t k2 = ~0ull, std::uint64_t k3 = ~0ull) {
    std::uint64_t h = detail::mix64(seed ^ 0x5851f42d4c957f2dull);
    h = detail::mix64(h ^ k1);
    h = detail::mix64(h ^ k2);
    h = detail::mix64(h ^ k3);
    state_ = h;
    // Per-stream odd increment; keeps distinct streams on distinct orbits.
    gamma_ = detail::mix64(h ^ 0x9e3779b97f4a7c15ull) | 1ull;
  }

  std::uint64_t next_u64() {
    state_ += gamma_;
    return detail::mix64(state_);
  }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Index into a discrete distribution given cumulative probabilities is the
  // caller's business; this draws from raw (unnormalised) weights.
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Bounded rejection; n is tiny relative to 2^64 in every use here.
    std::uint64_t threshold = (~n + 1) % n;  // = 2^64 mod n
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t gamma_;
};

// Multinomial bootstrap weights: counts of each of n individuals after n
// draws with replacement. Deterministic given the stream.
std::vector<double> multinomial_counts(Rng& rng, std::size_t n);

}  // namespace sepeff
