#pragma once

#include <cstdint>
#include <string_view>

namespace seqlim {

/// Counter-based pseudo-random stream. All randomness in the library flows
/// from one 64-bit root seed through named substreams; a stream is a pure
/// function of (root, name, shard, counter), so shards can be evaluated in
/// any order on any number of workers with identical results.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(uint64_t key, uint64_t counter = 0) : key_(key), counter_(counter) {}

  /// Derive a substream key from a root seed, a stream name and a shard index.
  static CounterRng substream(uint64_t root, std::string_view name, uint64_t shard = 0);

  uint64_t next_u64();
  /// Uniform in [0,1) with 53 random bits.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// Single uniform bit.
  uint32_t bit() { return static_cast<uint32_t>(next_u64() >> 63); }
  /// Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n);
  /// Standard normal (Box-Muller, one value per call, second value cached).
  double normal();

  uint64_t key() const { return key_; }

 private:
  uint64_t key_ = 0x9e3779b97f4a7c15ull;
  uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// SplitMix64 finalizer; also used for config hashing.
uint64_t mix64(uint64_t x);

/// FNV-1a over bytes, for stable identifiers of strings.
uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull);

}  // namespace seqlim
