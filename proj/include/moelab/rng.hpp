#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace moe {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The 64-bit seed is the key. The 128-bit counter is split into a 64-bit
/// stream id (high half) and a 64-bit block index (low half), so stream s of
/// seed k is the sequence philox(k, (s, 0)), philox(k, (s, 1)), ... Distinct
/// streams never overlap, and any stream can be recreated from (seed, stream)
/// alone. Each block yields two 64-bit outputs.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) : key_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (the spare deviate is cached).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Index drawn with probability proportional to `weights` (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return key_; }
  std::uint64_t stream() const { return stream_; }

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; used to derive independent 64-bit seeds from tuples.
std::uint64_t mix64(std::uint64_t x);

/// Seed for replication `rep` at grid index `n_index` of an experiment seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t n_index, std::uint64_t rep);

}  // namespace moe
