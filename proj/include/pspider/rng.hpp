#pragma once

// Counter-based keyed randomness. Every stochastic call in the library
// draws from a stream whose identity is a logical coordinate
// (seed, outer index, inner index, example, role), never from execution
// order, so results do not depend on how work is scheduled.

#include <array>
#include <cstdint>

namespace pspider::num {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

enum class StreamRole : std::uint8_t {
  kInnerNew = 1,       // s_i evaluated at the current iterate
  kInnerOld = 2,       // s_i evaluated at the previous iterate
  kRefresh = 3,        // control-variate refresh pass
  kBatch = 4,          // minibatch index sampling
  kRefreshSubset = 5,  // subset sampling for a partial refresh
  kSynthetic = 6,      // synthetic dataset generation
  kValidation = 7,     // model self-checks
  kAuxiliary = 8,      // free for tests and tools
};

/// A value-type stream of random numbers. Copies replay the same sequence.
class RngStream {
 public:
  /// `key` selects the Philox key, `tag` fills the two high counter words.
  RngStream(std::uint64_t key, std::uint64_t tag) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1).
  double uniform_open() noexcept;
  double normal() noexcept;
  /// Exp(1).
  double exponential() noexcept;
  /// Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint32_t tag_lo_;
  std::uint32_t tag_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stream for the logical coordinate (seed, t, k, i, role).
/// Collision-free for 0 <= t < 4096, -1 <= k < 4095, 0 <= i < 2^32;
/// outside these ranges a ConfigError is thrown.
RngStream derive_stream(std::uint64_t seed, long t, long k, std::uint64_t i,
                        StreamRole role);

}  // namespace pspider::num
