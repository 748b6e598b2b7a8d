#include "pspider/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pspider/errors.hpp"

namespace pspider::num {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t key, std::uint64_t tag) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      tag_lo_(static_cast<std::uint32_t>(tag)),
      tag_hi_(static_cast<std::uint32_t>(tag >> 32)) {}

void RngStream::refill() noexcept {
  buffer_ = philox4x32_10({static_cast<std::uint32_t>(block_),
                           static_cast<std::uint32_t>(block_ >> 32), tag_lo_,
                           tag_hi_},
                          key_);
  ++block_;
  used_ = 0;
}

std::uint64_t RngStream::next_u64() noexcept {
  if (used_ > 2) refill();
  const std::uint64_t lo = buffer_[used_];
  const std::uint64_t hi = buffer_[used_ + 1];
  used_ += 2;
  return (hi << 32) | lo;
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

double RngStream::exponential() noexcept { return -std::log(uniform_open()); }

__extension__ typedef unsigned __int128 uint128;

std::uint64_t RngStream::below(std::uint64_t bound) noexcept {
  // Lemire's multiply-and-reject.
  uint128 m = static_cast<uint128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<uint128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

RngStream derive_stream(std::uint64_t seed, long t, long k, std::uint64_t i,
                        StreamRole role) {
  if (t < 0 || t >= 4096 || k < -1 || k >= 4095 || i > 0xFFFFFFFFull) {
    throw ConfigError("stream coordinate out of range: t=" + std::to_string(t) +
                      " k=" + std::to_string(k) + " i=" + std::to_string(i));
  }
  const std::uint64_t packed = (static_cast<std::uint64_t>(t) << 20) |
                               (static_cast<std::uint64_t>(k + 1) << 8) |
                               static_cast<std::uint64_t>(role);
  return RngStream(seed, (i << 32) | packed);
}

}  // namespace pspider::num
