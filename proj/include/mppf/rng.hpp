#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include <boost/random/normal_distribution.hpp>

namespace mppf {

/// Philox4x32-10 counter-based block function (Salmon et al., SC'11).
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) noexcept {
#pragma GCC unroll 10
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// What a stream is used for; part of the stream address so that, e.g., the
/// dynamics and the resampling of the same particle never share bits.
enum class Purpose : std::uint32_t {
  Dynamics = 1,
  Resample = 2,
  Observation = 3,
  Randomization = 4,
  Test = 5,
};

/// A 64-bit key identifying one independent run (master seed plus the
/// structural position of the run: replicate, level, batch, ...).
class SeedKey {
 public:
  constexpr SeedKey() = default;
  explicit constexpr SeedKey(std::uint64_t value) : value_(value) {}

  constexpr std::uint64_t value() const noexcept { return value_; }

  /// Derived key for a sub-run; distinct tags give unrelated keys.
  SeedKey child(std::uint64_t tag) const noexcept {
    return SeedKey(splitmix64(value_ ^ splitmix64(tag + 0x632BE59BD9B4E019ull)));
  }

  friend constexpr bool operator==(SeedKey, SeedKey) = default;

 private:
  std::uint64_t value_ = 0;
};

/// Sequential reader over the Philox blocks of one (key, purpose, level,
/// index, time) address. Two streams with the same address yield identical
/// draws regardless of creation order or thread.
class RandomStream {
 public:
  RandomStream(SeedKey key, Purpose purpose, std::uint32_t level, std::uint64_t index,
               std::uint64_t time) noexcept
      : key_{static_cast<std::uint32_t>(key.value()),
             static_cast<std::uint32_t>(key.value() >> 32)},
        ctr_{0, static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(time),
             (static_cast<std::uint32_t>(purpose) & 0xFFu) | ((level & 0xFFu) << 8) |
                 ((static_cast<std::uint32_t>(index >> 32) & 0xFFFFu) << 16)} {
  }

  std::uint64_t next_u64() noexcept {
    if (buffered_ == 0) {
      block_ = Philox4x32::apply(ctr_, key_);
      ++ctr_[0];
      buffered_ = 2;
    }
    const int at = 2 - buffered_;
    --buffered_;
    return (std::uint64_t{block_[2 * at]} << 32) | block_[2 * at + 1];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  /// Standard normal (ziggurat, fed with 64-bit draws of this stream).
  double normal() {
    Bits bits{this};
    return boost::random::normal_distribution<double>{}(bits);
  }

 private:
  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  Philox4x32::Counter block_{};
  int buffered_ = 0;

  struct Bits {
    RandomStream* stream;
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return stream->next_u64(); }
  };
};

}  // namespace mppf
