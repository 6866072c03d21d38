#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace kbrw {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Stream layout, which is part of the reproducibility contract:
///   key     = { low 32 bits of seed, high 32 bits of seed }
///   counter = { block_lo, block_hi, stream_lo, stream_hi }
/// Each block yields four 32-bit words, consumed as two 64-bit outputs
/// (word0 | word1 << 32, then word2 | word3 << 32). Replication `i` of an
/// experiment with master seed `s` uses stream `i` under key `s`, so streams
/// are distinct for all 2^64 indices and independent of scheduling.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Block encrypt(Block ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

/// Full generator state; equality of states implies equality of all future draws.
struct RngState {
  std::uint64_t key = 0;
  std::uint64_t stream = 0;
  std::uint64_t block = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

/// Counter-based derivation: replication `index` under `master` is the
/// Philox stream (key = master, stream = index, block = 0).
constexpr RngState derive_replication_seed(std::uint64_t master,
                                           std::uint64_t index) noexcept {
  return RngState{master, index, 0};
}

/// SplitMix64 finalizer; used to derive sub-experiment keys from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Key for a named stage (0, 1, ...) of an experiment seeded with `master`.
constexpr std::uint64_t stage_key(std::uint64_t master, std::uint64_t stage) noexcept {
  return stage == 0 ? master : mix64(master ^ mix64(stage));
}

/// Uniform and normal draws over a Philox stream. Satisfies
/// UniformRandomBitGenerator so it can feed <random> adaptors if needed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(RngState state) noexcept : state_(state) {}
  Rng(std::uint64_t master, std::uint64_t index) noexcept
      : state_(derive_replication_seed(master, index)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  double uniform_pos() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal by Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// State of the next unread block. Only meaningful between whole blocks.
  const RngState& state() const noexcept { return state_; }

 private:
  void refill() noexcept {
    const Philox4x32::Block ctr{
        static_cast<std::uint32_t>(state_.block),
        static_cast<std::uint32_t>(state_.block >> 32),
        static_cast<std::uint32_t>(state_.stream),
        static_cast<std::uint32_t>(state_.stream >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(state_.key),
                              static_cast<std::uint32_t>(state_.key >> 32)};
    const auto out = Philox4x32::encrypt(ctr, key);
    buffer_[0] = std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32);
    buffer_[1] = std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32);
    ++state_.block;
    cursor_ = 0;
  }

  RngState state_;
  std::array<std::uint64_t, 2> buffer_{};
  int cursor_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kbrw
