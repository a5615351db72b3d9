#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ifr {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 128-bit counter is split into a 64-bit stream id and a 64-bit block
/// index, so `Philox(seed, stream)` gives an independent substream for every
/// (seed, stream) pair. Parallel kernels key streams by grid point / replicate
/// index, which makes results independent of the thread schedule.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ >= 4) refill();
    const std::uint64_t lo = out_[pos_++];
    const std::uint64_t hi = out_[pos_++];
    return lo | (hi << 32);
  }

  /// Uniform double in (0, 1), 53 random bits.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t stream() const { return stream_; }

 private:
  void refill() {
    std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                     static_cast<std::uint32_t>(stream_),
                                     static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    out_ = ctr;
    ++block_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> out_{};
  int pos_ = 4;
};

/// Mix a user seed with a label (dataset name hash, stage id) into a new seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);

/// FNV-1a hash for string labels.
std::uint64_t hash_label(const char* s);

/// Number of marked items in `draws` draws without replacement from a
/// population of `total` items with `marked` marked ones. Exact inversion
/// walking outward from the mode.
std::int64_t sample_hypergeometric(Philox& rng, std::int64_t total, std::int64_t marked, std::int64_t draws);

/// Binomial(n, p) draw.
std::int64_t sample_binomial(Philox& rng, std::int64_t n, double p);

/// Poisson(mean) draw.
std::int64_t sample_poisson(Philox& rng, double mean);

double sample_normal(Philox& rng);

}  // namespace ifr
