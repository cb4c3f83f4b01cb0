#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include <boost/math/special_functions/erf.hpp>

namespace vito {

/// Philox4x32-10 block cipher (Salmon et al., SC'11): a stateless map from
/// (key, counter) to 128 random bits.
class Philox4x32 {
public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// Standard normal quantile, -sqrt(2) erfc^{-1}(2u); Boost's rational
/// approximations are accurate to a few ulp, far inside 1e-9.
inline double normal_quantile(double u) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u); }

/// N(0,1) stream whose i-th value is a pure function of (seed, stream_index, i).
/// Streams for distinct (seed, stream_index) pairs use disjoint Philox counters.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index) noexcept : seed_(seed), stream_(stream_index) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_; }

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform(std::uint64_t counter) const noexcept {
    const auto block = raw(counter / 2);
    const std::size_t lane = 2 * (counter % 2);
    const std::uint64_t bits = (static_cast<std::uint64_t>(block[lane]) << 32) | block[lane + 1];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t counter) const { return normal_quantile(uniform(counter)); }

  /// out[i] = normal(first + i).
  void fill_normal(std::uint64_t first, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal(first + i);
  }

private:
  Philox4x32::Block raw(std::uint64_t block_index) const noexcept {
    const Philox4x32::Block ctr{static_cast<std::uint32_t>(block_index), static_cast<std::uint32_t>(block_index >> 32),
                                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    return Philox4x32::generate(ctr, key);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace vito
