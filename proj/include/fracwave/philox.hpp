#pragma once

// Philox4x32-10 (Salmon et al., SC'11). Stateless: a counter and a key map
// to four 32-bit words.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fracwave {

using Philox4x32Ctr = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Ctr philox4x32(Philox4x32Ctr ctr, Philox4x32Key key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

// Uniform on (0, 1), 52 bits from two words.
inline double u01_open(std::uint32_t hi, std::uint32_t lo) {
  // 52 bits so that bits + 0.5 is still exact
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 20) | (lo >> 12);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// One standard normal per (seed, counter words), via Box-Muller.
inline double philox_normal(std::uint64_t seed, std::uint32_t c0, std::uint32_t c1,
                            std::uint32_t c2, std::uint32_t c3) {
  const Philox4x32Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto r = philox4x32({c0, c1, c2, c3}, key);
  const double u1 = u01_open(r[0], r[1]);
  const double u2 = u01_open(r[2], r[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fracwave
