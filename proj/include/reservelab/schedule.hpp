#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>

namespace reservelab {

/// Episode k covers periods [2^(k-1), 2^k - 1] and has length ell_k = 2^(k-1).
struct EpisodeInfo {
  int k = 1;
  std::int64_t ell = 1;
  std::int64_t offset = 0;  // t - ell
};

inline EpisodeInfo episode_of(std::int64_t t) {
  if (t < 1) throw std::invalid_argument("periods are numbered from 1");
  const auto width = std::bit_width(static_cast<std::uint64_t>(t));
  const std::int64_t ell = std::int64_t{1} << (width - 1);
  return {static_cast<int>(width), ell, t - ell};
}

inline bool is_power_of_two(std::int64_t n) {
  return n > 0 && std::has_single_bit(static_cast<std::uint64_t>(n));
}

/// Smallest m with m^2 >= ell, i.e. ceil(sqrt(ell)).
inline std::int64_t ceil_sqrt(std::int64_t ell) {
  std::int64_t m = 0;
  std::int64_t step = std::int64_t{1} << 31;
  for (; step > 0; step >>= 1) {
    const std::int64_t c = m + step;
    if (static_cast<__int128>(c) * c < ell) m = c;
  }
  return m + 1;
}

/// Smallest m with m^3 >= ell^2, i.e. ceil(ell^(2/3)).
inline std::int64_t ceil_two_thirds_power(std::int64_t ell) {
  const __int128 target = static_cast<__int128>(ell) * ell;
  std::int64_t m = 0;
  std::int64_t step = std::int64_t{1} << 42;
  for (; step > 0; step >>= 1) {
    const __int128 c = m + step;
    if (c * c * c < target) m += step;
  }
  return m + 1;
}

}  // namespace reservelab
