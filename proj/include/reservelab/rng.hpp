#pragma once

#include <cstdint>
#include <random>

namespace reservelab {

using Rng = std::mt19937_64;

/// Independent sub-streams carved out of one master seed. Each mechanism draws
/// from its own stream so switching one of them on or off leaves the others'
/// draws untouched.
enum class Stream : std::uint32_t {
  kPreferences = 1,
  kContexts = 2,
  kNoise = 3,
  kExploration = 4,
  kTieBreak = 5,
  kBidders = 6,
};

inline Rng make_stream(std::uint64_t master_seed, Stream stream, std::uint32_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffULL),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream), sub};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace reservelab
