#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <variant>
#include <vector>

#include "reservelab/rng.hpp"

namespace reservelab {

struct Truthful {};

/// Bids v - delta in the listed episodes, truthfully otherwise.
struct Shading {
  double delta = 0.0;
  std::set<int> active_episodes;
};

/// Bids v + delta in the listed episodes, truthfully otherwise.
struct OverBidding {
  double delta = 0.0;
  std::set<int> active_episodes;
};

/// Impatient manipulator: in the first half of each episode, at offset j it
/// shades by shade_frac * v with probability probe_prob * gamma^j. Later
/// periods of an episode are bid truthfully. A heuristic for stress tests, not
/// a best response.
struct DiscountedStrategic {
  double gamma = 0.8;
  double shade_frac = 0.5;
  double probe_prob = 1.0;
};

using BidderStrategy = std::variant<Truthful, Shading, OverBidding, DiscountedStrategic>;

void validate_strategy(const BidderStrategy& strategy);

/// Bid in [0, bid_cap] for valuation v at period t.
double bid(const BidderStrategy& strategy, std::int64_t t, double v, double bid_cap, Rng& rng);

/// True when bidding b instead of v changes whether the buyer beats `threshold`.
bool is_lie(double v, double b, double threshold);

/// Per-buyer, per-episode record of lies, shading and overbidding.
class LieLedger {
 public:
  struct EpisodeTally {
    std::int64_t lies = 0;
    /// Sum of s_t (1 - q_t) with s_t = (v - b)+.
    double shading_unsold = 0.0;
    /// Sum of o_t q_t with o_t = (b - v)+.
    double overbid_sold = 0.0;
  };

  LieLedger(std::size_t buyers, double bid_cap) : tallies_(buyers), bid_cap_(bid_cap) {}

  /// Records one buyer-period; returns whether it was a lie. Shading and
  /// overbidding are measured from the truthful bid clamp(v, 0, bid_cap).
  bool record(std::size_t buyer, int episode, double v, double b, double threshold, bool won);

  std::size_t buyers() const { return tallies_.size(); }
  const std::map<int, EpisodeTally>& episodes(std::size_t buyer) const { return tallies_.at(buyer); }
  std::int64_t lies_in_episode(int episode) const;
  std::int64_t total_lies() const;

 private:
  std::vector<std::map<int, EpisodeTally>> tallies_;
  double bid_cap_;
};

}  // namespace reservelab
