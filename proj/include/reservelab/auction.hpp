#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "reservelab/rng.hpp"

namespace reservelab {

/// Reserve that no bid clears; used to exclude a buyer from a period.
inline constexpr double kExcluded = std::numeric_limits<double>::infinity();

inline bool is_excluded(double reserve) { return reserve == kExcluded; }

struct AuctionOutcome {
  std::vector<double> bids;
  std::vector<double> reserves;
  /// Highest bidder i*, ties broken at random. Set whenever N >= 1.
  std::size_t top_bidder = 0;
  /// i* when it cleared its reserve, otherwise empty.
  std::optional<std::size_t> winner;
  std::vector<bool> allocated;
  double payment = 0.0;
  double b_plus = 0.0;
  double b_minus = 0.0;
  /// max_{j != i} b_j per buyer (0 for a lone buyer).
  std::vector<double> competing;
  /// Price each buyer had to beat: max{b+_{-i}, r_i}, or the offered price in
  /// an exploration offer. kExcluded when the buyer could not win.
  std::vector<double> thresholds;

  bool sold() const { return winner.has_value(); }
};

/// max_{j != i} bids[j]; 0 when there is no other buyer.
double competing_max(std::span<const double> bids, std::size_t i);

/// Lazy second-price auction with personalized reserves: the highest bidder
/// wins only if it clears its own reserve, and pays max{reserve, second bid}.
/// `tie_rng` is drawn from only when the top bid is shared.
AuctionOutcome run_lazy_auction(std::span<const double> bids, std::span<const double> reserves,
                                Rng& tie_rng);

/// Pure-exploration period: only `selected` is offered the item, at its
/// reserve, and buys iff its bid clears it. The other buyers are excluded.
AuctionOutcome run_exploration_offer(std::span<const double> bids,
                                     std::span<const double> reserves, std::size_t selected);

}  // namespace reservelab
