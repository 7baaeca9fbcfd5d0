#include "reservelab/auction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reservelab {

namespace {

void validate(std::span<const double> bids, std::span<const double> reserves) {
  if (bids.size() != reserves.size()) {
    throw std::invalid_argument("bids and reserves must have the same length");
  }
  if (bids.empty()) throw std::invalid_argument("auction needs at least one buyer");
  for (double b : bids) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("bids must be finite and >= 0");
  }
  for (double r : reserves) {
    if (!(r >= 0.0)) throw std::invalid_argument("reserves must be >= 0");
  }
}

}  // namespace

double competing_max(std::span<const double> bids, std::size_t i) {
  if (i >= bids.size()) throw std::out_of_range("buyer index out of range");
  double best = 0.0;
  for (std::size_t j = 0; j < bids.size(); ++j) {
    if (j != i) best = std::max(best, bids[j]);
  }
  return best;
}

AuctionOutcome run_lazy_auction(std::span<const double> bids, std::span<const double> reserves,
                                Rng& tie_rng) {
  validate(bids, reserves);
  const std::size_t n = bids.size();
  AuctionOutcome out;
  out.bids.assign(bids.begin(), bids.end());
  out.reserves.assign(reserves.begin(), reserves.end());
  out.allocated.assign(n, false);
  out.competing.resize(n);
  out.thresholds.resize(n);

  out.b_plus = *std::max_element(bids.begin(), bids.end());
  std::vector<std::size_t> top;
  for (std::size_t i = 0; i < n; ++i) {
    if (bids[i] == out.b_plus) top.push_back(i);
  }
  if (top.size() == 1) {
    out.top_bidder = top.front();
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, top.size() - 1);
    out.top_bidder = top[pick(tie_rng)];
  }

  for (std::size_t i = 0; i < n; ++i) {
    out.competing[i] = competing_max(bids, i);
    out.thresholds[i] = std::max(out.competing[i], reserves[i]);
  }
  out.b_minus = out.competing[out.top_bidder];

  const std::size_t i = out.top_bidder;
  if (bids[i] >= reserves[i]) {
    out.winner = i;
    out.allocated[i] = true;
    out.payment = std::max(reserves[i], out.b_minus);
  }
  return out;
}

AuctionOutcome run_exploration_offer(std::span<const double> bids,
                                     std::span<const double> reserves, std::size_t selected) {
  validate(bids, reserves);
  const std::size_t n = bids.size();
  if (selected >= n) throw std::out_of_range("selected buyer out of range");
  if (is_excluded(reserves[selected])) {
    throw std::invalid_argument("the selected buyer must have a finite reserve");
  }
  AuctionOutcome out;
  out.bids.assign(bids.begin(), bids.end());
  out.reserves.assign(reserves.begin(), reserves.end());
  out.allocated.assign(n, false);
  out.competing.assign(n, 0.0);
  out.thresholds.assign(n, kExcluded);
  out.thresholds[selected] = reserves[selected];
  out.top_bidder = selected;
  out.b_plus = bids[selected];
  out.b_minus = 0.0;
  if (bids[selected] >= reserves[selected]) {
    out.winner = selected;
    out.allocated[selected] = true;
    out.payment = reserves[selected];
  }
  return out;
}

}  // namespace reservelab
