#include "reservelab/bidders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reservelab/schedule.hpp"

namespace reservelab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

void validate_strategy(const BidderStrategy& strategy) {
  std::visit(Overloaded{
                 [](const Truthful&) {},
                 [](const Shading& s) {
                   if (!(s.delta >= 0.0)) throw std::invalid_argument("shading delta must be >= 0");
                 },
                 [](const OverBidding& s) {
                   if (!(s.delta >= 0.0)) {
                     throw std::invalid_argument("overbidding delta must be >= 0");
                   }
                 },
                 [](const DiscountedStrategic& s) {
                   if (!(s.gamma > 0.0 && s.gamma < 1.0)) {
                     throw std::invalid_argument("gamma must lie in (0, 1)");
                   }
                   if (!(s.shade_frac >= 0.0 && s.shade_frac <= 1.0)) {
                     throw std::invalid_argument("shade_frac must lie in [0, 1]");
                   }
                   if (!(s.probe_prob >= 0.0 && s.probe_prob <= 1.0)) {
                     throw std::invalid_argument("probe_prob must lie in [0, 1]");
                   }
                 },
             },
             strategy);
}

double bid(const BidderStrategy& strategy, std::int64_t t, double v, double bid_cap, Rng& rng) {
  const EpisodeInfo ep = episode_of(t);
  const double raw = std::visit(
      Overloaded{
          [&](const Truthful&) { return v; },
          [&](const Shading& s) { return s.active_episodes.count(ep.k) ? v - s.delta : v; },
          [&](const OverBidding& s) { return s.active_episodes.count(ep.k) ? v + s.delta : v; },
          [&](const DiscountedStrategic& s) {
            if (2 * ep.offset >= ep.ell) return v;
            const double u = uniform01(rng);
            const double p = s.probe_prob * std::pow(s.gamma, static_cast<double>(ep.offset));
            return u < p ? v - s.shade_frac * v : v;
          },
      },
      strategy);
  return std::clamp(raw, 0.0, bid_cap);
}

bool is_lie(double v, double b, double threshold) {
  if (std::isinf(threshold)) return false;
  return (v > threshold) != (b > threshold);
}

bool LieLedger::record(std::size_t buyer, int episode, double v, double b, double threshold,
                       bool won) {
  auto& tally = tallies_.at(buyer)[episode];
  const bool lie = is_lie(v, b, threshold);
  if (lie) ++tally.lies;
  const double truthful = std::clamp(v, 0.0, bid_cap_);
  const double shade = std::max(0.0, truthful - b);
  const double over = std::max(0.0, b - truthful);
  if (!won) tally.shading_unsold += shade;
  if (won) tally.overbid_sold += over;
  return lie;
}

std::int64_t LieLedger::lies_in_episode(int episode) const {
  std::int64_t total = 0;
  for (const auto& buyer : tallies_) {
    if (auto it = buyer.find(episode); it != buyer.end()) total += it->second.lies;
  }
  return total;
}

std::int64_t LieLedger::total_lies() const {
  std::int64_t total = 0;
  for (const auto& buyer : tallies_) {
    for (const auto& [k, tally] : buyer) total += tally.lies;
  }
  return total;
}

}  // namespace reservelab
