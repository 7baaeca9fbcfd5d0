#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "reservelab/bidders.hpp"
#include "reservelab/schedule.hpp"

using namespace reservelab;

TEST(Bidders, Examples) {
  Rng rng(1);
  EXPECT_DOUBLE_EQ(bid(Truthful{}, 5, 1.2, 3.0, rng), 1.2);
  const Shading s{0.3, {2}};
  EXPECT_DOUBLE_EQ(bid(s, 3, 1.0, 3.0, rng), 0.7);
  EXPECT_DOUBLE_EQ(bid(s, 8, 1.0, 3.0, rng), 1.0);
  const OverBidding o{0.4, {4}};
  EXPECT_DOUBLE_EQ(bid(o, 8, 1.0, 3.0, rng), 1.4);
  EXPECT_DOUBLE_EQ(bid(o, 2, 1.0, 3.0, rng), 1.0);
}

TEST(Bidders, BidsAreClamped) {
  Rng rng(1);
  EXPECT_EQ(bid(Truthful{}, 1, -0.5, 3.0, rng), 0.0);
  EXPECT_EQ(bid(Shading{0.3, {1}}, 1, 0.1, 3.0, rng), 0.0);
  EXPECT_EQ(bid(OverBidding{1.0, {1}}, 1, 2.5, 3.0, rng), 3.0);
}

TEST(Bidders, DiscountedStrategicOnlyShadesEarly) {
  const DiscountedStrategic d{0.8, 0.5, 1.0};
  Rng rng(2);
  // Offset 0 shades with probability one.
  EXPECT_DOUBLE_EQ(bid(d, 64, 1.0, 3.0, rng), 0.5);
  for (std::int64_t t = 96; t < 128; ++t) EXPECT_DOUBLE_EQ(bid(d, t, 1.0, 3.0, rng), 1.0);

  // Empirical shading frequency at offset j tracks gamma^j.
  const int reps = 20000;
  int shaded = 0;
  for (int k = 0; k < reps; ++k) shaded += bid(d, 1024 + 3, 1.0, 3.0, rng) < 1.0;
  EXPECT_NEAR(static_cast<double>(shaded) / reps, std::pow(0.8, 3), 0.015);
}

TEST(Bidders, StrategyValidation) {
  EXPECT_THROW(validate_strategy(Shading{-0.1, {}}), std::invalid_argument);
  EXPECT_THROW(validate_strategy(OverBidding{-0.1, {}}), std::invalid_argument);
  EXPECT_THROW(validate_strategy(DiscountedStrategic{1.0, 0.5, 1.0}), std::invalid_argument);
  EXPECT_THROW(validate_strategy(DiscountedStrategic{0.8, 1.5, 1.0}), std::invalid_argument);
  EXPECT_NO_THROW(validate_strategy(DiscountedStrategic{}));
}

TEST(Lies, Examples) {
  EXPECT_TRUE(is_lie(2.0, 1.5, 1.8));
  EXPECT_FALSE(is_lie(2.0, 1.5, 1.0));
  for (double th : {0.0, 0.7, 2.0, 5.0}) EXPECT_FALSE(is_lie(1.3, 1.3, th));
  EXPECT_FALSE(is_lie(2.0, 0.0, std::numeric_limits<double>::infinity()));
}

TEST(Lies, LedgerTruthfulIsZero) {
  LieLedger ledger(2, 3.0);
  Rng rng(5);
  for (std::int64_t t = 1; t <= 500; ++t) {
    for (std::size_t i = 0; i < 2; ++i) {
      const double v = 3.0 * uniform01(rng);
      const double th = 3.0 * uniform01(rng);
      EXPECT_FALSE(ledger.record(i, episode_of(t).k, v, bid(Truthful{}, t, v, 3.0, rng), th, v > th));
    }
  }
  EXPECT_EQ(ledger.total_lies(), 0);
  for (const auto& [k, tally] : ledger.episodes(0)) {
    EXPECT_EQ(tally.shading_unsold, 0.0);
    EXPECT_EQ(tally.overbid_sold, 0.0);
  }
}

TEST(Lies, ShadingAndOverbidAccumulators) {
  LieLedger ledger(1, 3.0);
  EXPECT_TRUE(ledger.record(0, 2, 2.0, 1.5, 1.8, false));
  EXPECT_FALSE(ledger.record(0, 2, 2.0, 1.5, 1.0, true));
  EXPECT_TRUE(ledger.record(0, 3, 1.0, 1.6, 1.2, true));
  EXPECT_FALSE(ledger.record(0, 3, 1.0, 1.6, 0.5, true));
  const auto& ep = ledger.episodes(0);
  EXPECT_DOUBLE_EQ(ep.at(2).shading_unsold, 0.5);
  EXPECT_DOUBLE_EQ(ep.at(2).overbid_sold, 0.0);
  EXPECT_DOUBLE_EQ(ep.at(3).overbid_sold, 1.2);
  EXPECT_DOUBLE_EQ(ep.at(3).shading_unsold, 0.0);
  EXPECT_EQ(ledger.lies_in_episode(2), 1);
  EXPECT_EQ(ledger.lies_in_episode(3), 1);
  EXPECT_EQ(ledger.lies_in_episode(9), 0);
  EXPECT_EQ(ledger.total_lies(), 2);
  EXPECT_THROW(ledger.record(1, 1, 1.0, 1.0, 0.0, true), std::out_of_range);
}
