#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "reservelab/reserve.hpp"

using namespace reservelab;

namespace {

// Brute-force argmax of revenue(y) on [0, hi] at the given step.
double grid_argmax(const std::function<double(double)>& revenue, double hi, double step = 1e-5) {
  double best_y = 0.0, best = revenue(0.0);
  const auto n = static_cast<long>(std::ceil(hi / step));
  for (long k = 1; k <= n; ++k) {
    const double y = std::min(hi, step * static_cast<double>(k));
    const double r = revenue(y);
    if (r > best) {
      best = r;
      best_y = y;
    }
  }
  return best_y;
}

double uniform_survival(double a, double z) { return std::clamp((a - z) / (2 * a), 0.0, 1.0); }

}  // namespace

TEST(Reserve, UniformExamples) {
  const auto u = NoiseModel::uniform(1.0);
  EXPECT_NEAR(optimal_reserve(u, 0.5), 0.75, 1e-9);
  EXPECT_NEAR(optimal_reserve(u, 0.0), 0.5, 1e-9);
}

TEST(Reserve, TruncatedNormalMatchesGrid) {
  const auto m = NoiseModel::truncated_normal(0.5, 2.0);
  const double w = 1.0;
  const double grid = grid_argmax([&](double y) { return y * m.survival(y - w); }, w + 2.0);
  EXPECT_NEAR(optimal_reserve(m, w), grid, 2e-5);
}

TEST(Reserve, RandomModelsMatchGrid) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wd(-1.0, 1.0);
  const std::vector<NoiseModel> models = {
      NoiseModel::uniform(0.7), NoiseModel::truncated_laplace(0.4, 1.0),
      NoiseModel::truncated_logistic(0.3, 1.5), NoiseModel::truncated_normal(0.5, 2.0)};
  for (const auto& m : models) {
    for (int k = 0; k < 5; ++k) {
      const double w = wd(rng);
      const double hi = std::max(0.0, w) + m.support_bound();
      const double grid = grid_argmax([&](double y) { return y * m.survival(y - w); }, hi);
      EXPECT_NEAR(optimal_reserve(m, w), grid, 2e-5) << m.describe() << " w=" << w;
    }
  }
}

TEST(Reserve, StationaryAtInteriorOptimum) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wd(-1.0, 1.0);
  const auto m = NoiseModel::truncated_logistic(0.3, 1.5);
  for (int k = 0; k < 100; ++k) {
    const double w = wd(rng);
    const double r = optimal_reserve(m, w);
    const auto root = stationary_reserve(m, w);
    if (r > 0.0 && root) {
      EXPECT_LE(std::abs(stationary_residual(m, w, r)), 1e-8);
      EXPECT_NEAR(*root, r, 1e-8);
    }
  }
}

TEST(Reserve, LipschitzAndMonotone) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> wd(-1.0, 1.0);
  const auto m = NoiseModel::truncated_laplace(0.4, 1.0);
  const AmbiguitySet set(UniformSupports{0.5, 2.0});
  for (int k = 0; k < 200; ++k) {
    double w1 = wd(rng), w2 = wd(rng);
    if (w1 > w2) std::swap(w1, w2);
    const double r1 = optimal_reserve(m, w1), r2 = optimal_reserve(m, w2);
    EXPECT_LE(std::abs(r1 - r2), w2 - w1 + 2e-10);
    EXPECT_GE(r2, r1 - 2e-10);
    EXPECT_LE(std::abs(robust_reserve(set, w1) - robust_reserve(set, w2)), w2 - w1 + 2e-10);
  }
}

TEST(Reserve, ScaledReserve) {
  const auto u = NoiseModel::uniform(1.0);
  EXPECT_NEAR(scaled_reserve(u, 0.5, 1.0), 0.75, 1e-9);
  EXPECT_NEAR(scaled_reserve(u, 0.5, 2.0), 0.375, 1e-9);
  EXPECT_THROW(scaled_reserve(u, 0.5, 0.0), std::domain_error);
  EXPECT_THROW(scaled_reserve(u, 0.5, -1.0), std::domain_error);

  const auto l = NoiseModel::truncated_logistic(0.3, 1.5);
  const double grid = grid_argmax([&](double y) { return y * l.survival(1.3 * y - 0.4); }, 2.0);
  EXPECT_NEAR(scaled_reserve(l, 0.4, 1.3), grid, 2e-5);
}

TEST(Reserve, RobustExamples) {
  const AmbiguitySet set(UniformSupports{0.5, 2.0});
  EXPECT_NEAR(robust_reserve(set, 1.0), 1.0, 1e-8);
  EXPECT_NEAR(robust_reserve(set, 0.2), 0.35, 1e-8);
  const AmbiguitySet single(FiniteSet{{NoiseModel::uniform(1.0)}});
  EXPECT_NEAR(robust_reserve(single, 0.5), 0.75, 1e-9);
}

TEST(Reserve, SingletonEnvelopeMatchesOptimal) {
  const auto m = NoiseModel::truncated_normal(0.5, 2.0);
  const AmbiguitySet single(FiniteSet{{m}});
  for (double w = -1.0; w <= 1.0; w += 0.1) {
    EXPECT_NEAR(robust_reserve(single, w), optimal_reserve(m, w), 2e-10);
  }
}

TEST(Reserve, ClosedFormBranches) {
  EXPECT_DOUBLE_EQ(robust_reserve_uniform_closed_form(0.5, 2.0, 3.0), 2.5);
  EXPECT_DOUBLE_EQ(robust_reserve_uniform_closed_form(0.5, 2.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(robust_reserve_uniform_closed_form(1.0, 1.0, 0.5), 0.75);
  EXPECT_THROW(robust_reserve_uniform_closed_form(0.0, 1.0, 0.5), std::domain_error);
  EXPECT_THROW(robust_reserve_uniform_closed_form(2.0, 1.0, 0.5), std::domain_error);
  EXPECT_THROW(robust_reserve_uniform_closed_form(0.5, 1.0, 3.5), std::domain_error);
}

TEST(Reserve, ClosedFormAgreesWithMinMaxGrid) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const double a_lo = 0.2 + 1.3 * u01(rng);
    const double a_hi = a_lo + 1.5 * u01(rng);
    const double w = -a_lo + (3 * a_hi + a_lo) * u01(rng);
    // The worst member is one of the two extremes (single crossing).
    auto revenue = [&](double y) {
      return y * std::min(uniform_survival(a_lo, y - w), uniform_survival(a_hi, y - w));
    };
    const double grid = grid_argmax(revenue, std::max(0.0, w) + a_hi);
    const AmbiguitySet set(UniformSupports{a_lo, a_hi});
    EXPECT_NEAR(robust_reserve_uniform_closed_form(a_lo, a_hi, w), grid, 1e-4);
    EXPECT_NEAR(robust_reserve(set, w), grid, 1e-4);
  }
}

TEST(Reserve, BeyondValidatedRangeTheKinkWins) {
  // Singleton a = 1 and w = 4: the optimum is the lower support edge w - a.
  const AmbiguitySet set(UniformSupports{1.0, 1.0});
  EXPECT_NEAR(robust_reserve(set, 4.0), 3.0, 1e-8);
}

TEST(Reserve, NoSaleRegionGivesZero) {
  // Valuations can never be positive.
  EXPECT_EQ(optimal_reserve(NoiseModel::uniform(0.5), -1.0), 0.0);
}

TEST(Reserve, SettingsValidation) {
  ReserveSolverSettings s;
  s.search_tol = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = {};
  s.max_iter = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}
