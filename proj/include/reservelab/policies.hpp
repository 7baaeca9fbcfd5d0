#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reservelab/auction.hpp"
#include "reservelab/estimators.hpp"
#include "reservelab/market.hpp"
#include "reservelab/noise.hpp"
#include "reservelab/reserve.hpp"
#include "reservelab/rng.hpp"
#include "reservelab/schedule.hpp"

namespace reservelab {

enum class PolicyKind { kCorp, kCorp2, kScorp, kOracle, kRobustOracle, kZeroReserve };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

/// Forced-exploration block length at the start of an episode of length ell:
/// ceil(sqrt(ell)) for CORP-II, ceil(ell^(2/3)) for SCORP, 0 otherwise (CORP
/// explores at random instead).
std::int64_t exploration_length(PolicyKind kind, std::int64_t ell);

struct ReserveDecision {
  std::vector<double> reserves;
  bool explore = false;
  std::optional<std::size_t> selected_buyer;
};

/// What a learning policy is allowed to know about the market.
struct PolicyContext {
  std::size_t buyers = 1;
  int dimension = 1;
  double preference_bound = 1.0;
  /// B = B_p + B_n; exploration prices are uniform on [0, B].
  double valuation_bound = 1.0;
  ReserveSolverSettings solver;
  EstimatorSettings estimator;
};

struct FitRecord {
  int episode = 0;
  std::size_t buyer = 0;
  std::size_t samples = 0;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  Vector estimate;
  /// Scale estimate for location-scale fits, NaN otherwise.
  double alpha = std::numeric_limits<double>::quiet_NaN();
};

/// Seller-side pricing rule driven one period at a time. Policies see the
/// context, the posted reserves, the bids and the allocation; never valuations.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual PolicyKind kind() const = 0;
  /// Reserves for period t. Periods must be consecutive from 1.
  virtual ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) = 0;
  virtual void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                          const AuctionOutcome& outcome) = 0;
  /// Current preference estimates, one per buyer; empty if the policy keeps none.
  virtual std::vector<Vector> preference_estimates() const = 0;
  /// Current scale estimate per buyer (location-scale policies only).
  virtual std::vector<double> scale_estimates() const { return {}; }
  const std::vector<FitRecord>& fits() const { return fits_; }

 protected:
  void expect_begin(std::int64_t t);
  void expect_end(std::int64_t t);
  std::vector<FitRecord> fits_;

 private:
  std::int64_t next_t_ = 1;
  bool open_ = false;
};

/// Known noise: MLE on the whole previous episode, exploration with prob. 1/ell_k.
class CorpPolicy final : public Policy {
 public:
  CorpPolicy(PolicyContext context, NoiseModel model);

  PolicyKind kind() const override { return PolicyKind::kCorp; }
  ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) override;
  void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                  const AuctionOutcome& outcome) override;
  std::vector<Vector> preference_estimates() const override { return beta_; }

 private:
  void refit(int episode);

  PolicyContext ctx_;
  NoiseModel model_;
  std::vector<Vector> beta_;
  std::vector<std::vector<LikelihoodSample>> buffer_;
  int episode_ = 0;
};

/// Noise from a known location-scale family: joint (theta, alpha) MLE on a
/// round-robin exploration block of ceil(sqrt(ell_k)) periods.
class Corp2Policy final : public Policy {
 public:
  Corp2Policy(PolicyContext context, LocationScaleFamily family);

  PolicyKind kind() const override { return PolicyKind::kCorp2; }
  ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) override;
  void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                  const AuctionOutcome& outcome) override;
  std::vector<Vector> preference_estimates() const override;
  std::vector<double> scale_estimates() const override { return alpha_; }
  std::vector<Vector> theta_estimates() const { return theta_; }

 private:
  PolicyContext ctx_;
  LocationScaleFamily family_;
  std::vector<Vector> theta_;
  std::vector<double> alpha_;
  std::vector<std::vector<LikelihoodSample>> buffer_;
  std::size_t cursor_ = 0;
  int episode_ = 0;
};

/// Noise from an ambiguity set: least squares on B N q over a uniform-random
/// exploration block of ceil(ell_k^(2/3)) periods, robust reserves otherwise.
class ScorpPolicy final : public Policy {
 public:
  ScorpPolicy(PolicyContext context, AmbiguitySet ambiguity);

  PolicyKind kind() const override { return PolicyKind::kScorp; }
  ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) override;
  void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                  const AuctionOutcome& outcome) override;
  std::vector<Vector> preference_estimates() const override { return beta_; }
  /// Exploration samples of the current episode, per buyer.
  const std::vector<std::vector<LikelihoodSample>>& exploration_block() const { return buffer_; }

 private:
  PolicyContext ctx_;
  AmbiguitySet ambiguity_;
  std::vector<Vector> beta_;
  std::vector<std::vector<LikelihoodSample>> buffer_;
  int episode_ = 0;
};

/// Benchmark with the true preferences and the true noise model.
class OraclePolicy final : public Policy {
 public:
  OraclePolicy(NoiseModel model, std::vector<Vector> preferences, ReserveSolverSettings solver = {});

  PolicyKind kind() const override { return PolicyKind::kOracle; }
  std::vector<double> reserves(const Vector& x) const;
  ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) override;
  void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                  const AuctionOutcome& outcome) override;
  std::vector<Vector> preference_estimates() const override { return preferences_; }

 private:
  NoiseModel model_;
  std::vector<Vector> preferences_;
  ReserveSolverSettings solver_;
};

/// Benchmark with the true preferences that hedges against the ambiguity set.
class RobustOraclePolicy final : public Policy {
 public:
  RobustOraclePolicy(AmbiguitySet ambiguity, std::vector<Vector> preferences,
                     ReserveSolverSettings solver = {});

  PolicyKind kind() const override { return PolicyKind::kRobustOracle; }
  std::vector<double> reserves(const Vector& x) const;
  ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) override;
  void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                  const AuctionOutcome& outcome) override;
  std::vector<Vector> preference_estimates() const override { return preferences_; }

 private:
  AmbiguitySet ambiguity_;
  std::vector<Vector> preferences_;
  ReserveSolverSettings solver_;
};

class ZeroReservePolicy final : public Policy {
 public:
  explicit ZeroReservePolicy(std::size_t buyers) : buyers_(buyers) {}

  PolicyKind kind() const override { return PolicyKind::kZeroReserve; }
  ReserveDecision begin_period(std::int64_t t, const Vector& x, Rng& rng) override;
  void end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                  const AuctionOutcome& outcome) override;
  std::vector<Vector> preference_estimates() const override { return {}; }

 private:
  std::size_t buyers_;
};

}  // namespace reservelab
