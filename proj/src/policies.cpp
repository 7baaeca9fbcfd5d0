#include "reservelab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reservelab {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kCorp:
      return "corp";
    case PolicyKind::kCorp2:
      return "corp2";
    case PolicyKind::kScorp:
      return "scorp";
    case PolicyKind::kOracle:
      return "oracle";
    case PolicyKind::kRobustOracle:
      return "robust_oracle";
    case PolicyKind::kZeroReserve:
      return "zero_reserve";
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
  for (auto kind : {PolicyKind::kCorp, PolicyKind::kCorp2, PolicyKind::kScorp, PolicyKind::kOracle,
                    PolicyKind::kRobustOracle, PolicyKind::kZeroReserve}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown policy kind '" + name + "'");
}

std::int64_t exploration_length(PolicyKind kind, std::int64_t ell) {
  if (ell < 1) throw std::invalid_argument("episode length must be at least 1");
  switch (kind) {
    case PolicyKind::kCorp2:
      return ceil_sqrt(ell);
    case PolicyKind::kScorp:
      return ceil_two_thirds_power(ell);
    default:
      return 0;
  }
}

void Policy::expect_begin(std::int64_t t) {
  if (open_ || t != next_t_) {
    throw std::logic_error("begin_period called out of order at t=" + std::to_string(t));
  }
  open_ = true;
}

void Policy::expect_end(std::int64_t t) {
  if (!open_ || t != next_t_) {
    throw std::logic_error("end_period called out of order at t=" + std::to_string(t));
  }
  open_ = false;
  ++next_t_;
}

namespace {

void check_dimension(const Vector& x, int dimension) {
  if (x.size() != dimension) throw std::invalid_argument("context has the wrong dimension");
}

ReserveDecision exploration_decision(std::size_t buyers, std::size_t selected, double price) {
  ReserveDecision d;
  d.reserves.assign(buyers, kExcluded);
  d.reserves[selected] = price;
  d.explore = true;
  d.selected_buyer = selected;
  return d;
}

std::size_t random_buyer(std::size_t buyers, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, buyers - 1)(rng);
}

double exploration_price(double valuation_bound, Rng& rng) {
  return valuation_bound * uniform01(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// CORP

CorpPolicy::CorpPolicy(PolicyContext context, NoiseModel model)
    : ctx_(std::move(context)),
      model_(std::move(model)),
      beta_(ctx_.buyers, Vector::Zero(ctx_.dimension)),
      buffer_(ctx_.buyers) {}

void CorpPolicy::refit(int episode) {
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    const auto& samples = buffer_[i];
    const auto usable = std::count_if(samples.begin(), samples.end(),
                                      [](const auto& s) { return std::isfinite(s.threshold); });
    if (usable == 0) continue;
    const FitResult fit = fit_corp_mle(samples, model_, ctx_.preference_bound, ctx_.estimator);
    beta_[i] = fit.estimate;
    fits_.push_back({episode, i, static_cast<std::size_t>(usable), fit.iterations, fit.converged,
                     fit.objective, fit.estimate});
  }
}

ReserveDecision CorpPolicy::begin_period(std::int64_t t, const Vector& x, Rng& rng) {
  expect_begin(t);
  check_dimension(x, ctx_.dimension);
  const EpisodeInfo ep = episode_of(t);
  if (ep.k != episode_) {
    if (ep.k >= 2) refit(ep.k);
    for (auto& b : buffer_) b.clear();
    episode_ = ep.k;
  }

  const bool coin = uniform01(rng) * static_cast<double>(ep.ell) < 1.0;
  if (ep.k == 1) return {std::vector<double>(ctx_.buyers, 0.0), false, std::nullopt};
  if (coin) {
    const std::size_t selected = random_buyer(ctx_.buyers, rng);
    return exploration_decision(ctx_.buyers, selected,
                                exploration_price(ctx_.valuation_bound, rng));
  }
  ReserveDecision d;
  d.reserves.resize(ctx_.buyers);
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    d.reserves[i] = optimal_reserve(model_, x.dot(beta_[i]), ctx_.solver);
  }
  return d;
}

void CorpPolicy::end_period(std::int64_t t, const Vector& x, const ReserveDecision&,
                            const AuctionOutcome& outcome) {
  expect_end(t);
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    buffer_[i].push_back({x, outcome.thresholds[i], static_cast<bool>(outcome.allocated[i])});
  }
}

// ---------------------------------------------------------------------------
// CORP-II

Corp2Policy::Corp2Policy(PolicyContext context, LocationScaleFamily family)
    : ctx_(std::move(context)),
      family_(std::move(family)),
      theta_(ctx_.buyers, Vector::Zero(ctx_.dimension)),
      alpha_(ctx_.buyers, 1.0 / family_.sigma_hi()),
      buffer_(ctx_.buyers) {}

std::vector<Vector> Corp2Policy::preference_estimates() const {
  std::vector<Vector> out;
  out.reserve(ctx_.buyers);
  for (std::size_t i = 0; i < ctx_.buyers; ++i) out.push_back(theta_[i] / alpha_[i]);
  return out;
}

ReserveDecision Corp2Policy::begin_period(std::int64_t t, const Vector& x, Rng& rng) {
  expect_begin(t);
  check_dimension(x, ctx_.dimension);
  const EpisodeInfo ep = episode_of(t);
  if (ep.k != episode_) {
    for (auto& b : buffer_) b.clear();
    episode_ = ep.k;
  }
  if (ep.offset < exploration_length(PolicyKind::kCorp2, ep.ell)) {
    const std::size_t selected = cursor_;
    cursor_ = (cursor_ + 1) % ctx_.buyers;
    return exploration_decision(ctx_.buyers, selected,
                                exploration_price(ctx_.valuation_bound, rng));
  }
  ReserveDecision d;
  d.reserves.resize(ctx_.buyers);
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    d.reserves[i] = scaled_reserve(family_.base(), x.dot(theta_[i]), alpha_[i], ctx_.solver);
  }
  return d;
}

void Corp2Policy::end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                             const AuctionOutcome& outcome) {
  expect_end(t);
  if (!decision.explore) return;
  const std::size_t i = *decision.selected_buyer;
  const double price = decision.reserves[i];
  buffer_[i].push_back({x, price, static_cast<bool>(outcome.allocated[i]), price});

  const EpisodeInfo ep = episode_of(t);
  const std::int64_t block = exploration_length(PolicyKind::kCorp2, ep.ell);
  if (ep.offset != block - 1) return;
  const double weight = round_robin_weight(ctx_.buyers, static_cast<std::size_t>(block));
  const double radius = ctx_.preference_bound + 1.0 / family_.sigma_lo();
  for (std::size_t b = 0; b < ctx_.buyers; ++b) {
    if (buffer_[b].empty()) continue;
    const ScaleFitResult fit = fit_corp2_mle(buffer_[b], family_.base(), radius,
                                             1.0 / family_.sigma_hi(), weight, ctx_.estimator);
    theta_[b] = fit.theta;
    alpha_[b] = fit.alpha;
    fits_.push_back({ep.k, b, buffer_[b].size(), fit.iterations, fit.converged, fit.objective,
                     fit.theta / fit.alpha, fit.alpha});
  }
}

// ---------------------------------------------------------------------------
// SCORP

ScorpPolicy::ScorpPolicy(PolicyContext context, AmbiguitySet ambiguity)
    : ctx_(std::move(context)),
      ambiguity_(std::move(ambiguity)),
      beta_(ctx_.buyers, Vector::Zero(ctx_.dimension)),
      buffer_(ctx_.buyers) {}

ReserveDecision ScorpPolicy::begin_period(std::int64_t t, const Vector& x, Rng& rng) {
  expect_begin(t);
  check_dimension(x, ctx_.dimension);
  const EpisodeInfo ep = episode_of(t);
  if (ep.k != episode_) {
    for (auto& b : buffer_) b.clear();
    episode_ = ep.k;
  }
  if (ep.offset < exploration_length(PolicyKind::kScorp, ep.ell)) {
    const std::size_t selected = random_buyer(ctx_.buyers, rng);
    return exploration_decision(ctx_.buyers, selected,
                                exploration_price(ctx_.valuation_bound, rng));
  }
  ReserveDecision d;
  d.reserves.resize(ctx_.buyers);
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    d.reserves[i] = robust_reserve(ambiguity_, x.dot(beta_[i]), ctx_.solver);
  }
  return d;
}

void ScorpPolicy::end_period(std::int64_t t, const Vector& x, const ReserveDecision& decision,
                             const AuctionOutcome& outcome) {
  expect_end(t);
  if (!decision.explore) return;
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    buffer_[i].push_back({x, outcome.thresholds[i], static_cast<bool>(outcome.allocated[i])});
  }
  const EpisodeInfo ep = episode_of(t);
  if (ep.offset != exploration_length(PolicyKind::kScorp, ep.ell) - 1) return;
  for (std::size_t i = 0; i < ctx_.buyers; ++i) {
    const FitResult fit = fit_scorp_lse(buffer_[i], ctx_.valuation_bound, ctx_.buyers,
                                        ctx_.preference_bound, ctx_.estimator);
    beta_[i] = fit.estimate;
    fits_.push_back({ep.k, i, buffer_[i].size(), fit.iterations, fit.converged, fit.objective,
                     fit.estimate});
  }
}

// ---------------------------------------------------------------------------
// Benchmarks

OraclePolicy::OraclePolicy(NoiseModel model, std::vector<Vector> preferences,
                           ReserveSolverSettings solver)
    : model_(std::move(model)), preferences_(std::move(preferences)), solver_(solver) {}

std::vector<double> OraclePolicy::reserves(const Vector& x) const {
  std::vector<double> r(preferences_.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    check_dimension(x, static_cast<int>(preferences_[i].size()));
    r[i] = optimal_reserve(model_, x.dot(preferences_[i]), solver_);
  }
  return r;
}

ReserveDecision OraclePolicy::begin_period(std::int64_t t, const Vector& x, Rng&) {
  expect_begin(t);
  return {reserves(x), false, std::nullopt};
}

void OraclePolicy::end_period(std::int64_t t, const Vector&, const ReserveDecision&,
                              const AuctionOutcome&) {
  expect_end(t);
}

RobustOraclePolicy::RobustOraclePolicy(AmbiguitySet ambiguity, std::vector<Vector> preferences,
                                       ReserveSolverSettings solver)
    : ambiguity_(std::move(ambiguity)), preferences_(std::move(preferences)), solver_(solver) {}

std::vector<double> RobustOraclePolicy::reserves(const Vector& x) const {
  std::vector<double> r(preferences_.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    check_dimension(x, static_cast<int>(preferences_[i].size()));
    r[i] = robust_reserve(ambiguity_, x.dot(preferences_[i]), solver_);
  }
  return r;
}

ReserveDecision RobustOraclePolicy::begin_period(std::int64_t t, const Vector& x, Rng&) {
  expect_begin(t);
  return {reserves(x), false, std::nullopt};
}

void RobustOraclePolicy::end_period(std::int64_t t, const Vector&, const ReserveDecision&,
                                    const AuctionOutcome&) {
  expect_end(t);
}

ReserveDecision ZeroReservePolicy::begin_period(std::int64_t t, const Vector&, Rng&) {
  expect_begin(t);
  return {std::vector<double>(buyers_, 0.0), false, std::nullopt};
}

void ZeroReservePolicy::end_period(std::int64_t t, const Vector&, const ReserveDecision&,
                                   const AuctionOutcome&) {
  expect_end(t);
}

}  // namespace reservelab
