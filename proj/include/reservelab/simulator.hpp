#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reservelab/bidders.hpp"
#include "reservelab/market.hpp"
#include "reservelab/policies.hpp"

namespace reservelab {

struct SimulationConfig {
  explicit SimulationConfig(MarketConfig m) : market(std::move(m)) {}

  MarketConfig market;
  PolicyKind policy = PolicyKind::kCorp;
  /// kOracle or kRobustOracle.
  PolicyKind benchmark = PolicyKind::kOracle;
  std::optional<LocationScaleFamily> family;
  std::optional<AmbiguitySet> ambiguity;
  /// One strategy per buyer.
  std::vector<BidderStrategy> bidders;
  std::int64_t horizon = 1;
  /// Bid cap M; non-positive means the default B + 1.
  double bid_cap = 0.0;
  ReserveSolverSettings solver;
  EstimatorSettings estimator;
  /// Periods used for the growth-exponent fit; empty means default_t_grid.
  std::vector<std::int64_t> t_grid;

  double effective_bid_cap() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct PeriodRecord {
  std::int64_t t = 0;
  int episode = 0;
  bool explore = false;
  Vector x;
  std::vector<double> noise;
  std::vector<double> valuations;
  std::vector<double> bids;
  std::vector<double> reserves;
  double policy_revenue = 0.0;
  std::vector<double> benchmark_reserves;
  double benchmark_revenue = 0.0;
  double cumulative_regret = 0.0;
  std::vector<bool> lies;
  std::vector<double> shading;
  std::vector<double> overbidding;
  /// ||beta_hat_i - beta_i||^2 for the estimates in force this period (NaN if none).
  std::vector<double> estimation_error;
  /// Mean scale estimate across buyers (location-scale policy only, else NaN).
  double alpha_mean = 0.0;
};

class RegretLedger {
 public:
  struct Episode {
    std::int64_t periods = 0;
    double policy_revenue = 0.0;
    double benchmark_revenue = 0.0;
    double regret = 0.0;
    std::int64_t lies = 0;
  };

  void add(std::int64_t t, int episode, double policy_revenue, double benchmark_revenue,
           std::int64_t lies);

  std::int64_t periods() const { return static_cast<std::int64_t>(cumulative_.size()); }
  /// Cumulative regret through period t (1-based).
  double cumulative(std::int64_t t) const { return cumulative_.at(static_cast<std::size_t>(t - 1)); }
  const std::vector<double>& cumulative_series() const { return cumulative_; }
  const std::vector<double>& gaps() const { return gaps_; }
  const std::map<int, Episode>& episodes() const { return episodes_; }

 private:
  std::vector<double> gaps_;
  std::vector<double> cumulative_;
  std::map<int, Episode> episodes_;
};

struct GrowthFit {
  std::optional<double> exponent;
  /// "ok", "zero-regret" (identically zero on the grid), "nonpositive", or
  /// "degenerate-grid" when a run is too short to fit.
  std::string status;
};

/// OLS slope of log cumulative regret against log t over the grid.
/// Throws std::invalid_argument for fewer than two distinct grid points or
/// points outside the series.
GrowthFit fit_growth_exponent(const std::vector<double>& cumulative,
                              const std::vector<std::int64_t>& t_grid);
GrowthFit fit_growth_exponent(const RegretLedger& ledger, const std::vector<std::int64_t>& t_grid);

/// Powers of two from 2^8 (or 2 for short horizons) up to T.
std::vector<std::int64_t> default_t_grid(std::int64_t horizon);

/// Realized benchmark revenue max{v-, r+} * 1{v+ >= r+} with truthful bids.
double benchmark_realized_revenue(std::span<const double> valuations,
                                  std::span<const double> reserves, Rng& tie_rng);

struct SimulationResult {
  std::uint64_t seed = 0;
  std::vector<Vector> preferences;
  std::vector<PeriodRecord> records;
  RegretLedger ledger;
  LieLedger lies{1, 1.0};
  std::vector<FitRecord> fits;
  GrowthFit growth;
  std::vector<std::int64_t> t_grid;

  double final_regret() const { return ledger.periods() ? ledger.cumulative(ledger.periods()) : 0.0; }
};

std::unique_ptr<Policy> make_policy(const SimulationConfig& config);

SimulationResult run_simulation(const SimulationConfig& config, std::uint64_t seed);

/// Trace columns: t, episode, explore, policy_rev, bench_rev, cum_regret,
/// lies_total, est_err_0 .. est_err_{N-1}. The first line is a comment with
/// the spec hash and seed.
void write_trace_csv(std::ostream& os, const SimulationResult& result, const std::string& spec_hash);

/// printf-style "%.17g", "nan" for NaN.
std::string format_double(double value);

}  // namespace reservelab
