#include "reservelab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "reservelab/schedule.hpp"

namespace reservelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PolicyContext policy_context(const SimulationConfig& config) {
  PolicyContext ctx;
  ctx.buyers = config.market.buyers();
  ctx.dimension = config.market.dimension();
  ctx.preference_bound = config.market.preference_bound();
  ctx.valuation_bound = config.market.valuation_bound();
  ctx.solver = config.solver;
  ctx.estimator = config.estimator;
  return ctx;
}

std::unique_ptr<Policy> make_benchmark(const SimulationConfig& config) {
  if (config.benchmark == PolicyKind::kOracle) {
    return std::make_unique<OraclePolicy>(config.market.noise().fixed_model(),
                                          config.market.preferences(), config.solver);
  }
  return std::make_unique<RobustOraclePolicy>(*config.ambiguity, config.market.preferences(),
                                              config.solver);
}

std::vector<double> benchmark_reserves(const Policy& benchmark, const Vector& x) {
  if (const auto* o = dynamic_cast<const OraclePolicy*>(&benchmark)) return o->reserves(x);
  return static_cast<const RobustOraclePolicy&>(benchmark).reserves(x);
}

}  // namespace

double SimulationConfig::effective_bid_cap() const {
  return bid_cap > 0.0 ? bid_cap : market.valuation_bound() + 1.0;
}

void SimulationConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (bidders.size() != market.buyers()) {
    throw std::invalid_argument("need exactly one bidder strategy per buyer");
  }
  for (const auto& s : bidders) validate_strategy(s);
  if (bid_cap > 0.0 && bid_cap < market.valuation_bound()) {
    throw std::invalid_argument("bid cap must be at least the valuation bound");
  }
  if (benchmark != PolicyKind::kOracle && benchmark != PolicyKind::kRobustOracle) {
    throw std::invalid_argument("benchmark must be oracle or robust_oracle");
  }
  const bool fixed = market.noise().is_fixed();
  if ((policy == PolicyKind::kCorp || policy == PolicyKind::kOracle ||
       benchmark == PolicyKind::kOracle) &&
      !fixed) {
    throw std::invalid_argument("a known-noise policy or benchmark needs a fixed noise model");
  }
  if ((policy == PolicyKind::kScorp || policy == PolicyKind::kRobustOracle ||
       benchmark == PolicyKind::kRobustOracle) &&
      !ambiguity) {
    throw std::invalid_argument("robust policies and benchmarks need an ambiguity set");
  }
  if (policy == PolicyKind::kCorp2 && !family) {
    throw std::invalid_argument("corp2 needs a location-scale family");
  }
  solver.validate();
  estimator.validate();
}

void RegretLedger::add(std::int64_t t, int episode, double policy_revenue,
                       double benchmark_revenue, std::int64_t lies) {
  if (t != periods() + 1) throw std::logic_error("ledger periods must be consecutive");
  const double gap = benchmark_revenue - policy_revenue;
  gaps_.push_back(gap);
  cumulative_.push_back((cumulative_.empty() ? 0.0 : cumulative_.back()) + gap);
  auto& e = episodes_[episode];
  ++e.periods;
  e.policy_revenue += policy_revenue;
  e.benchmark_revenue += benchmark_revenue;
  e.regret += gap;
  e.lies += lies;
}

GrowthFit fit_growth_exponent(const std::vector<double>& cumulative,
                              const std::vector<std::int64_t>& t_grid) {
  std::vector<std::int64_t> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 2) throw std::invalid_argument("growth fit needs two distinct grid points");
  for (auto t : grid) {
    if (t < 1 || t > static_cast<std::int64_t>(cumulative.size())) {
      throw std::invalid_argument("grid point outside the regret series");
    }
  }
  bool all_zero = true;
  bool any_nonpositive = false;
  for (auto t : grid) {
    const double c = cumulative[static_cast<std::size_t>(t - 1)];
    if (c != 0.0) all_zero = false;
    if (!(c > 0.0)) any_nonpositive = true;
  }
  if (all_zero) return {std::nullopt, "zero-regret"};
  if (any_nonpositive) return {std::nullopt, "nonpositive"};

  double mx = 0.0, my = 0.0;
  for (auto t : grid) {
    mx += std::log(static_cast<double>(t));
    my += std::log(cumulative[static_cast<std::size_t>(t - 1)]);
  }
  const double n = static_cast<double>(grid.size());
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (auto t : grid) {
    const double dx = std::log(static_cast<double>(t)) - mx;
    sxy += dx * (std::log(cumulative[static_cast<std::size_t>(t - 1)]) - my);
    sxx += dx * dx;
  }
  return {sxy / sxx, "ok"};
}

GrowthFit fit_growth_exponent(const RegretLedger& ledger, const std::vector<std::int64_t>& t_grid) {
  return fit_growth_exponent(ledger.cumulative_series(), t_grid);
}

std::vector<std::int64_t> default_t_grid(std::int64_t horizon) {
  std::vector<std::int64_t> grid;
  const std::int64_t start = horizon >= 512 ? 256 : 2;
  for (std::int64_t t = start; t <= horizon; t *= 2) grid.push_back(t);
  return grid;
}

double benchmark_realized_revenue(std::span<const double> valuations,
                                  std::span<const double> reserves, Rng& tie_rng) {
  if (valuations.size() != reserves.size()) {
    throw std::invalid_argument("valuations and reserves must have the same length");
  }
  if (valuations.empty()) throw std::invalid_argument("need at least one buyer");
  const double v_plus = *std::max_element(valuations.begin(), valuations.end());
  std::vector<std::size_t> top;
  for (std::size_t i = 0; i < valuations.size(); ++i) {
    if (valuations[i] == v_plus) top.push_back(i);
  }
  std::size_t winner = top.front();
  if (top.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, top.size() - 1);
    winner = top[pick(tie_rng)];
  }
  double v_minus = valuations.size() == 1 ? 0.0 : -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < valuations.size(); ++j) {
    if (j != winner) v_minus = std::max(v_minus, valuations[j]);
  }
  const double r = reserves[winner];
  if (!(v_plus >= r)) return 0.0;
  return std::max(v_minus, r);
}

std::unique_ptr<Policy> make_policy(const SimulationConfig& config) {
  const PolicyContext ctx = policy_context(config);
  switch (config.policy) {
    case PolicyKind::kCorp:
      return std::make_unique<CorpPolicy>(ctx, config.market.noise().fixed_model());
    case PolicyKind::kCorp2:
      return std::make_unique<Corp2Policy>(ctx, *config.family);
    case PolicyKind::kScorp:
      return std::make_unique<ScorpPolicy>(ctx, *config.ambiguity);
    case PolicyKind::kOracle:
      return std::make_unique<OraclePolicy>(config.market.noise().fixed_model(),
                                            config.market.preferences(), config.solver);
    case PolicyKind::kRobustOracle:
      return std::make_unique<RobustOraclePolicy>(*config.ambiguity, config.market.preferences(),
                                                  config.solver);
    case PolicyKind::kZeroReserve:
      return std::make_unique<ZeroReservePolicy>(config.market.buyers());
  }
  throw std::invalid_argument("unknown policy kind");
}

SimulationResult run_simulation(const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  const MarketConfig& market = config.market;
  const std::size_t n = market.buyers();
  const double cap = config.effective_bid_cap();
  const double bound = market.valuation_bound();

  auto policy = make_policy(config);
  auto benchmark = make_benchmark(config);

  Rng contexts = make_stream(seed, Stream::kContexts);
  Rng noise = make_stream(seed, Stream::kNoise);
  Rng exploration = make_stream(seed, Stream::kExploration);
  Rng ties = make_stream(seed, Stream::kTieBreak);
  std::vector<Rng> bidder_rngs;
  for (std::size_t i = 0; i < n; ++i) {
    bidder_rngs.push_back(make_stream(seed, Stream::kBidders, static_cast<std::uint32_t>(i)));
  }

  SimulationResult result;
  result.seed = seed;
  result.preferences = market.preferences();
  result.lies = LieLedger(n, cap);
  result.records.reserve(static_cast<std::size_t>(config.horizon));

  for (std::int64_t t = 1; t <= config.horizon; ++t) {
    const EpisodeInfo ep = episode_of(t);
    PeriodRecord rec;
    rec.t = t;
    rec.episode = ep.k;
    rec.x = market.sampler().sample(contexts);
    rec.noise = market.noise().draw_period(noise, n);
    rec.valuations.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rec.valuations[i] = market.valuation(i, rec.x, rec.noise[i]);
      if (!(std::abs(rec.valuations[i]) <= bound * (1.0 + 1e-12))) {
        throw std::logic_error("valuation outside [-B, B]");
      }
    }

    const ReserveDecision decision = policy->begin_period(t, rec.x, exploration);
    rec.explore = decision.explore;
    rec.reserves = decision.reserves;

    rec.bids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rec.bids[i] = bid(config.bidders[i], t, rec.valuations[i], cap, bidder_rngs[i]);
    }

    Rng bench_ties = ties;
    const AuctionOutcome outcome =
        decision.explore ? run_exploration_offer(rec.bids, rec.reserves, *decision.selected_buyer)
                         : run_lazy_auction(rec.bids, rec.reserves, ties);
    rec.policy_revenue = outcome.payment;

    rec.benchmark_reserves = benchmark_reserves(*benchmark, rec.x);
    rec.benchmark_revenue =
        benchmark_realized_revenue(rec.valuations, rec.benchmark_reserves, bench_ties);

    // Estimates in force this period, before the policy sees the outcome.
    const auto estimates = policy->preference_estimates();
    rec.estimation_error.assign(n, kNaN);
    if (estimates.size() == n) {
      for (std::size_t i = 0; i < n; ++i) {
        rec.estimation_error[i] = (estimates[i] - market.preferences()[i]).squaredNorm();
      }
    }
    const auto scales = policy->scale_estimates();
    rec.alpha_mean = kNaN;
    if (!scales.empty()) {
      double s = 0.0;
      for (double a : scales) s += a;
      rec.alpha_mean = s / static_cast<double>(scales.size());
    }

    policy->end_period(t, rec.x, decision, outcome);

    rec.lies.resize(n);
    rec.shading.resize(n);
    rec.overbidding.resize(n);
    std::int64_t lies = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rec.valuations[i];
      const double b = rec.bids[i];
      const bool won = outcome.allocated[i];
      rec.lies[i] = result.lies.record(i, ep.k, v, b, outcome.thresholds[i], won);
      const double truthful = std::clamp(v, 0.0, cap);
      rec.shading[i] = std::max(0.0, truthful - b);
      rec.overbidding[i] = std::max(0.0, b - truthful);
      lies += rec.lies[i] ? 1 : 0;
    }

    result.ledger.add(t, ep.k, rec.policy_revenue, rec.benchmark_revenue, lies);
    rec.cumulative_regret = result.ledger.cumulative(t);
    result.records.push_back(std::move(rec));
  }

  result.fits = policy->fits();
  result.t_grid = config.t_grid.empty() ? default_t_grid(config.horizon) : config.t_grid;
  if (result.t_grid.size() >= 2) {
    result.growth = fit_growth_exponent(result.ledger, result.t_grid);
  } else {
    result.growth = {std::nullopt, "degenerate-grid"};
  }
  return result;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trace_csv(std::ostream& os, const SimulationResult& result, const std::string& spec_hash) {
  const std::size_t n = result.preferences.size();
  os << "# spec_hash=" << spec_hash << " seed=" << result.seed
     << " horizon=" << result.records.size() << "\n";
  os << "t,episode,explore,policy_rev,bench_rev,cum_regret,lies_total";
  for (std::size_t i = 0; i < n; ++i) os << ",est_err_" << i;
  os << "\n";
  std::int64_t lies_total = 0;
  for (const auto& rec : result.records) {
    for (bool l : rec.lies) lies_total += l ? 1 : 0;
    os << rec.t << ',' << rec.episode << ',' << (rec.explore ? 1 : 0) << ','
       << format_double(rec.policy_revenue) << ',' << format_double(rec.benchmark_revenue) << ','
       << format_double(rec.cumulative_regret) << ',' << lies_total;
    for (double e : rec.estimation_error) os << ',' << format_double(e);
    os << "\n";
  }
}

}  // namespace reservelab
