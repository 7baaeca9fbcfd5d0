#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reservelab/simulator.hpp"

namespace reservelab {

using Json = nlohmann::json;

/// Invalid experiment spec. `field` is a dotted path such as "market.noise.a".
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& reason)
      : std::runtime_error(field + ": " + reason), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct NoiseSpec {
  /// uniform, truncated_laplace, truncated_logistic, truncated_normal,
  /// uniform_varying or family_member.
  std::string kind = "uniform";
  /// a, b, s or sigma depending on kind.
  double shape = 1.0;
  /// B_n for the truncated kinds.
  double bound = 0.0;
  double a_lo = 0.0;
  double a_hi = 0.0;
};

struct FamilySpec {
  /// Base shape before standardization to unit variance.
  NoiseSpec base;
  double sigma_lo = 1.0;
  double sigma_hi = 1.0;
};

struct AmbiguitySpec {
  /// uniform_supports or finite.
  std::string kind = "uniform_supports";
  double a_lo = 0.0;
  double a_hi = 0.0;
  std::vector<NoiseSpec> members;
};

struct ExperimentSpec {
  int buyers = 1;
  int dimension = 1;
  double preference_bound = 1.0;
  double bid_cap = 0.0;
  ContextSampler::Kind sampler = ContextSampler::Kind::kUniformBall;
  NoiseSpec noise;
  /// Explicit preference vectors; empty means random on the sphere of radius B_p.
  std::vector<Vector> preferences;
  /// Seed for random preferences; unset means the run seed.
  std::optional<std::uint64_t> preference_seed;
  PolicyKind policy = PolicyKind::kCorp;
  PolicyKind benchmark = PolicyKind::kOracle;
  std::optional<FamilySpec> family;
  std::optional<AmbiguitySpec> ambiguity;
  std::vector<BidderStrategy> bidders;
  std::vector<std::int64_t> horizons;
  std::vector<std::uint64_t> seeds;
  ReserveSolverSettings solver;
  EstimatorSettings estimator;
  std::vector<std::int64_t> t_grid;
};

/// Parses and validates. Throws SchemaError.
ExperimentSpec parse_spec(const Json& j);
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Canonical form with every default spelled out. Parsing it back and
/// serializing again gives the same document.
Json to_json(const ExperimentSpec& spec);
/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

NoiseModel build_noise_model(const NoiseSpec& spec, const std::optional<FamilySpec>& family);
SimulationConfig build_config(const ExperimentSpec& spec, std::int64_t horizon, std::uint64_t seed);

Json summarize(const SimulationResult& result, const SimulationConfig& config,
               const std::string& spec_hash);

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  int jobs = 1;
  std::uint64_t seed_offset = 0;
};

/// One trace CSV and summary JSON per (horizon, seed).
void cmd_run(const ExperimentSpec& spec, const CommandOptions& options);

struct SweepRow {
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  double final_regret = 0.0;
  std::optional<double> growth_exponent;
  std::string exponent_status;
  std::int64_t lies_total = 0;
  double final_est_err = 0.0;
};

struct SweepHorizonSummary {
  std::int64_t horizon = 0;
  double median_final_regret = 0.0;
  double iqr_final_regret = 0.0;
  std::optional<double> median_exponent;
  double median_lies = 0.0;
  /// Exponent fitted to the pointwise median of the cumulative regret curves.
  std::optional<double> median_curve_exponent;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepHorizonSummary> summary;
};

/// Runs every (horizon, seed) on up to `jobs` threads; also writes traces,
/// sweep.csv and sweep_summary.csv. Needs at least two seeds.
SweepResult cmd_sweep(const ExperimentSpec& spec, const CommandOptions& options);

/// Reads trace_*.csv under `trace_dir`, writes report.json there and returns it.
Json cmd_analyze(const std::filesystem::path& trace_dir);

/// Parsed trace file.
struct Trace {
  std::string spec_hash;
  std::uint64_t seed = 0;
  std::vector<int> episode;
  std::vector<double> cumulative_regret;
  std::vector<std::int64_t> lies_total;
  /// est_err per period, one row per buyer.
  std::vector<std::vector<double>> est_err;
};

/// Throws std::runtime_error on a malformed file.
Trace read_trace(const std::filesystem::path& path);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double q);

}  // namespace reservelab
