#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "reservelab/noise.hpp"
#include "reservelab/rng.hpp"

namespace reservelab {

using Vector = Eigen::VectorXd;

class ContextSampler {
 public:
  enum class Kind { kUniformBall, kNormalizedGaussian };

  ContextSampler(Kind kind, int dimension);

  Kind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  /// A draw with norm at most 1 (exactly 1 for kNormalizedGaussian).
  Vector sample(Rng& rng) const;

 private:
  Kind kind_;
  int dimension_;
};

inline Vector sample_context(const ContextSampler& sampler, Rng& rng) { return sampler.sample(rng); }

/// Market noise: either a fixed model, or a uniform on [-a_t, a_t] whose
/// half-width a_t is redrawn uniformly from [a_lo, a_hi] every period.
class NoiseProcess {
 public:
  explicit NoiseProcess(NoiseModel fixed);
  static NoiseProcess varying_uniform(double a_lo, double a_hi);

  bool is_fixed() const { return fixed_.has_value(); }
  /// Throws std::logic_error for a time-varying process.
  const NoiseModel& fixed_model() const;
  double support_bound() const;
  /// Noise draws for one period, one per buyer.
  std::vector<double> draw_period(Rng& rng, std::size_t buyers) const;

 private:
  NoiseProcess() = default;

  std::optional<NoiseModel> fixed_;
  double a_lo_ = 0.0;
  double a_hi_ = 0.0;
};

class MarketConfig {
 public:
  MarketConfig(double preference_bound, NoiseProcess noise, std::vector<Vector> preferences,
               ContextSampler sampler);

  std::size_t buyers() const { return preferences_.size(); }
  int dimension() const { return sampler_.dimension(); }
  double preference_bound() const { return preference_bound_; }
  /// B = B_p + B_n.
  double valuation_bound() const { return valuation_bound_; }
  const NoiseProcess& noise() const { return noise_; }
  const std::vector<Vector>& preferences() const { return preferences_; }
  const ContextSampler& sampler() const { return sampler_; }

  double mean_valuation(std::size_t buyer, const Vector& x) const;
  /// <x, beta_i> + z. Throws std::out_of_range for a bad buyer index.
  double valuation(std::size_t buyer, const Vector& x, double z) const;

 private:
  double preference_bound_;
  NoiseProcess noise_;
  std::vector<Vector> preferences_;
  ContextSampler sampler_;
  double valuation_bound_;
};

inline double valuation(const MarketConfig& config, std::size_t buyer, const Vector& x, double z) {
  return config.valuation(buyer, x, z);
}

/// N vectors drawn uniformly on the sphere of radius `radius` in R^d.
std::vector<Vector> random_preferences(std::size_t buyers, int dimension, double radius, Rng& rng);

}  // namespace reservelab
