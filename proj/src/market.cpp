#include "reservelab/market.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace reservelab {

namespace {

Vector gaussian_vector(int dimension, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dimension);
  for (int i = 0; i < dimension; ++i) v[i] = normal(rng);
  return v;
}

Vector unit_direction(int dimension, Rng& rng) {
  for (;;) {
    Vector v = gaussian_vector(dimension, rng);
    const double norm = v.norm();
    if (norm > 1e-300) return v / norm;
  }
}

}  // namespace

ContextSampler::ContextSampler(Kind kind, int dimension) : kind_(kind), dimension_(dimension) {
  if (dimension < 1) throw std::invalid_argument("context dimension must be at least 1");
}

Vector ContextSampler::sample(Rng& rng) const {
  Vector direction = unit_direction(dimension_, rng);
  if (kind_ == Kind::kNormalizedGaussian) return direction;
  const double radius = std::pow(uniform01(rng), 1.0 / dimension_);
  return radius * direction;
}

NoiseProcess::NoiseProcess(NoiseModel fixed) : fixed_(std::move(fixed)) {}

NoiseProcess NoiseProcess::varying_uniform(double a_lo, double a_hi) {
  if (!(a_lo > 0.0) || !(a_hi >= a_lo) || !std::isfinite(a_hi)) {
    throw std::invalid_argument("varying uniform noise requires 0 < a_lo <= a_hi");
  }
  NoiseProcess p;
  p.a_lo_ = a_lo;
  p.a_hi_ = a_hi;
  return p;
}

const NoiseModel& NoiseProcess::fixed_model() const {
  if (!fixed_) throw std::logic_error("noise process is time-varying; no fixed model");
  return *fixed_;
}

double NoiseProcess::support_bound() const {
  return fixed_ ? fixed_->support_bound() : a_hi_;
}

std::vector<double> NoiseProcess::draw_period(Rng& rng, std::size_t buyers) const {
  std::vector<double> z(buyers);
  if (fixed_) {
    for (auto& value : z) value = fixed_->sample(rng);
    return z;
  }
  const double a = a_lo_ + (a_hi_ - a_lo_) * uniform01(rng);
  for (auto& value : z) value = a * (2.0 * uniform01(rng) - 1.0);
  return z;
}

MarketConfig::MarketConfig(double preference_bound, NoiseProcess noise,
                           std::vector<Vector> preferences, ContextSampler sampler)
    : preference_bound_(preference_bound),
      noise_(std::move(noise)),
      preferences_(std::move(preferences)),
      sampler_(sampler),
      valuation_bound_(preference_bound + noise_.support_bound()) {
  if (!(preference_bound > 0.0) || !std::isfinite(preference_bound)) {
    throw std::invalid_argument("B_p must be positive");
  }
  if (preferences_.empty()) throw std::invalid_argument("market needs at least one buyer");
  for (std::size_t i = 0; i < preferences_.size(); ++i) {
    const auto& beta = preferences_[i];
    if (beta.size() != sampler_.dimension()) {
      throw std::invalid_argument("preference vector " + std::to_string(i) +
                                  " has the wrong dimension");
    }
    if (beta.norm() > preference_bound_ * (1.0 + 1e-12)) {
      throw std::invalid_argument("preference vector " + std::to_string(i) +
                                  " violates ||beta|| <= B_p");
    }
  }
}

double MarketConfig::mean_valuation(std::size_t buyer, const Vector& x) const {
  if (buyer >= preferences_.size()) throw std::out_of_range("buyer index out of range");
  if (x.size() != sampler_.dimension()) throw std::invalid_argument("context dimension mismatch");
  return x.dot(preferences_[buyer]);
}

double MarketConfig::valuation(std::size_t buyer, const Vector& x, double z) const {
  return mean_valuation(buyer, x) + z;
}

std::vector<Vector> random_preferences(std::size_t buyers, int dimension, double radius, Rng& rng) {
  std::vector<Vector> out;
  out.reserve(buyers);
  for (std::size_t i = 0; i < buyers; ++i) out.push_back(radius * unit_direction(dimension, rng));
  return out;
}

}  // namespace reservelab
