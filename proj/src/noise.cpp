#include "reservelab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace reservelab {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be a positive finite number");
  }
}

double uniform_cdf(double a, double z) {
  if (z <= -a) return 0.0;
  if (z >= a) return 1.0;
  return (z + a) / (2.0 * a);
}

double uniform_survival(double a, double z) { return uniform_cdf(a, -z); }

double uniform_pdf(double a, double z) { return std::abs(z) <= a ? 0.5 / a : 0.0; }

}  // namespace

NoiseModel::NoiseModel(Kind kind, double shape, double bound)
    : kind_(kind), shape_(shape), bound_(bound) {
  require_positive(shape, "noise shape parameter");
  require_positive(bound, "noise support bound");
  if (kind_ != Kind::kUniform) {
    tail_mass_ = parent_lower_cdf(-bound_);
    normalizer_ = 2.0 * (0.5 - tail_mass_);
    if (!(normalizer_ > 0.0)) {
      throw std::invalid_argument("truncation leaves no probability mass");
    }
  }
}

NoiseModel NoiseModel::uniform(double half_width) {
  return NoiseModel(Kind::kUniform, half_width, half_width);
}

NoiseModel NoiseModel::truncated_laplace(double scale, double support_bound) {
  return NoiseModel(Kind::kTruncatedLaplace, scale, support_bound);
}

NoiseModel NoiseModel::truncated_logistic(double scale, double support_bound) {
  return NoiseModel(Kind::kTruncatedLogistic, scale, support_bound);
}

NoiseModel NoiseModel::truncated_normal(double sigma, double support_bound) {
  return NoiseModel(Kind::kTruncatedNormal, sigma, support_bound);
}

double NoiseModel::parent_lower_cdf(double u) const {
  switch (kind_) {
    case Kind::kTruncatedLaplace:
      return 0.5 * std::exp(u / shape_);
    case Kind::kTruncatedLogistic: {
      const double e = std::exp(u / shape_);
      return e / (1.0 + e);
    }
    case Kind::kTruncatedNormal:
      return 0.5 * std::erfc(-u / (shape_ * kSqrt2));
    case Kind::kUniform:
      break;
  }
  return uniform_cdf(shape_, u);
}

double NoiseModel::parent_pdf(double u) const {
  switch (kind_) {
    case Kind::kTruncatedLaplace:
      return std::exp(-std::abs(u) / shape_) / (2.0 * shape_);
    case Kind::kTruncatedLogistic: {
      const double e = std::exp(-std::abs(u) / shape_);
      return e / (shape_ * (1.0 + e) * (1.0 + e));
    }
    case Kind::kTruncatedNormal:
      return std::exp(-0.5 * (u / shape_) * (u / shape_)) / (shape_ * kSqrt2Pi);
    case Kind::kUniform:
      break;
  }
  return uniform_pdf(shape_, u);
}

double NoiseModel::unit_cdf(double u) const {
  if (u <= -bound_) return 0.0;
  if (u >= bound_) return 1.0;
  if (kind_ == Kind::kUniform) return uniform_cdf(shape_, u);
  if (u > 0.0) return 1.0 - unit_cdf(-u);
  return (parent_lower_cdf(u) - tail_mass_) / normalizer_;
}

double NoiseModel::unit_pdf(double u) const {
  if (std::abs(u) > bound_) return 0.0;
  if (kind_ == Kind::kUniform) return uniform_pdf(shape_, u);
  return parent_pdf(u) / normalizer_;
}

double NoiseModel::unit_quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  if (kind_ == Kind::kUniform) return -shape_ + 2.0 * shape_ * u;
  if (u > 0.5) return -unit_quantile(1.0 - u);
  const double p = tail_mass_ + u * normalizer_;
  double x = 0.0;
  switch (kind_) {
    case Kind::kTruncatedLaplace:
      x = shape_ * std::log(2.0 * p);
      break;
    case Kind::kTruncatedLogistic:
      x = shape_ * std::log(p / (1.0 - p));
      break;
    default: {
      double lo = -bound_;
      double hi = 0.0;
      for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (unit_cdf(mid) < u ? lo : hi) = mid;
      }
      x = 0.5 * (lo + hi);
    }
  }
  return std::clamp(x, -bound_, bound_);
}

double NoiseModel::cdf(double z) const { return unit_cdf(z / scale_); }

double NoiseModel::survival(double z) const { return unit_cdf(-z / scale_); }

double NoiseModel::pdf(double z) const { return unit_pdf(z / scale_) / scale_; }

double NoiseModel::quantile(double u) const { return unit_quantile(u) * scale_; }

double NoiseModel::sample(Rng& rng) const { return quantile(uniform01(rng)); }

NoiseModel NoiseModel::scaled(double factor) const {
  require_positive(factor, "scale factor");
  NoiseModel out = *this;
  out.scale_ *= factor;
  return out;
}

double NoiseModel::variance() const {
  if (kind_ == Kind::kUniform) {
    const double a = support_bound();
    return a * a / 3.0;
  }
  // Composite Simpson on the unscaled [0, B]; the density is symmetric and
  // smooth away from 0. Scaled nodes could round past the support edge.
  constexpr int kIntervals = 200000;
  const double h = bound_ / kIntervals;
  double acc = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double u = i == kIntervals ? bound_ : i * h;
    const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * u * u * unit_pdf(u);
  }
  return scale_ * scale_ * 2.0 * acc * h / 3.0;
}

std::string NoiseModel::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kUniform:
      os << "uniform(a=" << support_bound() << ")";
      break;
    case Kind::kTruncatedLaplace:
      os << "truncated_laplace(b=" << shape() << ", B_n=" << support_bound() << ")";
      break;
    case Kind::kTruncatedLogistic:
      os << "truncated_logistic(s=" << shape() << ", B_n=" << support_bound() << ")";
      break;
    case Kind::kTruncatedNormal:
      os << "truncated_normal(sigma=" << shape() << ", B_n=" << support_bound() << ")";
      break;
  }
  return os.str();
}

double virtual_valuation(const NoiseModel& model, double y) {
  const double bound = model.support_bound();
  if (!(y >= -bound && y < bound)) {
    throw std::domain_error("virtual valuation evaluated outside the noise support");
  }
  const double density = model.pdf(y);
  if (!(density > 0.0)) {
    throw std::domain_error("virtual valuation undefined where the density vanishes");
  }
  return y - model.survival(y) / density;
}

namespace {

template <typename Cdf, typename Survival>
LogConcavityReport scan_log_concavity(Cdf&& cdf, Survival&& survival, double bound, double step,
                                      double tol) {
  require_positive(step, "grid step");
  LogConcavityReport report;
  report.worst_violation = -std::numeric_limits<double>::infinity();
  const auto n = static_cast<long>(std::floor(2.0 * bound / step));
  auto visit = [&](double prev, double here, double next, double z) {
    if (!std::isfinite(prev) || !std::isfinite(here) || !std::isfinite(next)) return;
    const double diff = next - 2.0 * here + prev;
    if (diff > report.worst_violation) {
      report.worst_violation = diff;
      report.worst_z = z;
    }
  };
  for (long j = 2; j + 2 <= n; ++j) {
    const double z = -bound + static_cast<double>(j) * step;
    const double zl = z - step;
    const double zr = z + step;
    visit(std::log(cdf(zl)), std::log(cdf(z)), std::log(cdf(zr)), z);
    visit(std::log(survival(zl)), std::log(survival(z)), std::log(survival(zr)), z);
  }
  report.ok = report.worst_violation <= tol;
  return report;
}

}  // namespace

LogConcavityReport check_log_concavity(const std::function<double(double)>& cdf, double bound,
                                       double step, double tol) {
  return scan_log_concavity(
      cdf, [&](double z) { return 1.0 - cdf(z); }, bound, step, tol);
}

LogConcavityReport check_log_concavity(const NoiseModel& model, double step, double tol) {
  return scan_log_concavity([&](double z) { return model.cdf(z); },
                            [&](double z) { return model.survival(z); }, model.support_bound(),
                            step, tol);
}

NoiseModel standardized(const NoiseModel& model) {
  return model.scaled(1.0 / std::sqrt(model.variance()));
}

LocationScaleFamily::LocationScaleFamily(NoiseModel base, double sigma_lo, double sigma_hi)
    : base_(std::move(base)), sigma_lo_(sigma_lo), sigma_hi_(sigma_hi) {
  require_positive(sigma_lo, "sigma_lo");
  if (!(sigma_hi >= sigma_lo) || !std::isfinite(sigma_hi)) {
    throw std::invalid_argument("sigma_hi must be finite and at least sigma_lo");
  }
  if (std::abs(base_.variance() - 1.0) > 1e-6) {
    throw std::invalid_argument("location-scale base must have unit variance");
  }
}

NoiseModel LocationScaleFamily::member(double sigma) const {
  if (!(sigma >= sigma_lo_ && sigma <= sigma_hi_)) {
    throw std::domain_error("sigma outside the family's scale range");
  }
  return base_.scaled(sigma);
}

AmbiguitySet::AmbiguitySet(UniformSupports supports) : members_(supports) {
  if (!(supports.a_lo > 0.0) || !(supports.a_hi >= supports.a_lo) ||
      !std::isfinite(supports.a_hi)) {
    throw std::invalid_argument("uniform supports require 0 < a_lo <= a_hi");
  }
}

AmbiguitySet::AmbiguitySet(FiniteSet set) : members_(std::move(set)) {
  const auto& list = std::get<FiniteSet>(members_).members;
  if (list.empty()) throw std::invalid_argument("ambiguity set must be nonempty");
  for (const auto& m : list) {
    if (!check_log_concavity(m).ok) {
      throw std::invalid_argument("ambiguity set member " + m.describe() + " is not log-concave");
    }
  }
}

double AmbiguitySet::envelope_cdf(double z) const {
  if (const auto* u = std::get_if<UniformSupports>(&members_)) {
    return z >= 0.0 ? uniform_cdf(u->a_lo, z) : uniform_cdf(u->a_hi, z);
  }
  double best = 0.0;
  for (const auto& m : std::get<FiniteSet>(members_).members) best = std::max(best, m.cdf(z));
  return best;
}

double AmbiguitySet::envelope_survival(double z) const {
  if (const auto* u = std::get_if<UniformSupports>(&members_)) {
    return z >= 0.0 ? uniform_survival(u->a_lo, z) : uniform_survival(u->a_hi, z);
  }
  double best = 1.0;
  for (const auto& m : std::get<FiniteSet>(members_).members) best = std::min(best, m.survival(z));
  return best;
}

double AmbiguitySet::envelope_density(double z) const {
  if (const auto* u = std::get_if<UniformSupports>(&members_)) {
    return z >= 0.0 ? uniform_pdf(u->a_lo, z) : uniform_pdf(u->a_hi, z);
  }
  const auto& list = std::get<FiniteSet>(members_).members;
  const NoiseModel* arg = &list.front();
  double best = arg->cdf(z);
  for (const auto& m : list) {
    const double value = m.cdf(z);
    if (value > best) {
      best = value;
      arg = &m;
    }
  }
  return arg->pdf(z);
}

double AmbiguitySet::support_bound() const {
  if (const auto* u = std::get_if<UniformSupports>(&members_)) return u->a_hi;
  double bound = 0.0;
  for (const auto& m : std::get<FiniteSet>(members_).members) {
    bound = std::max(bound, m.support_bound());
  }
  return bound;
}

}  // namespace reservelab
