#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "reservelab/rng.hpp"

namespace reservelab {

/// Bounded, mean-zero, symmetric noise distribution on [-B_n, B_n].
///
/// Truncated kinds are the parent density restricted to [-B_n, B_n] and
/// renormalized. A model carries an extra scale factor so that
/// `scaled(s).cdf(x) == cdf(x / s)` holds exactly; location-scale families are
/// built on top of that.
class NoiseModel {
 public:
  enum class Kind { kUniform, kTruncatedLaplace, kTruncatedLogistic, kTruncatedNormal };

  static NoiseModel uniform(double half_width);
  static NoiseModel truncated_laplace(double scale, double support_bound);
  static NoiseModel truncated_logistic(double scale, double support_bound);
  static NoiseModel truncated_normal(double sigma, double support_bound);

  Kind kind() const { return kind_; }
  /// Shape parameter as given at construction (a, b, s or sigma), times the scale factor.
  double shape() const { return shape_ * scale_; }
  double support_bound() const { return bound_ * scale_; }

  double cdf(double z) const;
  /// 1 - cdf(z), computed without cancellation.
  double survival(double z) const;
  double pdf(double z) const;
  double quantile(double u) const;
  double sample(Rng& rng) const;

  /// Distribution of factor * Z.
  NoiseModel scaled(double factor) const;
  /// Variance by quadrature over the support.
  double variance() const;

  std::string describe() const;

 private:
  NoiseModel(Kind kind, double shape, double bound);

  double unit_cdf(double u) const;
  double unit_pdf(double u) const;
  double unit_quantile(double u) const;
  double parent_lower_cdf(double u) const;  // valid for u <= 0
  double parent_pdf(double u) const;

  Kind kind_;
  double shape_;
  double bound_;
  double scale_ = 1.0;
  double tail_mass_ = 0.0;   // parent mass below -bound_
  double normalizer_ = 1.0;  // parent mass inside [-bound_, bound_]
};

inline double cdf(const NoiseModel& model, double z) { return model.cdf(z); }
inline double pdf(const NoiseModel& model, double z) { return model.pdf(z); }

/// phi(y) = y - (1 - F(y)) / f(y). Throws std::domain_error outside [-B_n, B_n)
/// or where the density vanishes.
double virtual_valuation(const NoiseModel& model, double y);

struct LogConcavityReport {
  bool ok = true;
  /// Largest second central difference of log F or log(1 - F) on the grid.
  double worst_violation = 0.0;
  double worst_z = 0.0;
};

/// Grid diagnostic for concavity of log F and log(1 - F) on (-bound, bound).
LogConcavityReport check_log_concavity(const std::function<double(double)>& cdf, double bound,
                                       double step = 1e-3, double tol = 1e-9);
LogConcavityReport check_log_concavity(const NoiseModel& model, double step = 1e-3,
                                       double tol = 1e-9);

/// Rescales a model to unit variance.
NoiseModel standardized(const NoiseModel& model);

/// {F(x / sigma) : sigma in [sigma_lo, sigma_hi]} for a unit-variance base F.
class LocationScaleFamily {
 public:
  LocationScaleFamily(NoiseModel base, double sigma_lo, double sigma_hi);

  const NoiseModel& base() const { return base_; }
  double sigma_lo() const { return sigma_lo_; }
  double sigma_hi() const { return sigma_hi_; }
  NoiseModel member(double sigma) const;

 private:
  NoiseModel base_;
  double sigma_lo_;
  double sigma_hi_;
};

struct UniformSupports {
  double a_lo;
  double a_hi;
};

struct FiniteSet {
  std::vector<NoiseModel> members;
};

/// Candidate noise distributions a robust seller hedges against.
class AmbiguitySet {
 public:
  explicit AmbiguitySet(UniformSupports supports);
  explicit AmbiguitySet(FiniteSet set);

  const std::variant<UniformSupports, FiniteSet>& members() const { return members_; }
  bool is_uniform_supports() const { return std::holds_alternative<UniformSupports>(members_); }

  /// H(z) = max over members of F(z).
  double envelope_cdf(double z) const;
  /// 1 - H(z).
  double envelope_survival(double z) const;
  /// Density of the member attaining the envelope at z.
  double envelope_density(double z) const;
  double support_bound() const;

 private:
  std::variant<UniformSupports, FiniteSet> members_;
};

}  // namespace reservelab
