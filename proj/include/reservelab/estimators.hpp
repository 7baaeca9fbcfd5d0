#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "reservelab/market.hpp"
#include "reservelab/noise.hpp"

namespace reservelab {

/// One censored observation for a single buyer: the context, the price the
/// buyer had to beat, and whether it won.
struct LikelihoodSample {
  Vector x;
  double threshold = 0.0;
  bool won = false;
  /// Posted exploration price, only for location-scale fits.
  double explore_reserve = std::numeric_limits<double>::quiet_NaN();
};

struct EstimatorSettings {
  double grad_tol = 1e-9;
  int max_iter = 5000;
  double armijo = 1e-4;
  double clamp_eps = 1e-12;

  void validate() const;
};

struct FitResult {
  Vector estimate;
  double objective = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct ScaleFitResult {
  Vector theta;
  double alpha = 0.0;
  double objective = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// v if ||v|| <= radius, else v scaled onto the sphere.
Vector project_to_ball(const Vector& v, double radius);

/// Negative log-likelihood of the win flags, averaged over the samples with a
/// finite threshold. Excluded samples carry no information and are skipped.
double corp_nll(const Vector& beta, const std::vector<LikelihoodSample>& samples,
                const NoiseModel& model, double clamp_eps = 1e-12);
Vector corp_nll_grad(const Vector& beta, const std::vector<LikelihoodSample>& samples,
                     const NoiseModel& model, double clamp_eps = 1e-12);

/// argmin of corp_nll over ||beta|| <= preference_bound by projected gradient.
FitResult fit_corp_mle(const std::vector<LikelihoodSample>& samples, const NoiseModel& model,
                       double preference_bound, const EstimatorSettings& settings = {});

/// Location-scale likelihood in (theta, alpha): the win event is
/// z < alpha * r - <x, theta> for base noise z, weighted by `weight`.
/// `params` stacks theta and alpha (alpha last).
double corp2_nll(const Vector& params, const std::vector<LikelihoodSample>& samples,
                 const NoiseModel& base, double weight, double clamp_eps = 1e-12);
Vector corp2_nll_grad(const Vector& params, const std::vector<LikelihoodSample>& samples,
                      const NoiseModel& base, double weight, double clamp_eps = 1e-12);

/// ceil(N / |I_k|), the round-robin likelihood weight.
double round_robin_weight(std::size_t buyers, std::size_t exploration_periods);

/// Smallest alpha the location-scale fit may return.
inline constexpr double kMinAlpha = 1e-6;

/// Projection onto {||(theta, alpha)|| <= radius, alpha >= kMinAlpha}.
Vector project_scale_params(const Vector& params, double radius);

/// Fits (theta, alpha) over ||(theta, alpha)|| <= radius, starting at (0, alpha_start).
ScaleFitResult fit_corp2_mle(const std::vector<LikelihoodSample>& samples, const NoiseModel& base,
                             double radius, double alpha_start, double weight,
                             const EstimatorSettings& settings = {});

/// Mean squared error of B * N * q against <x, beta>.
double scorp_loss(const Vector& beta, const std::vector<LikelihoodSample>& samples,
                  double valuation_bound, std::size_t buyers);

/// Least-squares fit of B * N * q on x over ||beta|| <= preference_bound.
FitResult fit_scorp_lse(const std::vector<LikelihoodSample>& samples, double valuation_bound,
                        std::size_t buyers, double preference_bound,
                        const EstimatorSettings& settings = {});

}  // namespace reservelab
