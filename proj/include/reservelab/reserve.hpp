#pragma once

#include <optional>

#include "reservelab/noise.hpp"

namespace reservelab {

struct ReserveSolverSettings {
  double search_tol = 1e-10;
  int max_iter = 200;
  /// Step used by grid cross-checks.
  double grid_step = 1e-5;

  void validate() const;
};

/// argmax over y >= 0 of y * (1 - F(y - w)), where w = <x, beta> is the mean valuation.
double optimal_reserve(const NoiseModel& model, double w, const ReserveSolverSettings& settings = {});

/// argmax over y of y * (1 - F(alpha * y - theta_x)); equals optimal_reserve(base, theta_x) / alpha.
double scaled_reserve(const NoiseModel& base, double theta_x, double alpha,
                      const ReserveSolverSettings& settings = {});

/// argmax over y of min over F in the set of y * (1 - F(y - w)).
double robust_reserve(const AmbiguitySet& set, double w, const ReserveSolverSettings& settings = {});

/// Closed form of robust_reserve for uniform supports [-a, a], a in [a_lo, a_hi].
/// Valid for w in [-a_lo, 3 * a_hi]; beyond 3 * a_hi the maximizer sits on the
/// support kink w - a_hi instead. Throws std::domain_error outside that range.
double robust_reserve_uniform_closed_form(double a_lo, double a_hi, double w);

/// Revenue derivative 1 - F(r - w) - r * f(r - w); zero at interior optima.
double stationary_residual(const NoiseModel& model, double w, double r);

/// Root of phi(r - w) = -w by bisection, or nullopt when the optimum is not an
/// interior stationary point (boundary, kink, or negative root).
std::optional<double> stationary_reserve(const NoiseModel& model, double w,
                                         const ReserveSolverSettings& settings = {});

}  // namespace reservelab
