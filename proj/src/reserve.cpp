#include "reservelab/reserve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reservelab {

void ReserveSolverSettings::validate() const {
  if (!(search_tol > 0.0)) throw std::invalid_argument("search_tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid_step must be positive");
}

namespace {

constexpr double kInvPhi = 0.6180339887498949;

// Maximizes y * S(y - w) over [0, max(0, w) + bound]. S is log-concave, so the
// revenue is unimodal and its derivative S - y * density changes sign once.
// Golden-section search brackets the maximizer; bisection on the derivative
// sign then pins it down, since the revenue is too flat near its peak for
// function comparisons alone to resolve it below ~1e-8.
template <typename Survival, typename Density>
double maximize_revenue(Survival&& survival, Density&& density, double w, double bound,
                        const ReserveSolverSettings& settings) {
  settings.validate();
  const double upper = std::max(0.0, w) + bound;
  if (!(survival(-w) > 0.0)) return 0.0;

  auto revenue = [&](double y) { return y * survival(y - w); };
  auto slope = [&](double y) { return survival(y - w) - y * density(y - w); };

  double a = 0.0;
  double b = upper;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = revenue(c);
  double fd = revenue(d);
  const double bracket_tol = std::max(settings.search_tol, 1e-7 * (1.0 + upper));
  for (int i = 0; i < settings.max_iter && b - a > bracket_tol; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = revenue(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = revenue(d);
    }
  }

  const double pad = 4.0 * bracket_tol;
  double lo = std::max(0.0, a - pad);
  double hi = std::min(upper, b + pad);
  if (!(slope(lo) > 0.0)) lo = 0.0;
  if (slope(hi) > 0.0) hi = upper;
  if (!(slope(lo) > 0.0)) return 0.0;
  if (slope(hi) > 0.0) return upper;

  for (int i = 0; i < settings.max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double optimal_reserve(const NoiseModel& model, double w, const ReserveSolverSettings& settings) {
  return maximize_revenue([&](double z) { return model.survival(z); },
                          [&](double z) { return model.pdf(z); }, w, model.support_bound(),
                          settings);
}

double scaled_reserve(const NoiseModel& base, double theta_x, double alpha,
                      const ReserveSolverSettings& settings) {
  if (!(alpha > 0.0)) throw std::domain_error("scale parameter alpha must be positive");
  return optimal_reserve(base, theta_x, settings) / alpha;
}

double robust_reserve(const AmbiguitySet& set, double w, const ReserveSolverSettings& settings) {
  return maximize_revenue([&](double z) { return set.envelope_survival(z); },
                          [&](double z) { return set.envelope_density(z); }, w,
                          set.support_bound(), settings);
}

double robust_reserve_uniform_closed_form(double a_lo, double a_hi, double w) {
  if (!(a_lo > 0.0) || !(a_hi >= a_lo) || !std::isfinite(a_hi)) {
    throw std::domain_error("closed form requires 0 < a_lo <= a_hi");
  }
  if (!(w >= -a_lo && w <= 3.0 * a_hi)) {
    throw std::domain_error("closed form is only valid for w in [-a_lo, 3 * a_hi]");
  }
  if (w <= a_lo) return 0.5 * (w + a_lo);
  if (w < a_hi) return w;
  return 0.5 * (w + a_hi);
}

double stationary_residual(const NoiseModel& model, double w, double r) {
  return model.survival(r - w) - r * model.pdf(r - w);
}

std::optional<double> stationary_reserve(const NoiseModel& model, double w,
                                         const ReserveSolverSettings& settings) {
  settings.validate();
  const double bound = model.support_bound();
  double lo = std::max(0.0, w - bound);
  double hi = std::nextafter(w + bound, lo);
  if (!(hi > lo)) return std::nullopt;
  // phi is increasing, so g(r) = phi(r - w) + w is too.
  const double top = std::nextafter(bound, 0.0);
  auto g = [&](double r) { return virtual_valuation(model, std::clamp(r - w, -bound, top)) + w; };
  if (g(lo) >= 0.0 || g(hi) <= 0.0) return std::nullopt;
  for (int i = 0; i < settings.max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace reservelab
