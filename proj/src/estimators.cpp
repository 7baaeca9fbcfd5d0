#include "reservelab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reservelab {

void EstimatorSettings::validate() const {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("estimator max_iter must be at least 1");
  if (!(armijo > 0.0 && armijo < 1.0)) throw std::invalid_argument("armijo must lie in (0, 1)");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
    throw std::invalid_argument("clamp_eps must lie in (0, 0.5)");
  }
}

Vector project_to_ball(const Vector& v, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

namespace {

struct Solution {
  Vector x;
  double value = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Projected gradient descent with a Barzilai-Borwein trial step and Armijo
// backtracking by halving. Every accepted step lowers the objective.
template <typename Objective, typename Gradient, typename Projection>
Solution minimize_projected(const Vector& start, Objective&& objective, Gradient&& gradient,
                            Projection&& project, const EstimatorSettings& settings) {
  settings.validate();
  Solution sol;
  sol.x = project(start);
  sol.value = objective(sol.x);
  Vector grad = gradient(sol.x);
  double step = 1.0;
  int stalled = 0;

  for (sol.iterations = 0; sol.iterations < settings.max_iter; ++sol.iterations) {
    sol.projected_gradient_norm = (sol.x - project(sol.x - grad)).norm();
    if (sol.projected_gradient_norm <= settings.grad_tol) {
      sol.converged = true;
      break;
    }

    double trial = step;
    Vector next;
    double next_value = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, trial *= 0.5) {
      next = project(sol.x - trial * grad);
      next_value = objective(next);
      if (next_value <= sol.value + settings.armijo * grad.dot(next - sol.x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const Vector s = next - sol.x;
    if (s.norm() <= 1e-15 * (1.0 + sol.x.norm())) break;
    const Vector next_grad = gradient(next);
    const Vector y = next_grad - grad;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : std::max(1.0, 2.0 * trial);

    const double decrease = sol.value - next_value;
    stalled = decrease <= 1e-15 * (1.0 + std::abs(sol.value)) ? stalled + 1 : 0;
    sol.x = next;
    sol.value = next_value;
    grad = next_grad;
    if (stalled >= 25) break;
  }
  if (!sol.converged) sol.projected_gradient_norm = (sol.x - project(sol.x - grad)).norm();
  return sol;
}

bool informative(const LikelihoodSample& s) { return std::isfinite(s.threshold); }

// -log of the probability of the observed flag, and its derivative in u, where
// u is the noise level at which the buyer is exactly indifferent.
struct Term {
  double value;
  double slope;
};

Term censored_term(const NoiseModel& model, double u, bool won, double eps) {
  const double p_raw = won ? model.survival(u) : model.cdf(u);
  if (p_raw <= eps) return {-std::log(eps), 0.0};
  if (p_raw >= 1.0 - eps) return {-std::log1p(-eps), 0.0};
  const double f = model.pdf(u);
  return {-std::log(p_raw), won ? f / p_raw : -f / p_raw};
}

}  // namespace

double corp_nll(const Vector& beta, const std::vector<LikelihoodSample>& samples,
                const NoiseModel& model, double clamp_eps) {
  double acc = 0.0;
  std::size_t used = 0;
  for (const auto& s : samples) {
    if (!informative(s)) continue;
    acc += censored_term(model, s.threshold - s.x.dot(beta), s.won, clamp_eps).value;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no samples with a finite threshold");
  return acc / static_cast<double>(used);
}

Vector corp_nll_grad(const Vector& beta, const std::vector<LikelihoodSample>& samples,
                     const NoiseModel& model, double clamp_eps) {
  Vector grad = Vector::Zero(beta.size());
  std::size_t used = 0;
  for (const auto& s : samples) {
    if (!informative(s)) continue;
    const Term t = censored_term(model, s.threshold - s.x.dot(beta), s.won, clamp_eps);
    grad -= t.slope * s.x;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no samples with a finite threshold");
  return grad / static_cast<double>(used);
}

FitResult fit_corp_mle(const std::vector<LikelihoodSample>& samples, const NoiseModel& model,
                       double preference_bound, const EstimatorSettings& settings) {
  const auto first = std::find_if(samples.begin(), samples.end(), informative);
  if (first == samples.end()) throw std::invalid_argument("no usable samples for the MLE");
  const double eps = settings.clamp_eps;
  const Solution sol = minimize_projected(
      Vector::Zero(first->x.size()),
      [&](const Vector& b) { return corp_nll(b, samples, model, eps); },
      [&](const Vector& b) { return corp_nll_grad(b, samples, model, eps); },
      [&](const Vector& b) { return project_to_ball(b, preference_bound); }, settings);
  return {sol.x, sol.value, sol.projected_gradient_norm, sol.iterations, sol.converged};
}

namespace {

double explore_price(const LikelihoodSample& s) {
  if (!std::isfinite(s.explore_reserve)) {
    throw std::invalid_argument("location-scale samples need an exploration price");
  }
  return s.explore_reserve;
}

}  // namespace

double corp2_nll(const Vector& params, const std::vector<LikelihoodSample>& samples,
                 const NoiseModel& base, double weight, double clamp_eps) {
  if (samples.empty()) throw std::invalid_argument("no exploration samples");
  const auto d = params.size() - 1;
  const double alpha = params[d];
  double acc = 0.0;
  for (const auto& s : samples) {
    const double u = alpha * explore_price(s) - s.x.dot(params.head(d));
    acc += censored_term(base, u, s.won, clamp_eps).value;
  }
  return weight * acc;
}

Vector corp2_nll_grad(const Vector& params, const std::vector<LikelihoodSample>& samples,
                      const NoiseModel& base, double weight, double clamp_eps) {
  if (samples.empty()) throw std::invalid_argument("no exploration samples");
  const auto d = params.size() - 1;
  const double alpha = params[d];
  Vector grad = Vector::Zero(params.size());
  for (const auto& s : samples) {
    const double r = explore_price(s);
    const Term t = censored_term(base, alpha * r - s.x.dot(params.head(d)), s.won, clamp_eps);
    grad.head(d) -= t.slope * s.x;
    grad[d] += t.slope * r;
  }
  return weight * grad;
}

double round_robin_weight(std::size_t buyers, std::size_t exploration_periods) {
  if (exploration_periods == 0) throw std::invalid_argument("empty exploration phase");
  return static_cast<double>((buyers + exploration_periods - 1) / exploration_periods);
}

Vector project_scale_params(const Vector& params, double radius) {
  const Vector in_ball = project_to_ball(params, radius);
  const auto d = params.size() - 1;
  if (in_ball[d] >= kMinAlpha) return in_ball;
  Vector out(params.size());
  out.head(d) = project_to_ball(params.head(d), std::sqrt(radius * radius - kMinAlpha * kMinAlpha));
  out[d] = kMinAlpha;
  return out;
}

ScaleFitResult fit_corp2_mle(const std::vector<LikelihoodSample>& samples, const NoiseModel& base,
                             double radius, double alpha_start, double weight,
                             const EstimatorSettings& settings) {
  if (samples.empty()) throw std::invalid_argument("no exploration samples for this buyer");
  if (!(radius > kMinAlpha)) throw std::invalid_argument("parameter radius too small");
  const auto d = samples.front().x.size();
  Vector start = Vector::Zero(d + 1);
  start[d] = alpha_start;
  const double eps = settings.clamp_eps;
  const Solution sol = minimize_projected(
      start, [&](const Vector& p) { return corp2_nll(p, samples, base, weight, eps); },
      [&](const Vector& p) { return corp2_nll_grad(p, samples, base, weight, eps); },
      [&](const Vector& p) { return project_scale_params(p, radius); }, settings);
  return {sol.x.head(d), sol.x[d], sol.value, sol.projected_gradient_norm, sol.iterations,
          sol.converged};
}

double scorp_loss(const Vector& beta, const std::vector<LikelihoodSample>& samples,
                  double valuation_bound, std::size_t buyers) {
  if (samples.empty()) throw std::invalid_argument("no exploration samples");
  const double scale = valuation_bound * static_cast<double>(buyers);
  double acc = 0.0;
  for (const auto& s : samples) {
    const double resid = (s.won ? scale : 0.0) - s.x.dot(beta);
    acc += resid * resid;
  }
  return acc / static_cast<double>(samples.size());
}

FitResult fit_scorp_lse(const std::vector<LikelihoodSample>& samples, double valuation_bound,
                        std::size_t buyers, double preference_bound,
                        const EstimatorSettings& settings) {
  if (samples.empty()) throw std::invalid_argument("no exploration samples");
  const auto d = samples.front().x.size();
  const double scale = valuation_bound * static_cast<double>(buyers);
  const double n = static_cast<double>(samples.size());
  // The loss is the quadratic beta' G beta - 2 c' beta + const.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  Vector cross = Vector::Zero(d);
  for (const auto& s : samples) {
    const double y = s.won ? scale : 0.0;
    gram.noalias() += s.x * s.x.transpose();
    cross += y * s.x;
  }
  gram /= n;
  cross /= n;
  // Ball-constrained least squares: with G = Q diag(l) Q', the minimizer is
  // (G + mu I)^+ c for the smallest mu >= 0 that puts it inside the ball.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Vector lambda = eig.eigenvalues().cwiseMax(0.0);
  const Vector rotated = eig.eigenvectors().transpose() * cross;
  const double cutoff = 1e-12 * std::max(1.0, lambda.maxCoeff());
  auto solve = [&](double mu) {
    Vector y = Vector::Zero(d);
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      const double l = lambda[k] + mu;
      if (l > cutoff) y[k] = rotated[k] / l;
    }
    return y;
  };
  Vector y = solve(0.0);
  int iterations = 0;
  if (y.norm() > preference_bound) {
    // ||y(mu)|| decreases in mu; bracket the root and bisect.
    double lo = 0.0, hi = std::max(1.0, rotated.norm() / preference_bound);
    while (solve(hi).norm() > preference_bound) hi *= 2.0;
    for (; iterations < settings.max_iter; ++iterations) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (solve(mid).norm() > preference_bound ? lo : hi) = mid;
    }
    y = solve(hi);
  }
  const Vector beta = project_to_ball(eig.eigenvectors() * y, preference_bound);
  const Vector grad = 2.0 * (gram * beta - cross);
  const double pg = (project_to_ball(beta - grad, preference_bound) - beta).norm();
  return {beta, scorp_loss(beta, samples, valuation_bound, buyers), pg, iterations, true};
}

}  // namespace reservelab
