#pragma once

#include "gradnewton/linalg.hpp"
#include "gradnewton/oracle.hpp"
#include "gradnewton/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace gradnewton {

/// Guaranteed per-iteration decrease of f while |g| >= eta:
/// eta^2 min(m / (4 M^2), alpha / M).
inline double gamma_bound(double eta, double m, double big_m, double alpha) {
  if (!(m > 0.0 && m <= big_m)) throw std::invalid_argument("gamma_bound: need 0 < m <= M");
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("gamma_bound: need 0 < alpha < 1/2");
  if (!(eta >= 0.0)) throw std::invalid_argument("gamma_bound: eta must be non-negative");
  return eta * eta * std::min(m / (4.0 * big_m * big_m), alpha / big_m);
}

/// Gradient-norm level below which the first line-search condition is
/// guaranteed to accept t = 1: (1/2 - alpha) 8 m^2 / (5 L). Infinite for
/// L = 0 (constant Hessian).
inline double eta_threshold(double m, double lipschitz, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("eta_threshold: need 0 < alpha < 1/2");
  if (!(m > 0.0)) throw std::invalid_argument("eta_threshold: m must be positive");
  if (!(lipschitz >= 0.0)) throw std::invalid_argument("eta_threshold: L must be non-negative");
  if (lipschitz == 0.0) return std::numeric_limits<double>::infinity();
  return (0.5 - alpha) * 8.0 * m * m / (5.0 * lipschitz);
}

/// Empirical constants over the visited points. L is a difference-quotient
/// estimate and therefore a lower bound on the true Lipschitz constant.
struct BoundEstimates {
  double m = 0.0;
  double M = 0.0;
  double L = 0.0;
};

inline BoundEstimates estimate_bounds(ObjectiveOracle& oracle, const std::vector<Point>& points,
                                      const ConstraintSpec& constraint) {
  if (points.empty()) throw std::invalid_argument("estimate_bounds: need at least one point");
  BoundEstimates b;
  b.m = std::numeric_limits<double>::infinity();
  b.M = -std::numeric_limits<double>::infinity();
  Matrix prev;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Matrix h = reduce_matrix(oracle.hessian(points[i]), constraint);
    const EigenBounds eb = eigen_bounds(h, ConstraintSpec::none());
    b.m = std::min(b.m, eb.min);
    b.M = std::max(b.M, eb.max);
    if (i > 0) {
      const double dist = (points[i] - points[i - 1]).norm();
      if (dist > 0.0) b.L = std::max(b.L, symmetric_spectral_norm(h - prev) / dist);
    }
    prev = h;
  }
  if (!(b.m > 0.0)) {
    throw NotPositiveDefinite("estimate_bounds: Hessian not positive definite along the trajectory");
  }
  return b;
}

inline BoundEstimates estimate_bounds(ObjectiveOracle& oracle, const SolveResult& result) {
  return estimate_bounds(oracle, result.iterates, result.constraint);
}

/// Per-step decrease f(u_k) - f(u_{k+1}) measured after the solve.
struct DescentAudit {
  std::vector<double> decrease;
  /// Round-off floor per step: nonzero only when the decrease is a
  /// difference of two energy values.
  std::vector<double> noise_floor;
  bool from_energy = false;

  bool monotone() const {
    for (std::size_t k = 0; k < decrease.size(); ++k) {
      if (!(decrease[k] + noise_floor[k] > 0.0)) return false;
    }
    return true;
  }
};

/// Measures every step's decrease. Uses the energy when the oracle has one
/// (and records it in the trace), otherwise the trapezoid path integral of
/// the gradient with `substeps` sub-intervals.
inline DescentAudit audit_descent(ObjectiveOracle& oracle, SolveResult& result, int substeps = 64) {
  DescentAudit audit;
  const std::size_t steps = result.trace.size();
  audit.from_energy = oracle.has_energy();
  if (audit.from_energy) {
    std::vector<double> f(result.iterates.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = oracle.energy(result.iterates[i]);
    for (std::size_t k = 0; k < steps; ++k) {
      result.trace[k].energy = f[k];
      audit.decrease.push_back(f[k] - f[k + 1]);
      audit.noise_floor.push_back(4.0 * std::numeric_limits<double>::epsilon() *
                                  (std::abs(f[k]) + std::abs(f[k + 1])));
    }
  } else {
    for (std::size_t k = 0; k < steps; ++k) {
      audit.decrease.push_back(-gradient_path_integral(oracle, result.iterates[k], result.iterates[k + 1], substeps));
      audit.noise_floor.push_back(0.0);
    }
  }
  return audit;
}

struct DecreaseViolation {
  std::size_t k = 0;
  double decrease = 0.0;
  double bound = 0.0;
};

struct ConvergenceReport {
  std::size_t iterations = 0;
  std::size_t damped_iterations = 0;
  /// First iteration after which every step is t = 1 with |g| decreasing.
  std::optional<std::size_t> k0;
  /// Fit of log|g_{k+1}| = log C + p log|g_k| over the post-k0 tail.
  bool quadratic_fit_sufficient = false;
  std::optional<double> C;         // slope fixed at 2
  std::optional<double> exponent;  // free slope p
  std::optional<double> C_free;    // intercept of the free fit
  /// Mean ratio |g_{k+1}| / |g_k| over the last few steps.
  std::optional<double> linear_rate;
  double eta_threshold = 0.0;
  std::vector<DecreaseViolation> violations;
  /// Iterations with |g_k| <= eta_threshold / 2 whose step was not 1.
  std::vector<std::size_t> full_step_violations;
};

struct ClassifyOptions {
  /// Decrease must reach (1 - slack) * gamma.
  double decrease_slack = 0.1;
  /// Full-step check runs below threshold_scale * eta_threshold.
  double threshold_scale = 0.5;
  std::size_t min_fit_iterations = 3;
  /// Successor norms below the round-off floor are left out of the rate
  /// fit. The floor is noise_multiplier * gradient_noise when a measured
  /// noise level is given, otherwise noise_floor * max(1, |g_0|).
  double noise_floor = 1e-12;
  std::optional<double> gradient_noise;
  double noise_multiplier = 10.0;
  std::size_t rate_window = 5;
};

/// Round-off level of the gradient near u: the largest change in g under a
/// few sign patterns of perturbations of 4 ulp-scale in the free coordinates.
inline double estimate_gradient_noise(ObjectiveOracle& oracle, const Point& u, const ConstraintSpec& constraint,
                                      int samples = 8) {
  const double eps = std::numeric_limits<double>::epsilon();
  const GradientVec g0 = oracle.gradient(u);
  std::uint64_t bits = 0x9e3779b97f4a7c15ull;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Point v = u;
    for (Index i = 0; i < u.size(); ++i) {
      if (constraint.pinned_index && *constraint.pinned_index == i) continue;
      bits ^= bits << 13;
      bits ^= bits >> 7;
      bits ^= bits << 17;
      v(i) += ((bits & 1) ? 4.0 : -4.0) * eps * std::max(1.0, std::abs(u(i)));
    }
    worst = std::max(worst, (oracle.gradient(v) - g0).norm());
  }
  return worst;
}

inline double estimate_gradient_noise(ObjectiveOracle& oracle, const SolveResult& result) {
  return estimate_gradient_noise(oracle, result.final_point, result.constraint);
}

/// Gradient norms |g_0|, ..., |g_K| including the final point.
inline std::vector<double> gradient_norm_sequence(const SolveResult& result) {
  std::vector<double> g;
  g.reserve(result.trace.size() + 1);
  for (const auto& rec : result.trace) g.push_back(rec.grad_norm);
  g.push_back(result.final_grad_norm);
  return g;
}

inline ConvergenceReport classify_convergence(const SolveResult& result, const BoundEstimates& bounds,
                                              const SolverConfig& cfg, const DescentAudit* audit = nullptr,
                                              const ClassifyOptions& opt = {}) {
  ConvergenceReport r;
  const auto& trace = result.trace;
  const std::size_t n = trace.size();
  const std::vector<double> g = gradient_norm_sequence(result);
  r.iterations = n;

  // Onset: scan back while steps are full and |g| strictly decreases.
  std::size_t onset = n;
  while (onset > 0 && trace[onset - 1].step == 1.0 && g[onset] < g[onset - 1]) --onset;
  if (onset < n || n == 0) r.k0 = onset;
  r.damped_iterations = r.k0 ? *r.k0 : n;

  if (r.k0 && n - *r.k0 >= opt.min_fit_iterations) {
    const double floor = opt.gradient_noise ? opt.noise_multiplier * *opt.gradient_noise
                                            : opt.noise_floor * std::max(1.0, g[0]);
    std::vector<double> x, y;
    for (std::size_t k = *r.k0; k < n; ++k) {
      if (g[k] > floor && g[k + 1] > floor) {
        x.push_back(std::log(g[k]));
        y.push_back(std::log(g[k + 1]));
      }
    }
    if (x.size() >= opt.min_fit_iterations) {
      const double cnt = static_cast<double>(x.size());
      double mx = 0, my = 0, fixed = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
        fixed += y[i] - 2.0 * x[i];
      }
      mx /= cnt;
      my /= cnt;
      double sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
      }
      r.C = std::exp(fixed / cnt);
      if (sxx > 0.0) {
        r.exponent = sxy / sxx;
        r.C_free = std::exp(my - *r.exponent * mx);
      }
      r.quadratic_fit_sufficient = r.exponent.has_value();
    }
  }

  if (n >= 1) {
    const std::size_t w = std::min(opt.rate_window, n);
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = n - w; k < n; ++k) {
      if (g[k] > 0.0) {
        sum += g[k + 1] / g[k];
        ++cnt;
      }
    }
    if (cnt > 0) r.linear_rate = sum / static_cast<double>(cnt);
  }

  if (audit != nullptr) {
    for (std::size_t k = 0; k < n && k < audit->decrease.size(); ++k) {
      const double bound = gamma_bound(g[k], bounds.m, bounds.M, cfg.alpha);
      if (audit->decrease[k] + audit->noise_floor[k] < (1.0 - opt.decrease_slack) * bound) {
        r.violations.push_back({k, audit->decrease[k], bound});
      }
    }
  }

  r.eta_threshold = eta_threshold(bounds.m, bounds.L, cfg.alpha);
  if (cfg.use_first_condition) {
    const double level = opt.threshold_scale * r.eta_threshold;
    for (std::size_t k = 0; k < n; ++k) {
      if (g[k] <= level && trace[k].step != 1.0) r.full_step_violations.push_back(k);
    }
  }
  return r;
}

}  // namespace gradnewton
