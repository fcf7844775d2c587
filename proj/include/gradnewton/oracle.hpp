#pragma once

#include "gradnewton/linalg.hpp"
#include "gradnewton/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace gradnewton {

struct EvalCounters {
  std::uint64_t energy_evals = 0;
  std::uint64_t gradient_evals = 0;
  std::uint64_t hessian_evals = 0;

  friend bool operator==(const EvalCounters&, const EvalCounters&) = default;
};

/// Objective oracle supplying g(u) and H(u), and optionally f(u).
///
/// The public entry points are non-virtual: they validate arguments, bump
/// the matching counter and forward to the eval_* hooks. Every concrete
/// oracle is therefore instrumented, and an energy-free solve can be
/// checked after the fact by looking at counters().energy_evals.
///
/// energy() exists for validation tooling (finite-difference checks,
/// descent audits, the Armijo baseline). The Newton solver never calls it.
class ObjectiveOracle {
 public:
  virtual ~ObjectiveOracle() = default;

  Index dimension() const { return dimension_; }
  bool has_energy() const { return has_energy_; }

  /// Coordinate pinning that makes the Hessian definite. Translation-invariant
  /// oracles override this.
  virtual ConstraintSpec default_constraint() const { return ConstraintSpec::none(); }

  GradientVec gradient(const Point& u) {
    check_point(u);
    ++counters_.gradient_evals;
    GradientVec g = eval_gradient(u);
    if (g.size() != dimension_ || !g.allFinite()) {
      throw DomainError("gradient is not finite at the requested point");
    }
    return g;
  }

  HessianMat hessian(const Point& u) {
    check_point(u);
    ++counters_.hessian_evals;
    HessianMat h = eval_hessian(u);
    if (h.rows() != dimension_ || h.cols() != dimension_ || !h.allFinite()) {
      throw DomainError("Hessian is not finite at the requested point");
    }
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::logic_error("oracle returned a non-symmetric Hessian");
    }
    return h;
  }

  double energy(const Point& u) {
    if (!has_energy_) throw std::logic_error("oracle has no energy");
    check_point(u);
    ++counters_.energy_evals;
    return eval_energy(u);
  }

  const EvalCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

 protected:
  ObjectiveOracle(Index dimension, bool has_energy)
      : dimension_(dimension), has_energy_(has_energy) {
    if (dimension < 1) throw std::invalid_argument("oracle dimension must be positive");
  }

  virtual GradientVec eval_gradient(const Point& u) const = 0;
  virtual HessianMat eval_hessian(const Point& u) const = 0;
  virtual double eval_energy(const Point&) const {
    throw std::logic_error("oracle has no energy");
  }

 private:
  void check_point(const Point& u) const {
    if (u.size() != dimension_) {
      throw std::invalid_argument("point has dimension " + std::to_string(u.size()) +
                                  ", oracle expects " + std::to_string(dimension_));
    }
    if (!u.allFinite()) throw std::invalid_argument("point has non-finite entries");
  }

  Index dimension_;
  bool has_energy_;
  EvalCounters counters_;
};

inline double gradient_norm(const GradientVec& g) {
  if (!g.allFinite()) throw std::invalid_argument("gradient_norm: non-finite entries");
  return g.norm();
}

/// d^T g(u + t d). Costs exactly one gradient evaluation.
inline double directional_gradient(ObjectiveOracle& oracle, const Point& u, const Vector& d, double t) {
  const Point probe = u + t * d;
  return d.dot(oracle.gradient(probe));
}

// Finite-difference validation.

struct FdCheckResult {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Step used by the finite-difference checks.
inline double fd_step(const Point& u) { return 1e-5 * (1.0 + u.norm()); }

/// Central differences of the energy against gradient(u). The error is
/// measured in the max norm relative to max(1, |g|_inf) so points where the
/// gradient vanishes are still meaningful.
inline FdCheckResult check_gradient_fd(ObjectiveOracle& oracle, const Point& u, double tol = 1e-5) {
  const GradientVec g = oracle.gradient(u);
  const double h = fd_step(u);
  Vector fd(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    Point up = u, um = u;
    up(i) += h;
    um(i) -= h;
    fd(i) = (oracle.energy(up) - oracle.energy(um)) / (2.0 * h);
  }
  const double denom = std::max(1.0, g.cwiseAbs().maxCoeff());
  return {(fd - g).cwiseAbs().maxCoeff() / denom, tol};
}

/// Finite-difference Jacobian of the gradient, column by column.
inline Matrix fd_jacobian(ObjectiveOracle& oracle, const Point& u) {
  const double h = fd_step(u);
  const Index n = u.size();
  Matrix j(n, n);
  for (Index c = 0; c < n; ++c) {
    Point up = u, um = u;
    up(c) += h;
    um(c) -= h;
    j.col(c) = (oracle.gradient(up) - oracle.gradient(um)) / (2.0 * h);
  }
  return j;
}

/// Central differences of the gradient against hessian(u).
inline FdCheckResult check_hessian_fd(ObjectiveOracle& oracle, const Point& u, double tol = 1e-4) {
  const HessianMat h = oracle.hessian(u);
  const Matrix j = fd_jacobian(oracle, u);
  const double denom = std::max(1.0, h.cwiseAbs().maxCoeff());
  return {(j - h).cwiseAbs().maxCoeff() / denom, tol};
}

/// Trapezoid approximation of the line integral of g from u to v, i.e.
/// f(v) - f(u) for an exact gradient field. Costs substeps + 1 gradient calls.
inline double gradient_path_integral(ObjectiveOracle& oracle, const Point& u, const Point& v, int substeps = 64) {
  if (substeps < 1) throw std::invalid_argument("gradient_path_integral: substeps must be >= 1");
  const Vector dir = v - u;
  double sum = 0.0;
  for (int i = 0; i <= substeps; ++i) {
    const double s = static_cast<double>(i) / substeps;
    const double w = (i == 0 || i == substeps) ? 0.5 : 1.0;
    sum += w * dir.dot(oracle.gradient(u + s * dir));
  }
  return sum / substeps;
}

}  // namespace gradnewton
