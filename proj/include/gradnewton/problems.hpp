#pragma once

#include "gradnewton/linalg.hpp"
#include "gradnewton/oracle.hpp"

#include <cmath>
#include <sstream>

namespace gradnewton {

/// f(u) = 1/2 u^T A u - b^T u with A symmetric positive definite.
class QuadraticProblem final : public ObjectiveOracle {
 public:
  QuadraticProblem(Matrix a, Vector b) : ObjectiveOracle(a.rows(), true), a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols() || a_.rows() != b_.size()) {
      throw std::invalid_argument("QuadraticProblem: A must be n x n and b of length n");
    }
    if (!a_.allFinite() || !b_.allFinite()) throw std::invalid_argument("QuadraticProblem: non-finite data");
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a_.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("QuadraticProblem: A is not symmetric");
    }
    try {
      SpdFactorization check(a_);
      minimizer_ = check.solve(b_);
    } catch (const NotPositiveDefinite&) {
      throw std::invalid_argument("QuadraticProblem: A is not positive definite");
    }
  }

  const Matrix& matrix() const { return a_; }
  const Vector& rhs() const { return b_; }
  const Vector& minimizer() const { return minimizer_; }

 protected:
  GradientVec eval_gradient(const Point& u) const override { return a_ * u - b_; }
  HessianMat eval_hessian(const Point&) const override { return a_; }
  double eval_energy(const Point& u) const override { return 0.5 * u.dot(a_ * u) - b_.dot(u); }

 private:
  Matrix a_;
  Vector b_;
  Vector minimizer_;
};

/// f(u) = log sum_i exp(a_i^T u + c_i), evaluated with max-shifted
/// exponentials. Rows are the a_i.
class LogSumExpProblem final : public ObjectiveOracle {
 public:
  LogSumExpProblem(Matrix rows, Vector offsets)
      : ObjectiveOracle(rows.cols(), true), rows_(std::move(rows)), offsets_(std::move(offsets)) {
    if (rows_.rows() < 1) throw std::invalid_argument("LogSumExpProblem: need at least one row");
    if (rows_.rows() != offsets_.size()) throw std::invalid_argument("LogSumExpProblem: offsets/rows mismatch");
    if (!rows_.allFinite() || !offsets_.allFinite()) throw std::invalid_argument("LogSumExpProblem: non-finite data");
  }

  const Matrix& rows() const { return rows_; }
  const Vector& offsets() const { return offsets_; }

 protected:
  GradientVec eval_gradient(const Point& u) const override { return rows_.transpose() * weights(u); }

  HessianMat eval_hessian(const Point& u) const override {
    const Vector p = weights(u);
    const Vector mean = rows_.transpose() * p;
    Matrix h = rows_.transpose() * p.asDiagonal() * rows_;
    h -= mean * mean.transpose();
    // Products above are symmetric only up to round-off.
    return 0.5 * (h + h.transpose());
  }

  double eval_energy(const Point& u) const override {
    const Vector z = rows_ * u + offsets_;
    const double zmax = z.maxCoeff();
    return zmax + std::log((z.array() - zmax).exp().sum());
  }

 private:
  // Softmax weights p_i.
  Vector weights(const Point& u) const {
    const Vector z = rows_ * u + offsets_;
    const double zmax = z.maxCoeff();
    Vector p = (z.array() - zmax).exp().matrix();
    return p / p.sum();
  }

  Matrix rows_;
  Vector offsets_;
};

/// f(x) = x^2 + eps x^3 in one variable. Convex only for x > -1/(3 eps);
/// evaluation outside that region raises DomainError.
class CubicCounterexample final : public ObjectiveOracle {
 public:
  explicit CubicCounterexample(double eps) : ObjectiveOracle(1, true), eps_(eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("CubicCounterexample: eps must be > 0");
  }

  double eps() const { return eps_; }
  /// Left end of the convex region; points at or below it are rejected.
  double domain_lower_bound() const { return -1.0 / (3.0 * eps_); }

 protected:
  GradientVec eval_gradient(const Point& u) const override {
    const double x = guarded(u);
    return Vector::Constant(1, 2.0 * x + 3.0 * eps_ * x * x);
  }
  HessianMat eval_hessian(const Point& u) const override {
    const double x = guarded(u);
    return Matrix::Constant(1, 1, 2.0 + 6.0 * eps_ * x);
  }
  double eval_energy(const Point& u) const override {
    const double x = guarded(u);
    return x * x + eps_ * x * x * x;
  }

 private:
  double guarded(const Point& u) const {
    const double x = u(0);
    if (x <= domain_lower_bound()) {
      std::ostringstream os;
      os << "cubic: x = " << x << " outside the convex region x > " << domain_lower_bound();
      throw DomainError(os.str());
    }
    return x;
  }

  double eps_;
};

inline QuadraticProblem make_quadratic(Matrix a, Vector b) { return QuadraticProblem(std::move(a), std::move(b)); }

inline LogSumExpProblem make_logsumexp(Matrix rows, Vector offsets) {
  return LogSumExpProblem(std::move(rows), std::move(offsets));
}

inline CubicCounterexample make_cubic(double eps) { return CubicCounterexample(eps); }

/// The standard log-sum-exp fixture: rows +-e_i, plus one skewed row
/// 0.5 * (1, 2, ..., n) / n, with small deterministic offsets. The rows
/// surround the origin, so sublevel sets are bounded.
inline LogSumExpProblem make_logsumexp_standard(Index n) {
  if (n < 1) throw std::invalid_argument("make_logsumexp_standard: n must be positive");
  Matrix rows = Matrix::Zero(2 * n + 1, n);
  Vector offsets(2 * n + 1);
  for (Index i = 0; i < n; ++i) {
    rows(2 * i, i) = 1.0;
    rows(2 * i + 1, i) = -1.0;
    offsets(2 * i) = 0.1 * std::sin(static_cast<double>(i + 1));
    offsets(2 * i + 1) = 0.1 * std::cos(static_cast<double>(i + 1));
  }
  for (Index j = 0; j < n; ++j) rows(2 * n, j) = 0.5 * static_cast<double>(j + 1) / static_cast<double>(n);
  offsets(2 * n) = 0.3;
  return LogSumExpProblem(std::move(rows), std::move(offsets));
}

}  // namespace gradnewton
