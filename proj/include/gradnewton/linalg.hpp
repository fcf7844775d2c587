#pragma once

#include "gradnewton/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <optional>
#include <string>

namespace gradnewton {

/// The subspace W on which the Hessian is definite. Pinning a coordinate
/// to zero removes the constant-vector nullspace of translation-invariant
/// energies such as the conformal one.
struct ConstraintSpec {
  std::optional<Index> pinned_index = 0;

  static ConstraintSpec none() { return ConstraintSpec{std::nullopt}; }
  static ConstraintSpec pin(Index i) { return ConstraintSpec{i}; }

  bool pinned() const { return pinned_index.has_value(); }

  void validate(Index n) const {
    if (pinned_index && (*pinned_index < 0 || *pinned_index >= n)) {
      throw std::invalid_argument("pinned index " + std::to_string(*pinned_index) +
                                  " out of range for dimension " + std::to_string(n));
    }
  }

  Index reduced_dimension(Index n) const { return pinned() ? n - 1 : n; }

  friend bool operator==(const ConstraintSpec&, const ConstraintSpec&) = default;
};

/// Drops the pinned entry.
inline Vector reduce_vector(const Eigen::Ref<const Vector>& v, const ConstraintSpec& c) {
  c.validate(v.size());
  if (!c.pinned()) return v;
  const Index p = *c.pinned_index;
  const Index n = v.size();
  Vector out(n - 1);
  out.head(p) = v.head(p);
  out.tail(n - 1 - p) = v.tail(n - 1 - p);
  return out;
}

/// Drops the pinned row and column.
inline Matrix reduce_matrix(const Eigen::Ref<const Matrix>& a, const ConstraintSpec& c) {
  c.validate(a.rows());
  if (!c.pinned()) return a;
  const Index p = *c.pinned_index;
  const Index n = a.rows();
  const Index q = n - 1 - p;
  Matrix out(n - 1, n - 1);
  out.topLeftCorner(p, p) = a.topLeftCorner(p, p);
  out.topRightCorner(p, q) = a.topRightCorner(p, q);
  out.bottomLeftCorner(q, p) = a.bottomLeftCorner(q, p);
  out.bottomRightCorner(q, q) = a.bottomRightCorner(q, q);
  return out;
}

/// Inverse of reduce_vector: re-inserts 0 at the pinned coordinate.
inline Vector expand_vector(const Eigen::Ref<const Vector>& r, Index n, const ConstraintSpec& c) {
  c.validate(n);
  if (!c.pinned()) {
    if (r.size() != n) throw std::invalid_argument("expand_vector: size mismatch");
    return r;
  }
  if (r.size() != n - 1) throw std::invalid_argument("expand_vector: size mismatch");
  const Index p = *c.pinned_index;
  Vector out(n);
  out.head(p) = r.head(p);
  out(p) = 0.0;
  out.tail(n - 1 - p) = r.tail(n - 1 - p);
  return out;
}

struct ReducedSystem {
  Matrix hessian;
  Vector gradient;
};

inline ReducedSystem reduce(const HessianMat& h, const GradientVec& g, const ConstraintSpec& c) {
  if (h.rows() != h.cols() || h.rows() != g.size()) {
    throw std::invalid_argument("reduce: Hessian/gradient dimension mismatch");
  }
  return {reduce_matrix(h, c), reduce_vector(g, c)};
}

/// Cholesky factor of a symmetric matrix; construction fails unless the
/// matrix is positive definite to working precision.
class SpdFactorization {
 public:
  explicit SpdFactorization(const Matrix& a) : llt_(a) {
    if (llt_.info() != Eigen::Success) {
      throw NotPositiveDefinite("Cholesky factorization failed: matrix is not positive definite");
    }
    // LLT accepts tiny positive pivots produced by round-off on a singular matrix.
    const auto diag = llt_.matrixLLT().diagonal();
    const double scale = a.diagonal().cwiseAbs().maxCoeff();
    if (diag.size() > 0 && !(diag.cwiseAbs2().minCoeff() > 1e-14 * scale)) {
      throw NotPositiveDefinite("Cholesky factorization failed: matrix is numerically singular");
    }
  }

  Vector solve(const Eigen::Ref<const Vector>& b) const { return llt_.solve(b); }
  Index size() const { return llt_.rows(); }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// Newton direction d = -H^{-1} g on the constraint subspace; the pinned
/// coordinate of d is exactly zero.
inline Vector newton_direction(const HessianMat& h, const GradientVec& g, const ConstraintSpec& c) {
  const ReducedSystem r = reduce(h, g, c);
  if (r.gradient.size() == 0) return Vector::Zero(g.size());
  const SpdFactorization factor(r.hessian);
  Vector d = factor.solve(-r.gradient);
  // One refinement step keeps the residual near machine precision on
  // moderately conditioned systems.
  const Vector residual = r.hessian * d + r.gradient;
  d -= factor.solve(residual);
  return expand_vector(d, g.size(), c);
}

struct EigenBounds {
  double min = 0.0;
  double max = 0.0;
};

/// Smallest and largest eigenvalue of the reduced symmetric matrix. For a
/// symmetric positive definite Hessian these coincide with the extreme
/// singular values.
inline EigenBounds eigen_bounds(const HessianMat& h, const ConstraintSpec& c) {
  const Matrix r = reduce_matrix(h, c);
  if (r.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Matrix> es(r, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigen_bounds: eigensolver failed");
  const auto& ev = es.eigenvalues();  // ascending
  return {ev(0), ev(ev.size() - 1)};
}

/// Spectral norm of a symmetric matrix.
inline double symmetric_spectral_norm(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace gradnewton
