#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace gradnewton {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Point u, gradient g(u) and Hessian H(u) share Eigen storage; the aliases
// name the role at API boundaries.
using Point = Vector;
using GradientVec = Vector;
using HessianMat = Matrix;

enum class Status {
  converged,
  max_iterations,
  line_search_stalled,
  not_positive_definite,
  domain_error,
};

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_iterations: return "max-iterations";
    case Status::line_search_stalled: return "line-search-stalled";
    case Status::not_positive_definite: return "not-positive-definite";
    case Status::domain_error: return "domain-error";
  }
  return "unknown";
}

/// Base for failures that map onto a solve status.
class SolveError : public std::runtime_error {
 public:
  SolveError(Status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  Status status() const noexcept { return status_; }

 private:
  Status status_;
};

/// The oracle cannot be evaluated at the requested point (e.g. a triangle
/// inequality fails, or the point leaves the convex region of the cubic).
class DomainError : public SolveError {
 public:
  explicit DomainError(const std::string& what)
      : SolveError(Status::domain_error, what) {}
};

class NotPositiveDefinite : public SolveError {
 public:
  explicit NotPositiveDefinite(const std::string& what)
      : SolveError(Status::not_positive_definite, what) {}
};

class LineSearchStalled : public SolveError {
 public:
  explicit LineSearchStalled(const std::string& what)
      : SolveError(Status::line_search_stalled, what) {}
};

inline bool all_finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

}  // namespace gradnewton
