#pragma once

#include "gradnewton/linalg.hpp"
#include "gradnewton/oracle.hpp"
#include "gradnewton/types.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gradnewton {

struct SolverConfig {
  double alpha = 0.1;
  double epsilon = 1e-10;
  int max_iterations = 200;
  int max_halvings = 60;
  bool use_first_condition = true;
  /// Unset means "use the oracle's default_constraint()".
  std::optional<ConstraintSpec> constraint;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 1/2)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (max_halvings < 1) throw std::invalid_argument("max_halvings must be >= 1");
  }

  ConstraintSpec constraint_for(const ObjectiveOracle& oracle) const {
    ConstraintSpec c = constraint.value_or(oracle.default_constraint());
    c.validate(oracle.dimension());
    return c;
  }
};

enum class ExitCondition {
  first_condition,  // 1/2 (g~(1/2) + g~(1)) <= alpha g~(0), t = 1
  sign_condition,   // g~(t) <= 0 after at least one halving
  full_step,        // g~(1) <= 0 with the first condition disabled
  armijo,           // baseline: sufficient decrease on f
};

inline std::string_view to_string(ExitCondition e) {
  switch (e) {
    case ExitCondition::first_condition: return "first-condition";
    case ExitCondition::sign_condition: return "sign-condition";
    case ExitCondition::full_step: return "full-step";
    case ExitCondition::armijo: return "armijo";
  }
  return "unknown";
}

inline std::optional<ExitCondition> parse_exit_condition(std::string_view s) {
  for (auto e : {ExitCondition::first_condition, ExitCondition::sign_condition,
                 ExitCondition::full_step, ExitCondition::armijo}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

struct IterationRecord {
  std::size_t k = 0;
  double grad_norm = 0.0;
  double newton_decrement_sq = 0.0;
  double step = 1.0;
  int halvings = 0;
  ExitCondition exit_condition = ExitCondition::first_condition;
  /// Filled post hoc by the descent auditor; the solve itself never sets it.
  std::optional<double> energy;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct SolveResult {
  Point final_point;
  Status status = Status::converged;
  std::vector<IterationRecord> trace;
  /// Oracle calls made during this solve.
  EvalCounters counters;
  /// u_0, u_1, ..., final_point. trace[k] describes the step iterates[k] -> iterates[k+1].
  std::vector<Point> iterates;
  double final_grad_norm = 0.0;
  ConstraintSpec constraint = ConstraintSpec::none();
  /// Iteration at which a failure status was raised.
  std::optional<std::size_t> failed_iteration;
  std::string message;

  bool converged() const { return status == Status::converged; }
};

/// lambda^2 = -d^T g. Round-off negatives are clamped to zero; anything
/// clearly negative means d is not a descent direction.
inline double newton_decrement_sq(const Vector& d, const GradientVec& g) {
  const double v = -d.dot(g);
  if (v < -1e-8) {
    throw NotPositiveDefinite("Newton direction is not a descent direction (d^T g = " +
                              std::to_string(-v) + ")");
  }
  return v < 0.0 ? 0.0 : v;
}

struct LineSearchResult {
  double step = 1.0;
  int halvings = 0;
  ExitCondition exit_condition = ExitCondition::first_condition;
};

/// Energy-free backtracking along d from u, given g = g(u).
///
/// With the first condition enabled, g~(1/2) and g~(1) are evaluated; t = 1
/// is returned if their mean is at most alpha g~(0). Otherwise the sign test
/// g~(t) <= 0 runs over t = 1/2, 1/4, ..., reusing g~(1/2). With the first
/// condition disabled the sign test starts at t = 1.
inline LineSearchResult line_search(ObjectiveOracle& oracle, const Point& u, const Vector& d,
                                    const GradientVec& g, const SolverConfig& cfg) {
  const double slope0 = d.dot(g);
  if (!(slope0 < 0.0)) throw std::invalid_argument("line_search: d is not a descent direction");

  double t = 1.0;
  int halvings = 0;
  double probe = 0.0;
  if (cfg.use_first_condition) {
    const double g_half = directional_gradient(oracle, u, d, 0.5);
    const double g_one = directional_gradient(oracle, u, d, 1.0);
    if (0.5 * (g_half + g_one) <= cfg.alpha * slope0) {
      return {1.0, 0, ExitCondition::first_condition};
    }
    t = 0.5;
    halvings = 1;
    probe = g_half;
  } else {
    probe = directional_gradient(oracle, u, d, 1.0);
  }

  while (true) {
    if (probe <= 0.0) {
      return {t, halvings, halvings == 0 ? ExitCondition::full_step : ExitCondition::sign_condition};
    }
    if (halvings >= cfg.max_halvings) {
      throw LineSearchStalled("no step with d^T g(u + t d) <= 0 after " +
                              std::to_string(halvings) + " halvings");
    }
    t *= 0.5;
    ++halvings;
    probe = directional_gradient(oracle, u, d, t);
  }
}

/// Classical Armijo backtracking: largest t in {1, 1/2, ...} with
/// f(u + t d) <= f(u) + alpha t d^T g(u). Evaluates the energy.
inline LineSearchResult armijo_line_search(ObjectiveOracle& oracle, const Point& u, const Vector& d,
                                           const GradientVec& g, const SolverConfig& cfg) {
  const double slope0 = d.dot(g);
  if (!(slope0 < 0.0)) throw std::invalid_argument("armijo_line_search: d is not a descent direction");
  const double f0 = oracle.energy(u);
  double t = 1.0;
  for (int halvings = 0;; ++halvings) {
    if (oracle.energy(u + t * d) <= f0 + cfg.alpha * t * slope0) {
      return {t, halvings, ExitCondition::armijo};
    }
    if (halvings >= cfg.max_halvings) {
      throw LineSearchStalled("Armijo condition not met after " + std::to_string(halvings) +
                              " halvings");
    }
    t *= 0.5;
  }
}

namespace detail {

inline EvalCounters counter_delta(const EvalCounters& after, const EvalCounters& before) {
  return {after.energy_evals - before.energy_evals, after.gradient_evals - before.gradient_evals,
          after.hessian_evals - before.hessian_evals};
}

template <typename LineSearch>
SolveResult newton_loop(ObjectiveOracle& oracle, const Point& u0, const SolverConfig& cfg,
                        LineSearch&& search) {
  cfg.validate();
  SolveResult result;
  result.constraint = cfg.constraint_for(oracle);
  if (u0.size() != oracle.dimension()) {
    throw std::invalid_argument("starting point has the wrong dimension");
  }
  const EvalCounters start = oracle.counters();

  Point u = u0;
  result.iterates.push_back(u);
  std::size_t k = 0;
  try {
    for (;; ++k) {
      // One gradient evaluation per iteration: it serves both the loop guard
      // and the Newton system.
      const GradientVec g = oracle.gradient(u);
      const double gnorm = gradient_norm(g);
      result.final_grad_norm = gnorm;
      if (gnorm <= cfg.epsilon) {
        result.status = Status::converged;
        break;
      }
      if (k >= static_cast<std::size_t>(cfg.max_iterations)) {
        result.status = Status::max_iterations;
        result.failed_iteration = k;
        result.message = "iteration limit reached";
        break;
      }
      const HessianMat h = oracle.hessian(u);
      const Vector d = newton_direction(h, g, result.constraint);
      const double lambda_sq = newton_decrement_sq(d, g);
      if (!(lambda_sq > 0.0)) {
        // Gradient lies entirely in the pinned coordinate, e.g. infeasible
        // curvature targets.
        throw LineSearchStalled("zero Newton decrement with |g| above tolerance");
      }
      const LineSearchResult ls = search(oracle, u, d, g, cfg);

      IterationRecord rec;
      rec.k = k;
      rec.grad_norm = gnorm;
      rec.newton_decrement_sq = lambda_sq;
      rec.step = ls.step;
      rec.halvings = ls.halvings;
      rec.exit_condition = ls.exit_condition;
      result.trace.push_back(rec);

      u += ls.step * d;
      result.iterates.push_back(u);
    }
  } catch (const SolveError& e) {
    result.status = e.status();
    result.failed_iteration = k;
    result.message = e.what();
  }

  result.final_point = u;
  result.counters = counter_delta(oracle.counters(), start);
  return result;
}

}  // namespace detail

/// Newton minimization with the energy-free line search. Never calls
/// oracle.energy().
inline SolveResult solve(ObjectiveOracle& oracle, const Point& u0, const SolverConfig& cfg = {}) {
  return detail::newton_loop(oracle, u0, cfg, line_search);
}

/// Same Newton outer loop with Armijo backtracking on f. Requires energy.
inline SolveResult solve_armijo_baseline(ObjectiveOracle& oracle, const Point& u0,
                                         const SolverConfig& cfg = {}) {
  if (!oracle.has_energy()) throw std::invalid_argument("Armijo baseline requires an oracle with energy");
  return detail::newton_loop(oracle, u0, cfg, armijo_line_search);
}

enum class Variant { energy_free, energy_free_no_first_condition, armijo };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::energy_free: return "energy-free";
    case Variant::energy_free_no_first_condition: return "energy-free-no-first-cond";
    case Variant::armijo: return "armijo";
  }
  return "unknown";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : {Variant::energy_free, Variant::energy_free_no_first_condition, Variant::armijo}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

/// Solver settings as the given variant runs them.
inline SolverConfig config_for(SolverConfig cfg, Variant v) {
  if (v == Variant::energy_free) cfg.use_first_condition = true;
  if (v == Variant::energy_free_no_first_condition) cfg.use_first_condition = false;
  return cfg;
}

inline SolveResult run_variant(ObjectiveOracle& oracle, const Point& u0, const SolverConfig& cfg, Variant v) {
  if (v == Variant::armijo) return solve_armijo_baseline(oracle, u0, cfg);
  return solve(oracle, u0, config_for(cfg, v));
}

}  // namespace gradnewton
