#pragma once

#include "gradnewton/conformal.hpp"
#include "gradnewton/problems.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gradnewton {

/// A named, deterministic test problem with a default start and a seeded
/// generator of further starting points.
struct Fixture {
  std::string name;
  std::function<std::unique_ptr<ObjectiveOracle>()> make;
  Point default_start;
  std::function<Point(std::mt19937_64&)> sample_start;
};

namespace detail {

inline std::function<Point(std::mt19937_64&)> box_sampler(Index n, double lo, double hi) {
  return [n, lo, hi](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Point u(n);
    for (Index i = 0; i < n; ++i) u(i) = dist(rng);
    return u;
  };
}

inline Matrix random_spd(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix q(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) q(i, j) = dist(rng);
  Matrix a = q.transpose() * q + 0.5 * Matrix::Identity(n, n);
  return 0.5 * (a + a.transpose());
}

inline Fixture conformal_fixture(const std::string& name, TriangleMesh mesh, std::uint64_t seed, double magnitude) {
  auto shared = std::make_shared<const TriangleMesh>(std::move(mesh));
  Vector targets = perturbed_targets(*shared, seed, magnitude);
  const Index n = shared->num_vertices;
  return {name, [shared, targets] { return std::make_unique<ConformalOracle>(shared, targets); }, Point::Zero(n),
          box_sampler(n, -0.1, 0.1)};
}

}  // namespace detail

/// Fixture names understood by make_fixture. "cubic-<eps>" accepts any
/// positive eps.
inline std::vector<std::string> fixture_names() {
  return {"quadratic-diag", "quadratic-spd",  "logsumexp-std", "logsumexp-2d",
          "cubic-0.1",      "conformal-tet",  "conformal-ico"};
}

/// Builds a fixture by name. `seed` drives the seeded fixtures (random SPD
/// matrix, perturbed curvature targets).
inline std::optional<Fixture> make_fixture(const std::string& name, std::uint64_t seed = 1) {
  if (name == "quadratic-diag") {
    const Matrix a = Eigen::Vector2d(1.0, 4.0).asDiagonal();
    return Fixture{name, [a] { return std::make_unique<QuadraticProblem>(a, Vector::Zero(2)); },
                   Point::Ones(2), detail::box_sampler(2, -5.0, 5.0)};
  }
  if (name == "quadratic-spd") {
    const Index n = 6;
    Matrix a = detail::random_spd(n, seed);
    Vector b = Vector::LinSpaced(n, -1.0, 1.0);
    return Fixture{name, [a, b] { return std::make_unique<QuadraticProblem>(a, b); }, Point::Ones(n),
                   detail::box_sampler(n, -5.0, 5.0)};
  }
  if (name == "logsumexp-std") {
    const Index n = 10;
    return Fixture{name, [n] { return std::make_unique<LogSumExpProblem>(make_logsumexp_standard(n)); },
                   Point::Ones(n), detail::box_sampler(n, -2.0, 2.0)};
  }
  if (name == "logsumexp-2d") {
    Matrix rows(4, 2);
    rows << 1.0, 0.5, -1.0, 0.2, 0.3, -1.0, -0.2, 1.2;
    Vector offsets(4);
    offsets << 0.0, 0.3, -0.2, 0.1;
    return Fixture{name, [rows, offsets] { return std::make_unique<LogSumExpProblem>(rows, offsets); },
                   Point::Ones(2), detail::box_sampler(2, -2.0, 2.0)};
  }
  if (name.rfind("cubic-", 0) == 0) {
    double eps = 0.0;
    try {
      std::size_t used = 0;
      eps = std::stod(name.substr(6), &used);
      if (used != name.size() - 6) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (!(eps > 0.0)) return std::nullopt;
    return Fixture{name, [eps] { return std::make_unique<CubicCounterexample>(eps); }, Point::Constant(1, -0.5),
                   detail::box_sampler(1, -0.5, 0.5)};
  }
  if (name == "conformal-tet") return detail::conformal_fixture(name, make_tetrahedron(), seed, 0.2);
  if (name == "conformal-ico") return detail::conformal_fixture(name, make_icosahedron(), seed, 0.2);
  return std::nullopt;
}

}  // namespace gradnewton
