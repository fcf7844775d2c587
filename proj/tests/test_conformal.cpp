#include "gradnewton/conformal.hpp"
#include "gradnewton/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace gradnewton;

namespace {

constexpr double kPi = std::numbers::pi;

std::string data(const std::string& name) { return std::string(GRADNEWTON_DATA_DIR) + "/" + name; }
std::string test_data(const std::string& name) { return std::string(GRADNEWTON_TEST_DATA_DIR) + "/" + name; }

// Two triangles glued along all three edges: the smallest closed mesh.
TriangleMesh pillow(double a, double b, double c) {
  return mesh_from_face_lengths(3, {{0, 1, 2}, {0, 2, 1}}, {{a, b, c}, {c, b, a}});
}

Vector random_u(Index n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Vector u(n);
  for (Index i = 0; i < n; ++i) u(i) = dist(rng);
  return u;
}

}  // namespace

TEST(LoadObj, Tetrahedron) {
  const TriangleMesh m = load_obj(data("tet.obj"));
  EXPECT_EQ(m.num_vertices, 4);
  EXPECT_EQ(m.num_edges(), 6);
  EXPECT_EQ(m.num_faces(), 4);
  EXPECT_EQ(m.euler_characteristic, 2);
  for (Index e = 0; e < m.num_edges(); ++e) EXPECT_NEAR(m.edge_lengths(e), std::sqrt(8.0), 1e-15);
}

TEST(LoadObj, Icosahedron) {
  const TriangleMesh m = load_obj(data("icosahedron.obj"));
  EXPECT_EQ(m.num_vertices, 12);
  EXPECT_EQ(m.num_edges(), 30);
  EXPECT_EQ(m.num_faces(), 20);
  EXPECT_EQ(m.euler_characteristic, 2);
}

TEST(LoadObj, RejectsQuads) {
  try {
    load_obj(test_data("tet_quad.obj"));
    FAIL() << "quad accepted";
  } catch (const MeshFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("triangular"), std::string::npos);
  }
}

TEST(LoadObj, RejectsOpenAndBrokenInput) {
  std::istringstream open("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  EXPECT_THROW(parse_obj(open), MeshFormatError);
  std::istringstream bad_index("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n");
  EXPECT_THROW(parse_obj(bad_index), MeshFormatError);
  std::istringstream missing("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
  EXPECT_THROW(parse_obj(missing), MeshFormatError);
  // Three coincident-edge triangles around one edge: non-manifold.
  std::istringstream nonmanifold(
      "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nv 1 1 1\n"
      "f 1 2 3\nf 1 2 4\nf 1 2 5\nf 1 3 4\nf 2 3 4\n");
  EXPECT_THROW(parse_obj(nonmanifold), MeshFormatError);
  EXPECT_THROW(load_obj(data("does-not-exist.obj")), MeshFormatError);
}

TEST(LoadObj, AcceptsSlashFormsAndComments) {
  std::istringstream in(
      "# comment\nvn 0 0 1\nv 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\n"
      "f 1/1/1 2/2/2 3/3/3\nf 1//1 4//1 2//1\nf -4 -2 -1\nf 2 4 3\n");
  const TriangleMesh m = parse_obj(in);
  EXPECT_EQ(m.euler_characteristic, 2);
}

TEST(LenMesh, ParsesAndMatchesEmbedding) {
  const TriangleMesh m = load_mesh(data("irregular_tet.lenmesh"));
  EXPECT_EQ(m.num_vertices, 4);
  EXPECT_EQ(m.num_edges(), 6);
  EXPECT_EQ(m.euler_characteristic, 2);
  // Edge (0, 1) of the embedding used to write the file has length 1.2.
  for (Index e = 0; e < m.num_edges(); ++e) {
    if (m.edges[static_cast<std::size_t>(e)] == std::array<Index, 2>{0, 1}) { EXPECT_DOUBLE_EQ(m.edge_lengths(e), 1.2); }
  }
}

TEST(LenMesh, RejectsInconsistentOrTruncatedInput) {
  std::istringstream inconsistent("lenmesh 3 2\n0 1 2 1 1 1\n0 2 1 1 1 1.5\n");
  EXPECT_THROW(parse_lenmesh(inconsistent), MeshFormatError);
  std::istringstream truncated("lenmesh 3 2\n0 1 2 1 1 1\n");
  EXPECT_THROW(parse_lenmesh(truncated), MeshFormatError);
  std::istringstream header("mesh 3 2\n");
  EXPECT_THROW(parse_lenmesh(header), MeshFormatError);
  std::istringstream degenerate("lenmesh 3 2\n0 1 2 1 1 2\n0 2 1 2 1 1\n");
  EXPECT_THROW(parse_lenmesh(degenerate), MeshFormatError);
}

TEST(ScaledLengths, Examples) {
  const TriangleMesh m = make_tetrahedron();
  EXPECT_EQ(scaled_lengths(m, Vector::Zero(4)), m.edge_lengths);
  EXPECT_TRUE(scaled_lengths(m, Vector::Constant(4, 0.3)).isApprox(m.edge_lengths * std::exp(0.3), 1e-15));

  const TriangleMesh unit = pillow(1.0, 1.0, 1.0);
  const Vector l = scaled_lengths(unit, Eigen::Vector3d(2.0, 0.0, 0.0));
  for (Index e = 0; e < unit.num_edges(); ++e) {
    const auto& ij = unit.edges[static_cast<std::size_t>(e)];
    if (ij == std::array<Index, 2>{0, 1}) { EXPECT_NEAR(l(e), std::exp(1.0), 1e-15); }
    if (ij == std::array<Index, 2>{1, 2}) { EXPECT_EQ(l(e), 1.0); }
  }
}

TEST(CornerAngles, Equilateral) {
  const TriangleMesh m = make_tetrahedron();
  const auto a = corner_angles(m, m.edge_lengths);
  for (const auto& face : a)
    for (double x : face) EXPECT_NEAR(x, kPi / 3.0, 1e-15);
}

TEST(CornerAngles, RightTriangle345) {
  // Face (0, 1, 2) with |01| = 3, |12| = 4, |20| = 5.
  const TriangleMesh m = pillow(3.0, 4.0, 5.0);
  const auto a = corner_angles(m, m.edge_lengths);
  EXPECT_NEAR(a[0][0], std::asin(4.0 / 5.0), 1e-15);
  EXPECT_NEAR(a[0][1], kPi / 2.0, 1e-15);
  EXPECT_NEAR(a[0][2], std::asin(3.0 / 5.0), 1e-15);
}

TEST(CornerAngles, DegenerateIsDomainError) {
  const TriangleMesh m = pillow(1.0, 1.0, 1.0);
  Vector flat = m.edge_lengths;
  flat(0) = 2.0;
  try {
    corner_angles(m, flat);
    FAIL() << "degenerate face accepted";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("face 0"), std::string::npos);
  }
}

// Law-of-cosines angles against angles measured directly from 3-D vertex
// positions, on a jittered icosahedron.
TEST(CornerAngles, MatchEmbeddedGeometry) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> p(12, 3);
  p << -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi, 0, 0, -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi, phi, 0, -1,
      phi, 0, 1, -phi, 0, -1, -phi, 0, 1;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] += jitter(rng);
  const TriangleMesh ico = make_icosahedron();
  const TriangleMesh m = mesh_from_positions(p, ico.faces);
  const auto a = corner_angles(m, m.edge_lengths);
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      const Eigen::Vector3d o = p.row(m.faces[f][c]);
      const Eigen::Vector3d x = Eigen::Vector3d(p.row(m.faces[f][(c + 1) % 3])) - o;
      const Eigen::Vector3d y = Eigen::Vector3d(p.row(m.faces[f][(c + 2) % 3])) - o;
      const double geometric = std::atan2(x.cross(y).norm(), x.dot(y));
      EXPECT_NEAR(a[f][static_cast<std::size_t>(c)], geometric, 1e-12);
      sum += a[f][static_cast<std::size_t>(c)];
    }
    EXPECT_NEAR(sum, kPi, 1e-12);
  }
}

TEST(ConformalGradient, TetrahedronWithFlatTargetsVanishes) {
  const TriangleMesh m = make_tetrahedron();
  const Vector g = conformal_gradient(m, Vector::Zero(4), Vector::Constant(4, kPi));
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ConformalGradient, IcosahedronRoundSphereTargetsVanish) {
  const TriangleMesh m = make_icosahedron();
  const Vector targets = Vector::Constant(12, 2.0 * kPi - 4.0 * kPi / 12.0);
  EXPECT_TRUE(uniform_targets(m).isApprox(targets, 1e-15));
  EXPECT_LE(conformal_gradient(m, Vector::Zero(12), targets).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ConformalGradient, TranslationInvariantAndSumsToGaussBonnetDefect) {
  const TriangleMesh m = make_icosahedron();
  const Vector targets = perturbed_targets(m, 3, 0.2);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> shift(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const Vector u = random_u(12, rng, 0.2);
    const double c = shift(rng);
    const Vector g = conformal_gradient(m, u, targets);
    EXPECT_LE((conformal_gradient(m, (u.array() + c).matrix(), targets) - g).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_NEAR(g.sum(), targets.sum() - kPi * m.num_faces(), 1e-12);
  }
}

TEST(ConformalHessian, TetrahedronCotanValues) {
  // cot(pi/3) = 1/sqrt(3) on both sides of every edge: w = 1/sqrt(3), H_ii = 3 w.
  const TriangleMesh m = make_tetrahedron();
  const Matrix h = conformal_hessian(m, Vector::Zero(4), Vector::Constant(4, kPi));
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) {
      EXPECT_NEAR(h(i, j), i == j ? std::sqrt(3.0) : -1.0 / std::sqrt(3.0), 1e-14);
    }
  }
}

// The FD Jacobian check pins the sign and scale conventions of gradient and
// Hessian jointly.
TEST(ConformalHessian, StructureAndFiniteDifferences) {
  for (const TriangleMesh& m : {make_tetrahedron(), make_icosahedron()}) {
    const Vector targets = perturbed_targets(m, 1, 0.2);
    ConformalOracle oracle(m, targets);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
      const Vector u = random_u(m.num_vertices, rng, 0.15);
      const Matrix h = oracle.hessian(u);
      EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LE((h * Vector::Ones(m.num_vertices)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GE(eigen_bounds(h, ConstraintSpec::none()).min, -1e-10);
      EXPECT_GT(eigen_bounds(h, ConstraintSpec::pin(0)).min, 0.0);
      const auto fd = check_hessian_fd(oracle, u);
      EXPECT_TRUE(fd.passed()) << fd.max_rel_error;
    }
  }
}

TEST(ConformalGradient, PathIntegralIsPathIndependent) {
  ConformalOracle oracle(make_icosahedron(), perturbed_targets(make_icosahedron(), 2, 0.2));
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const Vector u = random_u(12, rng, 0.15), v = random_u(12, rng, 0.15), w = random_u(12, rng, 0.15);
    const double direct = gradient_path_integral(oracle, u, v, 1024);
    const double detour = gradient_path_integral(oracle, u, w, 1024) + gradient_path_integral(oracle, w, v, 1024);
    EXPECT_NEAR(direct, detour, 1e-6);
  }
}

TEST(GaussBonnet, Examples) {
  const TriangleMesh m = make_tetrahedron();
  EXPECT_TRUE(check_gauss_bonnet(m, Vector::Constant(4, kPi)).feasible);
  const Vector shuffled = (Eigen::Vector4d(0.2, -0.2, 0.1, -0.1).array() + kPi).matrix();
  EXPECT_TRUE(check_gauss_bonnet(m, shuffled).feasible);
  const auto bad = check_gauss_bonnet(m, Vector::Constant(4, kPi + 0.1));
  EXPECT_FALSE(bad.feasible);
  EXPECT_NEAR(bad.defect, -0.4, 1e-12);
}

TEST(Targets, PresetsAreFeasible) {
  for (const TriangleMesh& m : {make_tetrahedron(), make_icosahedron(), load_mesh(data("irregular_tet.lenmesh"))}) {
    EXPECT_TRUE(check_gauss_bonnet(m, uniform_targets(m)).feasible);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_TRUE(check_gauss_bonnet(m, perturbed_targets(m, seed, 0.2)).feasible);
  }
}

TEST(Targets, FileParsing) {
  const Vector t = load_targets(data("tet_feasible.txt"), 4);
  EXPECT_NEAR(t(0), kPi + 0.2, 1e-15);
  EXPECT_FALSE(check_gauss_bonnet(make_tetrahedron(), load_targets(data("tet_infeasible.txt"), 4)).feasible);
  EXPECT_THROW(load_targets(data("tet_feasible.txt"), 5), MeshFormatError);
  std::istringstream bad("1.0\nabc\n");
  EXPECT_THROW(parse_targets(bad, 2), MeshFormatError);
  std::istringstream negative("1.0\n-1.0\n");
  EXPECT_THROW(parse_targets(negative, 2), MeshFormatError);
}

TEST(ConformalSolve, UniformTargetsGiveConstantScaleFactors) {
  ConformalOracle oracle(make_tetrahedron(), Vector::Constant(4, kPi));
  EXPECT_TRUE(solve(oracle, Vector::Zero(4)).trace.empty());
  std::mt19937_64 rng(2);
  const Vector u0 = random_u(4, rng, 0.1);
  const auto r = solve(oracle, u0);
  ASSERT_TRUE(r.converged()) << r.message;
  EXPECT_LE((r.final_point.array() - u0(0)).abs().maxCoeff(), 1e-9);
}

TEST(ConformalSolve, PerturbedTargetsConverge) {
  for (const TriangleMesh& m : {make_tetrahedron(), make_icosahedron(), load_mesh(data("irregular_tet.lenmesh"))}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Vector targets = perturbed_targets(m, seed, 0.2);
      ConformalOracle oracle(m, targets);
      const auto r = solve(oracle, Vector::Zero(m.num_vertices));
      ASSERT_TRUE(r.converged()) << r.message;
      EXPECT_EQ(r.final_point(0), 0.0);
      EXPECT_LE((angle_sums(m, r.final_point) - targets).norm(), 1e-10);
      EXPECT_EQ(r.counters.energy_evals, 0u);
    }
  }
}

TEST(ConformalSolve, InfeasibleTargetsStall) {
  ConformalOracle oracle(make_tetrahedron(), Vector::Constant(4, kPi + 0.1));
  const auto r = solve(oracle, Vector::Zero(4));
  EXPECT_FALSE(r.converged());
}

TEST(ConformalSolve, TriangleInequalityFailureIsDomainError) {
  // Targets that would need a flip under fixed connectivity.
  const TriangleMesh m = make_tetrahedron();
  const Vector targets = (Eigen::Vector4d(2.5, -0.5, -1.0, -1.0).array() + kPi).matrix();
  ConformalOracle oracle(m, targets);
  const auto r = solve(oracle, Vector::Zero(4));
  EXPECT_EQ(r.status, Status::domain_error) << to_string(r.status);
}
