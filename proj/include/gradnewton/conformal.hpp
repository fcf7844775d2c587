#pragma once

#include "gradnewton/linalg.hpp"
#include "gradnewton/oracle.hpp"
#include "gradnewton/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gradnewton {

/// Parse failure for mesh and target files.
class MeshFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Face = std::array<Index, 3>;

/// Closed triangle mesh with a fixed metric given by edge lengths.
///
/// Corner c of face f sits at faces[f][c]; face_edges[f][c] is the edge
/// opposite that corner. Every edge borders exactly two faces.
struct TriangleMesh {
  Index num_vertices = 0;
  std::vector<Face> faces;
  std::vector<std::array<Index, 2>> edges;  // (i, j) with i < j
  Vector edge_lengths;
  std::vector<std::array<Index, 3>> face_edges;
  int euler_characteristic = 0;

  Index num_edges() const { return static_cast<Index>(edges.size()); }
  Index num_faces() const { return static_cast<Index>(faces.size()); }
};

namespace detail {

inline std::string face_name(std::size_t f, const Face& face) {
  std::ostringstream os;
  os << "face " << f << " (" << face[0] << ", " << face[1] << ", " << face[2] << ")";
  return os.str();
}

inline bool strict_triangle(double a, double b, double c) {
  return a < b + c && b < a + c && c < a + b;
}

/// Builds connectivity and validates a closed 2-manifold. length(f, c)
/// returns the length of the edge opposite corner c of face f.
template <typename LengthFn>
TriangleMesh build_mesh(Index num_vertices, std::vector<Face> faces, LengthFn&& length) {
  if (num_vertices < 3) throw MeshFormatError("mesh needs at least 3 vertices");
  if (faces.empty()) throw MeshFormatError("mesh has no faces");

  TriangleMesh mesh;
  mesh.num_vertices = num_vertices;
  std::map<std::pair<Index, Index>, Index> edge_index;
  std::vector<int> edge_faces;
  std::vector<double> lengths;
  std::vector<bool> used(static_cast<std::size_t>(num_vertices), false);

  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (Index v : face) {
      if (v < 0 || v >= num_vertices) throw MeshFormatError(face_name(f, face) + " references a missing vertex");
      used[static_cast<std::size_t>(v)] = true;
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw MeshFormatError(face_name(f, face) + " is degenerate (repeated vertex)");
    }
    std::array<Index, 3> fe{};
    for (int c = 0; c < 3; ++c) {
      const Index a = face[(c + 1) % 3];
      const Index b = face[(c + 2) % 3];
      const auto key = std::minmax(a, b);
      const double l = length(f, c);
      if (!(l > 0.0) || !std::isfinite(l)) {
        throw MeshFormatError(face_name(f, face) + " has a non-positive edge length");
      }
      auto [it, inserted] = edge_index.try_emplace({key.first, key.second}, static_cast<Index>(lengths.size()));
      if (inserted) {
        mesh.edges.push_back({key.first, key.second});
        lengths.push_back(l);
        edge_faces.push_back(0);
      } else if (std::abs(lengths[static_cast<std::size_t>(it->second)] - l) > 1e-12 * std::max(1.0, l)) {
        throw MeshFormatError(face_name(f, face) + " disagrees with a neighbour on the length of edge (" +
                              std::to_string(key.first) + ", " + std::to_string(key.second) + ")");
      }
      ++edge_faces[static_cast<std::size_t>(it->second)];
      fe[c] = it->second;
    }
    mesh.face_edges.push_back(fe);
  }

  for (std::size_t e = 0; e < edge_faces.size(); ++e) {
    if (edge_faces[e] != 2) {
      throw MeshFormatError("non-manifold or open mesh: edge (" + std::to_string(mesh.edges[e][0]) + ", " +
                            std::to_string(mesh.edges[e][1]) + ") borders " + std::to_string(edge_faces[e]) +
                            " faces");
    }
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (!used[v]) throw MeshFormatError("vertex " + std::to_string(v) + " is not used by any face");
  }

  mesh.edge_lengths = Eigen::Map<const Vector>(lengths.data(), static_cast<Index>(lengths.size()));
  mesh.faces = std::move(faces);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& fe = mesh.face_edges[f];
    if (!strict_triangle(mesh.edge_lengths(fe[0]), mesh.edge_lengths(fe[1]), mesh.edge_lengths(fe[2]))) {
      throw MeshFormatError(face_name(f, mesh.faces[f]) + " violates the strict triangle inequality");
    }
  }
  mesh.euler_characteristic =
      static_cast<int>(num_vertices - mesh.num_edges() + mesh.num_faces());
  return mesh;
}

}  // namespace detail

/// Mesh with edge lengths taken from vertex positions (one row per vertex).
inline TriangleMesh mesh_from_positions(const Eigen::Matrix<double, Eigen::Dynamic, 3>& positions,
                                        std::vector<Face> faces) {
  const auto& fs = faces;
  return detail::build_mesh(positions.rows(), faces, [&](std::size_t f, int c) {
    const Index a = fs[f][(c + 1) % 3];
    const Index b = fs[f][(c + 2) % 3];
    if (a < 0 || b < 0 || a >= positions.rows() || b >= positions.rows()) return 0.0;
    return (positions.row(a) - positions.row(b)).norm();
  });
}

/// Mesh from per-face lengths (l_ij, l_jk, l_ki) for face (i, j, k).
inline TriangleMesh mesh_from_face_lengths(Index num_vertices, std::vector<Face> faces,
                                           const std::vector<std::array<double, 3>>& face_lengths) {
  if (face_lengths.size() != faces.size()) throw MeshFormatError("one length triple per face required");
  // Corner c is opposite edge (c+1, c+2): corner 0 -> l_jk, 1 -> l_ki, 2 -> l_ij.
  return detail::build_mesh(num_vertices, std::move(faces), [&](std::size_t f, int c) {
    return face_lengths[f][static_cast<std::size_t>((c + 1) % 3)];
  });
}

/// Wavefront OBJ: `v x y z` and triangular `f` lines (1-indexed, negative
/// indices relative, `i/t/n` forms accepted). Other lines are ignored.
inline TriangleMesh parse_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Face> faces;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw MeshFormatError("line " + std::to_string(lineno) + ": malformed vertex");
      }
      positions.push_back(p);
    } else if (tag == "f") {
      std::vector<Index> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long v = 0;
        try {
          std::size_t used = 0;
          v = std::stoll(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          throw MeshFormatError("line " + std::to_string(lineno) + ": bad face index '" + tok + "'");
        }
        if (v == 0) throw MeshFormatError("line " + std::to_string(lineno) + ": face index 0 is invalid in OBJ");
        idx.push_back(v > 0 ? static_cast<Index>(v - 1) : static_cast<Index>(positions.size()) + v);
      }
      if (idx.size() != 3) {
        throw MeshFormatError("line " + std::to_string(lineno) + ": only triangular faces are supported (got " +
                              std::to_string(idx.size()) + " vertices)");
      }
      faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  Eigen::Matrix<double, Eigen::Dynamic, 3> pos(static_cast<Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) pos.row(static_cast<Index>(i)) = positions[i].transpose();
  return mesh_from_positions(pos, std::move(faces));
}

/// Length-mesh format: `lenmesh V F`, then F lines `i j k l_ij l_jk l_ki`
/// with 0-indexed vertices.
inline TriangleMesh parse_lenmesh(std::istream& in) {
  std::string magic;
  long long nv = 0, nf = 0;
  if (!(in >> magic) || magic != "lenmesh") throw MeshFormatError("missing 'lenmesh' header");
  if (!(in >> nv >> nf) || nv < 1 || nf < 1) throw MeshFormatError("bad 'lenmesh V F' header");
  std::vector<Face> faces;
  std::vector<std::array<double, 3>> lengths;
  for (long long f = 0; f < nf; ++f) {
    long long i = 0, j = 0, k = 0;
    std::array<double, 3> l{};
    if (!(in >> i >> j >> k >> l[0] >> l[1] >> l[2])) {
      throw MeshFormatError("face record " + std::to_string(f) + " is truncated or malformed");
    }
    faces.push_back({static_cast<Index>(i), static_cast<Index>(j), static_cast<Index>(k)});
    lengths.push_back(l);
  }
  return mesh_from_face_lengths(static_cast<Index>(nv), std::move(faces), lengths);
}

/// Loads an OBJ or length-mesh file; the format is detected from the first token.
inline TriangleMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshFormatError("cannot open mesh file '" + path + "'");
  std::string first;
  in >> first;
  in.clear();
  in.seekg(0);
  return first == "lenmesh" ? parse_lenmesh(in) : parse_obj(in);
}

inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshFormatError("cannot open OBJ file '" + path + "'");
  return parse_obj(in);
}

inline TriangleMesh make_tetrahedron() {
  Eigen::Matrix<double, Eigen::Dynamic, 3> p(4, 3);
  p << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  return mesh_from_positions(p, {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

inline TriangleMesh make_icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> p(12, 3);
  p << -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi, 0,  //
      0, -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi,   //
      phi, 0, -1, phi, 0, 1, -phi, 0, -1, -phi, 0, 1;
  return mesh_from_positions(p, {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}});
}

/// l~_ij = l_ij exp((u_i + u_j) / 2).
inline Vector scaled_lengths(const TriangleMesh& mesh, const Vector& u) {
  if (u.size() != mesh.num_vertices) throw std::invalid_argument("scaled_lengths: one scale factor per vertex");
  if (!u.allFinite()) throw std::invalid_argument("scaled_lengths: non-finite scale factors");
  Vector out(mesh.num_edges());
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    const auto& ij = mesh.edges[static_cast<std::size_t>(e)];
    out(e) = mesh.edge_lengths(e) * std::exp(0.5 * (u(ij[0]) + u(ij[1])));
  }
  return out;
}

using CornerAngles = std::vector<std::array<double, 3>>;

/// Interior angles per face corner from the law of cosines. Throws
/// DomainError naming the face when a triangle inequality fails.
inline CornerAngles corner_angles(const TriangleMesh& mesh, const Vector& lengths) {
  if (lengths.size() != mesh.num_edges()) throw std::invalid_argument("corner_angles: one length per edge");
  CornerAngles angles(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& fe = mesh.face_edges[f];
    const double l[3] = {lengths(fe[0]), lengths(fe[1]), lengths(fe[2])};
    if (!detail::strict_triangle(l[0], l[1], l[2])) {
      throw DomainError(detail::face_name(f, mesh.faces[f]) + " violates the triangle inequality");
    }
    for (int c = 0; c < 3; ++c) {
      const double a = l[c], b = l[(c + 1) % 3], d = l[(c + 2) % 3];
      const double cosine = (b * b + d * d - a * a) / (2.0 * b * d);
      angles[f][static_cast<std::size_t>(c)] = std::acos(std::clamp(cosine, -1.0, 1.0));
    }
  }
  return angles;
}

/// Theta_i: sum of corner angles at each vertex.
inline Vector angle_sums(const TriangleMesh& mesh, const CornerAngles& angles) {
  Vector theta = Vector::Zero(mesh.num_vertices);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) theta(mesh.faces[f][static_cast<std::size_t>(c)]) += angles[f][static_cast<std::size_t>(c)];
  }
  return theta;
}

inline Vector angle_sums(const TriangleMesh& mesh, const Vector& u) {
  return angle_sums(mesh, corner_angles(mesh, scaled_lengths(mesh, u)));
}

/// g_i = theta_hat_i - Theta_i(u).
inline GradientVec conformal_gradient(const TriangleMesh& mesh, const Vector& u, const Vector& theta_hat) {
  if (theta_hat.size() != mesh.num_vertices) throw std::invalid_argument("conformal_gradient: one target per vertex");
  return theta_hat - angle_sums(mesh, u);
}

/// Cotan weights w_ij = 1/2 (cot a_ij + cot b_ij), indexed by edge.
inline Vector cotan_weights(const TriangleMesh& mesh, const CornerAngles& angles) {
  Vector w = Vector::Zero(mesh.num_edges());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const double a = angles[f][static_cast<std::size_t>(c)];
      w(mesh.face_edges[f][static_cast<std::size_t>(c)]) += 0.5 * std::cos(a) / std::sin(a);
    }
  }
  return w;
}

/// Cotan Laplacian: H_ij = -w_ij on edges, H_ii = sum_j w_ij.
inline HessianMat conformal_hessian(const TriangleMesh& mesh, const Vector& u, const Vector& theta_hat) {
  if (theta_hat.size() != mesh.num_vertices) throw std::invalid_argument("conformal_hessian: one target per vertex");
  const Vector w = cotan_weights(mesh, corner_angles(mesh, scaled_lengths(mesh, u)));
  HessianMat h = HessianMat::Zero(mesh.num_vertices, mesh.num_vertices);
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    const auto& ij = mesh.edges[static_cast<std::size_t>(e)];
    h(ij[0], ij[1]) -= w(e);
    h(ij[1], ij[0]) -= w(e);
    h(ij[0], ij[0]) += w(e);
    h(ij[1], ij[1]) += w(e);
  }
  return h;
}

struct GaussBonnetReport {
  double total_curvature = 0.0;  // sum_i (2 pi - theta_hat_i)
  double expected = 0.0;         // 2 pi chi
  double defect = 0.0;           // total_curvature - expected
  bool feasible = false;
};

inline GaussBonnetReport check_gauss_bonnet(const TriangleMesh& mesh, const Vector& theta_hat, double tol = 1e-9) {
  if (theta_hat.size() != mesh.num_vertices) throw std::invalid_argument("check_gauss_bonnet: one target per vertex");
  GaussBonnetReport r;
  r.total_curvature = (2.0 * std::numbers::pi - theta_hat.array()).sum();
  r.expected = 2.0 * std::numbers::pi * mesh.euler_characteristic;
  r.defect = r.total_curvature - r.expected;
  r.feasible = std::abs(r.defect) <= tol;
  return r;
}

/// Gauss-Bonnet curvature split equally over the vertices.
inline Vector uniform_targets(const TriangleMesh& mesh) {
  const double v = static_cast<double>(mesh.num_vertices);
  return Vector::Constant(mesh.num_vertices, 2.0 * std::numbers::pi * (1.0 - mesh.euler_characteristic / v));
}

/// Current angle sums plus a zero-sum perturbation drawn uniformly from
/// [-magnitude, magnitude] (before mean removal).
inline Vector perturbed_targets(const TriangleMesh& mesh, std::uint64_t seed, double magnitude) {
  if (!(magnitude >= 0.0)) throw std::invalid_argument("perturbed_targets: magnitude must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-magnitude, magnitude);
  Vector delta(mesh.num_vertices);
  for (Index i = 0; i < delta.size(); ++i) delta(i) = dist(rng);
  delta.array() -= delta.mean();
  return angle_sums(mesh, Vector::Zero(mesh.num_vertices)) + delta;
}

/// One target angle sum (radians) per line.
inline Vector parse_targets(std::istream& in, Index num_vertices) {
  std::vector<double> values;
  double x = 0.0;
  while (in >> x) values.push_back(x);
  if (!in.eof()) throw MeshFormatError("curvature file contains a non-numeric entry");
  if (static_cast<Index>(values.size()) != num_vertices) {
    throw MeshFormatError("curvature file has " + std::to_string(values.size()) + " values, mesh has " +
                          std::to_string(num_vertices) + " vertices");
  }
  Vector t = Eigen::Map<const Vector>(values.data(), num_vertices);
  if (!((t.array() > 0.0).all() && t.allFinite())) throw MeshFormatError("target angle sums must be positive");
  return t;
}

inline Vector load_targets(const std::string& path, Index num_vertices) {
  std::ifstream in(path);
  if (!in) throw MeshFormatError("cannot open curvature file '" + path + "'");
  return parse_targets(in, num_vertices);
}

/// Discrete conformal energy oracle on a fixed triangulation. Gradient and
/// Hessian only; the constant vector spans the Hessian nullspace, removed
/// by pinning u_0 = 0.
class ConformalOracle final : public ObjectiveOracle {
 public:
  ConformalOracle(std::shared_ptr<const TriangleMesh> mesh, Vector theta_hat)
      : ObjectiveOracle(mesh ? mesh->num_vertices : 0, false), mesh_(std::move(mesh)), theta_hat_(std::move(theta_hat)) {
    if (theta_hat_.size() != mesh_->num_vertices) throw std::invalid_argument("ConformalOracle: one target per vertex");
    if (!((theta_hat_.array() > 0.0).all() && theta_hat_.allFinite())) {
      throw std::invalid_argument("ConformalOracle: targets must be positive and finite");
    }
  }

  ConformalOracle(TriangleMesh mesh, Vector theta_hat)
      : ConformalOracle(std::make_shared<const TriangleMesh>(std::move(mesh)), std::move(theta_hat)) {}

  ConstraintSpec default_constraint() const override { return ConstraintSpec::pin(0); }

  const TriangleMesh& mesh() const { return *mesh_; }
  const Vector& targets() const { return theta_hat_; }

 protected:
  GradientVec eval_gradient(const Point& u) const override { return conformal_gradient(*mesh_, u, theta_hat_); }
  HessianMat eval_hessian(const Point& u) const override { return conformal_hessian(*mesh_, u, theta_hat_); }

 private:
  std::shared_ptr<const TriangleMesh> mesh_;
  Vector theta_hat_;
};

}  // namespace gradnewton
