#include "microtopt/rve_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "microtopt/error.hpp"

namespace microtopt {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateElement: return "degenerate-element";
    case ErrorKind::InadmissibleStrain: return "inadmissible-strain";
    case ErrorKind::InadmissibleKinematics: return "inadmissible-kinematics";
    case ErrorKind::StructuralSingularity: return "structural-singularity";
    case ErrorKind::RankDeficiency: return "rank-deficiency";
    case ErrorKind::StepFailure: return "step-failure";
    case ErrorKind::PathFailure: return "path-failure";
    case ErrorKind::StaleState: return "stale-state";
    case ErrorKind::OracleFailure: return "oracle-failure";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

Vec2 RveMesh::element_center(int e) const {
  Vec2 c = Vec2::Zero();
  for (int a : element_connectivity[e]) c += node_coords[a];
  return 0.25 * c;
}

Eigen::Matrix<double, 2, 4> RveMesh::element_coords(int e) const {
  Eigen::Matrix<double, 2, 4> X;
  for (int a = 0; a < 4; ++a) X.col(a) = node_coords[element_connectivity[e][a]];
  return X;
}

RveMesh build_mesh(int nx, int ny, double l1, double l2, double thickness) {
  require(nx >= 1 && ny >= 1, "build_mesh: element counts must be >= 1");
  require(l1 > 0.0 && l2 > 0.0 && thickness > 0.0,
          "build_mesh: cell dimensions and thickness must be positive");

  RveMesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.l1 = l1;
  mesh.l2 = l2;
  mesh.thickness = thickness;

  mesh.node_coords.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.node_coords.emplace_back(l1 * i / nx, l2 * j / ny);

  mesh.element_connectivity.reserve(static_cast<std::size_t>(nx * ny));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.element_connectivity.push_back({mesh.node_id(i, j), mesh.node_id(i + 1, j),
                                           mesh.node_id(i + 1, j + 1), mesh.node_id(i, j + 1)});

  // Center node; for odd counts the node just below-left of the center.
  mesh.pinned_node = mesh.node_id(nx / 2, ny / 2);
  return mesh;
}

BoundaryPairing build_boundary_pairing(const RveMesh& mesh) {
  BoundaryPairing p;
  const int nx = mesh.nx;
  const int ny = mesh.ny;
  p.corner_master = mesh.node_id(0, 0);
  p.pairs.reserve(static_cast<std::size_t>((nx - 1) + (ny - 1) + 3));
  for (int j = 1; j < ny; ++j) p.pairs.emplace_back(mesh.node_id(nx, j), mesh.node_id(0, j));
  for (int i = 1; i < nx; ++i) p.pairs.emplace_back(mesh.node_id(i, ny), mesh.node_id(i, 0));
  p.pairs.emplace_back(mesh.node_id(nx, 0), p.corner_master);
  p.pairs.emplace_back(mesh.node_id(0, ny), p.corner_master);
  p.pairs.emplace_back(mesh.node_id(nx, ny), p.corner_master);
  return p;
}

Matrix build_coordinate_operator(const RveMesh& mesh) {
  const int n = mesh.num_nodes();
  Matrix T = Matrix::Zero(2 * n, 4);
  for (int i = 0; i < n; ++i) {
    const Vec2& X = mesh.node_coords[i];
    T(2 * i, 0) = X.x();
    T(2 * i, 1) = X.y();
    T(2 * i + 1, 2) = X.x();
    T(2 * i + 1, 3) = X.y();
  }
  return T;
}

Vector SymmetryMap::symmetrize(const Vector& field) const {
  require(field.size() == num_elements(), "symmetrize: field size mismatch");
  const int ne = num_elements();
  Vector sum = Vector::Zero(ne);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(ne);
  for (int e = 0; e < ne; ++e) {
    sum[orbit[e]] += field[e];
    ++count[orbit[e]];
  }
  Vector out(ne);
  for (int e = 0; e < ne; ++e) out[e] = sum[orbit[e]] / count[orbit[e]];
  return out;
}

SymmetryMap SymmetryMap::identity(int num_elements) {
  SymmetryMap s;
  s.orbit.resize(static_cast<std::size_t>(num_elements));
  for (int e = 0; e < num_elements; ++e) s.orbit[e] = e;
  return s;
}

SymmetryMap build_symmetry_map(const RveMesh& mesh) {
  require(mesh.nx == mesh.ny && mesh.l1 == mesh.l2,
          "build_symmetry_map: diagonal symmetry requires a square cell and grid");
  const int n = mesh.nx;
  SymmetryMap s;
  s.orbit.resize(static_cast<std::size_t>(n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int ri = n - 1 - i;
      const int rj = n - 1 - j;
      const std::array<int, 8> images = {
          mesh.element_id(i, j),  mesh.element_id(ri, j),  mesh.element_id(i, rj),
          mesh.element_id(ri, rj), mesh.element_id(j, i),  mesh.element_id(rj, i),
          mesh.element_id(j, ri), mesh.element_id(rj, ri)};
      s.orbit[mesh.element_id(i, j)] = *std::min_element(images.begin(), images.end());
    }
  }
  return s;
}

}  // namespace microtopt
