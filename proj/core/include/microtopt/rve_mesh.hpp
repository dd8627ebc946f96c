#pragma once

#include <array>
#include <utility>
#include <vector>

#include "microtopt/types.hpp"

namespace microtopt {

/// Structured quadrilateral discretization of a rectangular unit cell.
///
/// Nodes are numbered row-major from the lower-left corner, node (i, j) has
/// id j*(nx+1)+i. Element (i, j) has id j*nx+i and counter-clockwise
/// connectivity starting at its lower-left node.
struct RveMesh {
  int nx = 0;
  int ny = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double thickness = 0.0;
  std::vector<Vec2> node_coords;
  std::vector<std::array<int, 4>> element_connectivity;
  int pinned_node = 0;

  int num_nodes() const { return static_cast<int>(node_coords.size()); }
  int num_elements() const { return static_cast<int>(element_connectivity.size()); }
  int num_dofs() const { return 2 * num_nodes(); }

  int node_id(int i, int j) const { return j * (nx + 1) + i; }
  int element_id(int i, int j) const { return j * nx + i; }

  double element_area() const { return (l1 / nx) * (l2 / ny); }
  double element_volume() const { return element_area() * thickness; }
  /// |Omega_rve| = l1 * l2 * thickness.
  double cell_volume() const { return l1 * l2 * thickness; }

  Vec2 element_center(int e) const;
  /// Reference coordinates of the element's four nodes as columns.
  Eigen::Matrix<double, 2, 4> element_coords(int e) const;
};

/// Throws InvalidArgument for non-positive counts or dimensions.
RveMesh build_mesh(int nx, int ny, double l1, double l2, double thickness);

/// Periodic pairs (positive node, negative node). Left/right pairs come
/// first, then bottom/top, then the three corners slaved to corner_master.
struct BoundaryPairing {
  std::vector<std::pair<int, int>> pairs;
  int corner_master = 0;

  int num_pairs() const { return static_cast<int>(pairs.size()); }
  int num_constraints() const { return 2 * num_pairs(); }
};

BoundaryPairing build_boundary_pairing(const RveMesh& mesh);

/// T_X (2n x 4): row 2i = [X1, X2, 0, 0], row 2i+1 = [0, 0, X1, X2], so that
/// T_X * [G11, G12, G21, G22] is the affine displacement G X at every node.
Matrix build_coordinate_operator(const RveMesh& mesh);

/// Element orbits under the symmetry group of the square (both midline
/// reflections and both diagonal reflections).
struct SymmetryMap {
  /// Smallest element id in each element's orbit.
  std::vector<int> orbit;

  int num_elements() const { return static_cast<int>(orbit.size()); }

  /// Orbit average of an element field. Idempotent, and self-adjoint, so the
  /// same call back-propagates gradients.
  Vector symmetrize(const Vector& field) const;

  static SymmetryMap identity(int num_elements);
};

/// Requires nx == ny and l1 == l2.
SymmetryMap build_symmetry_map(const RveMesh& mesh);

}  // namespace microtopt
