#pragma once

#include <string>

#include "microtopt/regularization.hpp"
#include "microtopt/rve_mesh.hpp"

namespace microtopt {

enum class SeedKind { Uniform, CircularHole, Cross };

/// Parses "uniform", "circular_hole" or "cross".
SeedKind parse_seed_kind(const std::string& name);
const char* to_string(SeedKind kind) noexcept;

/// Nodal initial guesses with mean value volume_fraction (up to the bounds).
///  - Uniform: constant.
///  - CircularHole: centered hole of radius 0.25 min(l1, l2) at zero, grey
///    background elsewhere.
///  - Cross: bars of width 0.2 along both midlines at twice the volume
///    fraction, grey background elsewhere.
Vector nodal_seed(const RveMesh& mesh, SeedKind kind, double volume_fraction);

/// Nodal field that is 0 inside a centered disk of the given radius and 1 outside.
Vector circular_hole_phi(const RveMesh& mesh, double radius);

/// Element density of a centered circular hole passed through the
/// filter/projection chain at the given beta, with the radius chosen by
/// bisection so that the density's volume fraction equals volume_fraction.
struct HoleSeed {
  double radius = 0.0;
  Vector phi;
  Vector rho;
};
HoleSeed regularized_hole_seed(const RveMesh& mesh, const FilterOperator& filter,
                               const SymmetryMap& sym, double beta, double eta,
                               double volume_fraction);

}  // namespace microtopt
