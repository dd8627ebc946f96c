#include "microtopt/seeds.hpp"

#include <algorithm>
#include <cmath>

#include "microtopt/error.hpp"

namespace microtopt {

namespace {

Vec2 cell_center(const RveMesh& mesh) { return {0.5 * mesh.l1, 0.5 * mesh.l2}; }

double mean_fill(Vector& phi, const std::vector<bool>& fixed, double fixed_value, double target) {
  // Background value that brings the mean of phi to target.
  const double n = static_cast<double>(phi.size());
  double n_fixed = 0.0;
  for (bool f : fixed) n_fixed += f ? 1.0 : 0.0;
  const double rest = n - n_fixed;
  const double bg = rest > 0.0 ? std::clamp((target * n - n_fixed * fixed_value) / rest, 0.0, 1.0)
                               : 0.0;
  for (Eigen::Index k = 0; k < phi.size(); ++k) phi[k] = fixed[k] ? fixed_value : bg;
  return bg;
}

}  // namespace

SeedKind parse_seed_kind(const std::string& name) {
  if (name == "uniform") return SeedKind::Uniform;
  if (name == "circular_hole") return SeedKind::CircularHole;
  if (name == "cross") return SeedKind::Cross;
  throw_error(ErrorKind::InvalidArgument, "unknown seed kind '" + name + "'");
}

const char* to_string(SeedKind kind) noexcept {
  switch (kind) {
    case SeedKind::Uniform: return "uniform";
    case SeedKind::CircularHole: return "circular_hole";
    case SeedKind::Cross: return "cross";
  }
  return "unknown";
}

Vector nodal_seed(const RveMesh& mesh, SeedKind kind, double volume_fraction) {
  require(volume_fraction > 0.0 && volume_fraction <= 1.0, "seed: volume fraction must lie in (0, 1]");
  const int nn = mesh.num_nodes();
  Vector phi = Vector::Constant(nn, volume_fraction);
  if (kind == SeedKind::Uniform) return phi;

  const Vec2 c = cell_center(mesh);
  std::vector<bool> fixed(static_cast<std::size_t>(nn), false);
  if (kind == SeedKind::CircularHole) {
    const double r = 0.25 * std::min(mesh.l1, mesh.l2);
    for (int k = 0; k < nn; ++k) fixed[k] = (mesh.node_coords[k] - c).norm() < r;
    mean_fill(phi, fixed, 0.0, volume_fraction);
  } else {
    const double hw = 0.1 * std::min(mesh.l1, mesh.l2);
    for (int k = 0; k < nn; ++k) {
      const Vec2 d = (mesh.node_coords[k] - c).cwiseAbs();
      fixed[k] = d.x() <= hw || d.y() <= hw;
    }
    mean_fill(phi, fixed, std::min(1.0, 2.0 * volume_fraction), volume_fraction);
  }
  return phi;
}

Vector circular_hole_phi(const RveMesh& mesh, double radius) {
  const Vec2 c = cell_center(mesh);
  Vector phi(mesh.num_nodes());
  for (int k = 0; k < mesh.num_nodes(); ++k)
    phi[k] = (mesh.node_coords[k] - c).norm() < radius ? 0.0 : 1.0;
  return phi;
}

HoleSeed regularized_hole_seed(const RveMesh& mesh, const FilterOperator& filter,
                               const SymmetryMap& sym, double beta, double eta,
                               double volume_fraction) {
  require(volume_fraction > 0.0 && volume_fraction < 1.0,
          "hole seed: volume fraction must lie in (0, 1)");
  auto fraction = [&](double r) {
    return regularize(circular_hole_phi(mesh, r), filter, sym, beta, eta).rho.mean();
  };
  double lo = 0.0;
  double hi = 0.5 * std::hypot(mesh.l1, mesh.l2);
  require(fraction(hi) <= volume_fraction,
          "hole seed: volume fraction not reachable with a single centered hole");
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fraction(mid) > volume_fraction ? lo : hi) = mid;
  }
  HoleSeed s;
  s.radius = hi;
  s.phi = circular_hole_phi(mesh, hi);
  s.rho = regularize(s.phi, filter, sym, beta, eta).rho;
  return s;
}

}  // namespace microtopt
