#include "microtopt/regularization.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "microtopt/error.hpp"

namespace microtopt {

FilterOperator::FilterOperator(const RveMesh& mesh, double r_min, bool periodic)
    : r_min_(r_min), periodic_(periodic) {
  require(r_min > 0.0, "filter: r_min must be positive");
  require(!periodic || 2.0 * r_min < std::min(mesh.l1, mesh.l2),
          "filter: periodic r_min must be below half the cell size");
  const int ne = mesh.num_elements();
  const double hx = mesh.l1 / mesh.nx;
  const double hy = mesh.l2 / mesh.ny;
  const int reach_x = static_cast<int>(std::ceil(r_min / hx)) + 1;
  const int reach_y = static_cast<int>(std::ceil(r_min / hy)) + 1;

  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < ne; ++e) {
    const int ei = e % mesh.nx;
    const int ej = e / mesh.nx;
    const Vec2 xc = mesh.element_center(e);
    std::vector<Eigen::Triplet<double>> row;
    double total = 0.0;
    for (int dj = -reach_y; dj <= reach_y + 1; ++dj)
      for (int di = -reach_x; di <= reach_x + 1; ++di) {
        int i = ei + di;
        int j = ej + dj;
        Vec2 shift = Vec2::Zero();
        if (periodic_) {
          // Wrap onto the nx x ny torus lattice; right/top boundary nodes are
          // images of the left/bottom ones and carry no weight.
          while (i < 0) { i += mesh.nx; shift.x() -= mesh.l1; }
          while (i >= mesh.nx) { i -= mesh.nx; shift.x() += mesh.l1; }
          while (j < 0) { j += mesh.ny; shift.y() -= mesh.l2; }
          while (j >= mesh.ny) { j -= mesh.ny; shift.y() += mesh.l2; }
        } else if (i < 0 || i > mesh.nx || j < 0 || j > mesh.ny) {
          continue;
        }
        const int node = mesh.node_id(i, j);
        const double d = (mesh.node_coords[node] + shift - xc).norm();
        if (d >= r_min) continue;
        const double w = (r_min - d) / r_min;
        row.emplace_back(e, node, w);
        total += w;
      }
    if (row.empty())
      throw_error(ErrorKind::InvalidArgument,
                  "filter: element " + std::to_string(e) + " has no design node within r_min");
    for (const auto& t : row) trip.emplace_back(t.row(), t.col(), t.value() / total);
  }
  weights_.resize(ne, mesh.num_nodes());
  weights_.setFromTriplets(trip.begin(), trip.end());
  weights_.makeCompressed();
}

Vector FilterOperator::apply(const Vector& phi) const {
  require(phi.size() == weights_.cols(), "filter: design vector size mismatch");
  return weights_ * phi;
}

Vector FilterOperator::apply_transpose(const Vector& d_mu) const {
  require(d_mu.size() == weights_.rows(), "filter: sensitivity size mismatch");
  return weights_.transpose() * d_mu;
}

Projection project(const Vector& mu, double beta, double eta) {
  require(beta > 0.0, "project: beta must be positive");
  require(eta > 0.0 && eta < 1.0, "project: eta must lie in (0, 1)");
  const double te = std::tanh(beta * eta);
  const double denom = te + std::tanh(beta * (1.0 - eta));
  Projection p;
  p.rho.resize(mu.size());
  p.drho_dmu.resize(mu.size());
  for (Eigen::Index e = 0; e < mu.size(); ++e) {
    const double t = std::tanh(beta * (mu[e] - eta));
    p.rho[e] = std::clamp((te + t) / denom, 0.0, 1.0);
    p.drho_dmu[e] = beta * (1.0 - t * t) / denom;
  }
  return p;
}

VolumeConstraint volume_constraint(const Vector& rho, const RveMesh& mesh, double v_max) {
  require(rho.size() == mesh.num_elements(), "volume_constraint: density size mismatch");
  require(v_max > 0.0 && v_max <= 1.0, "volume_constraint: V_max must lie in (0, 1]");
  // Uniform structured mesh: every element carries the same volume.
  const double n = static_cast<double>(rho.size());
  VolumeConstraint c;
  c.g = rho.sum() / n - v_max;
  c.dg_drho = Vector::Constant(rho.size(), 1.0 / n);
  return c;
}

RegularizedField regularize(const Vector& phi, const FilterOperator& filter, const SymmetryMap& sym,
                            double beta, double eta) {
  RegularizedField f;
  f.mu = filter.apply(phi);
  Projection p = project(f.mu, beta, eta);
  f.rho_projected = std::move(p.rho);
  f.drho_dmu = std::move(p.drho_dmu);
  f.rho = sym.symmetrize(f.rho_projected);
  return f;
}

Vector chain_rule_back(const Vector& d_rho, const Vector& drho_dmu, const FilterOperator& filter,
                       const SymmetryMap& sym) {
  require(d_rho.size() == drho_dmu.size(), "chain_rule_back: size mismatch");
  return filter.apply_transpose(sym.symmetrize(d_rho).cwiseProduct(drho_dmu));
}

double non_discreteness(const Vector& rho) {
  if (rho.size() == 0) return 0.0;
  return (4.0 * rho.array() * (1.0 - rho.array())).mean();
}

}  // namespace microtopt
