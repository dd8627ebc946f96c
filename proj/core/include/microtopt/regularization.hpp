#pragma once

#include "microtopt/rve_mesh.hpp"
#include "microtopt/types.hpp"

namespace microtopt {

/// Linear (cone) filter from nodal design variables to element densities,
/// mu^e = sum_i w_i phi_i / sum_i w_i with w_i = (r_min - |x_i - x^e|) / r_min
/// over the nodes strictly inside r_min. With periodic = true distances are
/// measured on the torus of the unit cell.
class FilterOperator {
 public:
  /// Throws InvalidArgument if some element has no node inside r_min.
  FilterOperator(const RveMesh& mesh, double r_min, bool periodic = false);

  double r_min() const { return r_min_; }
  bool periodic() const { return periodic_; }
  int num_elements() const { return static_cast<int>(weights_.rows()); }
  int num_variables() const { return static_cast<int>(weights_.cols()); }
  /// Row-normalized weights (elements x nodes).
  const SparseMatrix& weights() const { return weights_; }

  Vector apply(const Vector& phi) const;
  /// Transpose action, maps element sensitivities back to the nodes.
  Vector apply_transpose(const Vector& d_mu) const;

 private:
  double r_min_;
  bool periodic_;
  SparseMatrix weights_;
};

struct Projection {
  Vector rho;
  Vector drho_dmu;
};

/// rho = (tanh(beta eta) + tanh(beta (mu - eta))) / (tanh(beta eta) + tanh(beta (1 - eta))).
Projection project(const Vector& mu, double beta, double eta);

struct VolumeConstraint {
  double g = 0.0;   // volume fraction minus V_max
  Vector dg_drho;
};
VolumeConstraint volume_constraint(const Vector& rho, const RveMesh& mesh, double v_max);

/// phi -> filter -> project -> symmetrize.
struct RegularizedField {
  Vector mu;
  Vector rho_projected;
  Vector drho_dmu;
  Vector rho;
};
RegularizedField regularize(const Vector& phi, const FilterOperator& filter, const SymmetryMap& sym,
                            double beta, double eta);

/// Exact transpose of regularize: d_phi = F^T (P' .* Sym(d_rho)).
Vector chain_rule_back(const Vector& d_rho, const Vector& drho_dmu, const FilterOperator& filter,
                       const SymmetryMap& sym);

/// Mean of 4 rho (1 - rho); zero for a binary field.
double non_discreteness(const Vector& rho);

}  // namespace microtopt
