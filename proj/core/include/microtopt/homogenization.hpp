#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "microtopt/element.hpp"
#include "microtopt/rve_mesh.hpp"
#include "microtopt/types.hpp"

namespace microtopt {

/// Constant operators of the periodic constraint T_p (u - T_X T_s G_sym) = 0.
struct PbcOperators {
  SparseMatrix T_p;                  // 2m x 2n signed incidence
  Matrix T_X;                        // 2n x 4
  Eigen::Matrix<double, 4, 3> T_s;   // [a, b, c] -> [a, c, c, b]
  double alpha = 1.0;
  Matrix T_pXs;                      // T_p T_X T_s, 2m x 3
};

PbcOperators build_pbc_operators(const RveMesh& mesh, const BoundaryPairing& pairing, double alpha);

/// Macroscale kinematics for a rotation-free deformation (R = I).
struct MacroKinematics {
  VoigtStrain E_hat = VoigtStrain::Zero();
  SymGradient G_sym = SymGradient::Zero();
  Mat3 Gbar = Mat3::Zero();
  Mat3 Ibar = Vec3(1.0, 1.0, 2.0).asDiagonal();
  Mat3 Mbar = Vec3(1.0, 1.0, 2.0).asDiagonal();
  Mat3 Mbar_inv = Vec3(1.0, 1.0, 0.5).asDiagonal();
  Matrix Z;  // T_p T_X T_s Mbar^-1, 2m x 3
};

/// U = sqrt(I + 2E) by eigendecomposition; returns [U11-1, U22-1, U12].
/// Throws InadmissibleStrain when I + 2E is not positive definite.
SymGradient strain_to_symmetric_gradient(const VoigtStrain& E_hat);
/// (Ibar + Gbar/2) G_sym.
VoigtStrain symmetric_gradient_to_strain(const SymGradient& G_sym);
/// [[G11, 0, G12], [0, G22, G12], [G12, G12, G11+G22]].
Mat3 gradient_matrix(const SymGradient& G_sym);
/// [[S11, 0, S12], [0, S22, S12], [S12, S12, S11+S22]].
Mat3 geometric_stress_matrix(const VoigtStress& S);
/// Derivative of gradient_matrix (equivalently geometric_stress_matrix)
/// with respect to component k; the map is linear.
Mat3 gradient_matrix_basis(int k);

MacroKinematics make_kinematics(const VoigtStrain& E_hat, const PbcOperators& ops);

/// S_int = alpha Z^T lambda.
VoigtStress internal_macro_stress(const Vector& lambda_hat, const MacroKinematics& kin,
                                  const PbcOperators& ops);

struct MicroState {
  Vector u_hat;       // 2n, pinned DOFs are zero
  Vector lambda_hat;  // 2m
  MacroKinematics kin;
  VoigtStress S_int = VoigtStress::Zero();
  bool converged = false;
  int newton_iterations = 0;

  /// Fluctuation w = u - T_X T_s G_sym.
  Vector fluctuation(const PbcOperators& ops) const;
};

/// Mesh, pairing, operators, material and element data for one unit cell.
/// Immutable after construction.
class RveModel {
 public:
  RveModel(RveMesh mesh, MaterialParams material, SimpParams simp);

  const RveMesh& mesh() const { return mesh_; }
  const BoundaryPairing& pairing() const { return pairing_; }
  const PbcOperators& ops() const { return ops_; }
  const MaterialParams& material() const { return material_; }
  const SimpParams& simp() const { return simp_; }
  const QuadElement& element(int e) const { return elements_[e]; }
  double volume() const { return mesh_.cell_volume(); }

  int num_dofs() const { return mesh_.num_dofs(); }
  int num_free_dofs() const { return num_free_; }
  int num_multipliers() const { return pairing_.num_constraints(); }
  int num_unknowns() const { return num_free_ + num_multipliers(); }

  /// Reduced index of a full DOF, -1 for the pinned node.
  int free_index(int dof) const { return free_index_[dof]; }
  const std::array<int, 8>& element_dofs(int e) const { return element_dofs_[e]; }
  ElementVector gather(const Vector& full, int e) const;

  Vector reduce(const Vector& full) const;
  Vector expand(const Vector& reduced) const;

  void check_density(const Vector& rho) const;

  /// Full-length internal force vector (2n).
  Vector internal_force(const Vector& u, const Vector& rho) const;
  /// Reduced tangent stiffness K (pinned DOFs removed).
  SparseMatrix stiffness(const Vector& u, const Vector& rho) const;
  /// Upsilon = [[K/|Omega|, -alpha T_p^T], [-alpha T_p, 0]] on the reduced
  /// unknowns [u_free; lambda]. Optionally returns the full internal force
  /// from the same element pass.
  SparseMatrix saddle_matrix(const Vector& u, const Vector& rho, Vector* f_int = nullptr) const;
  /// Constraint block -alpha T_p restricted to free DOFs (2m x nf).
  const SparseMatrix& constraint_matrix() const { return constraint_; }

 private:
  RveMesh mesh_;
  BoundaryPairing pairing_;
  PbcOperators ops_;
  MaterialParams material_;
  SimpParams simp_;
  std::vector<QuadElement> elements_;
  std::vector<int> free_index_;
  std::vector<std::array<int, 8>> element_dofs_;
  int num_free_ = 0;
  SparseMatrix constraint_;
  SparseMatrix saddle_pattern_;
  std::vector<std::array<int, 64>> saddle_slots_;  // value index of (a,b), -1 if pinned
};

MicroState zero_state(const RveModel& model);

struct ResidualBlocks {
  Vector equilibrium;  // (1/|Omega|) f_int - alpha T_p^T lambda, 2n
  Vector constraint;   // -alpha T_p u + alpha T_p T_X T_s G_sym, 2m
  Vec3 stress = Vec3::Zero();  // S_int - S_applied; zero in strain-driven mode
  VoigtStress S_int = VoigtStress::Zero();

  Vector stacked() const;
};

/// Without applied_S the problem is strain driven: the stress block is not
/// solved and is returned as zero, S_int is reported separately.
ResidualBlocks assemble_residual(const MicroState& state, const Vector& rho, const RveModel& model,
                                 const std::optional<VoigtStress>& applied_S = std::nullopt);

/// Sparse LU of the saddle-point matrix. The symbolic analysis is done once
/// and reused for later factorizations with the same pattern.
class SaddleFactorization {
 public:
  SaddleFactorization();
  ~SaddleFactorization();
  SaddleFactorization(SaddleFactorization&&) noexcept;
  SaddleFactorization& operator=(SaddleFactorization&&) noexcept;

  /// Throws StructuralSingularity on a singular matrix.
  void factorize(const SparseMatrix& upsilon);
  bool ready() const { return ready_; }
  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  bool ready_ = false;
};

/// Factorizes Upsilon at the state's displacements.
SaddleFactorization factorize_at(const MicroState& state, const Vector& rho, const RveModel& model);

struct EffectiveTangent {
  Mat3 C_eff = Mat3::Zero();
  Mat3 C_s = Mat3::Zero();
  Mat3 Sbar = Mat3::Zero();
  Matrix psi_inv_z;  // Psi^-1 Z, 2m x 3
  Matrix V;          // K^-1 T_p^T Psi^-1 Z, 2n x 3 (pinned rows zero)
  std::optional<Matrix> Psi;  // -|Omega| T_p K^-1 T_p^T, only on request
};

/// C_eff = C_s - Z^T Psi^-1 Z with C_s = -Mbar^-1 Sbar Mbar^-1. The Schur
/// quantities come from three solves against the factorized Upsilon, using
/// (Upsilon^-1)_22 = (alpha^2 Psi)^-1 and
/// (Upsilon^-1)_12 = (|Omega|/alpha) K^-1 T_p^T Psi^-1.
/// With with_psi the 2m x 2m Psi is also formed (2m solves); throws
/// RankDeficiency when it does not exist.
EffectiveTangent effective_tangent(const MicroState& state, const RveModel& model,
                                   const SaddleFactorization& factorization,
                                   bool with_psi = false);

}  // namespace microtopt
