#pragma once

#include <optional>
#include <string>
#include <vector>

#include "microtopt/homogenization.hpp"
#include "microtopt/solver.hpp"

namespace microtopt {

/// z = sum of squared Voigt differences and dz/dC = 2 (C_eff - C_target).
struct ObjectiveValue {
  double z = 0.0;
  Mat3 dz_dC = Mat3::Zero();
};
ObjectiveValue objective_and_partial(const Mat3& C_eff, const Mat3& C_target);

/// C_eff of an arbitrary (not necessarily converged) state; factorizes Upsilon.
Mat3 effective_tangent_at(const MicroState& state, const Vector& rho, const RveModel& model);

/// Explicit dz/drho per element: |Omega| sum_ab D_ab V_a^T dK_e/drho V_b.
/// Throws StaleState for an unconverged state.
Vector dCeff_drho_contracted(const MicroState& state, const Vector& rho, const RveModel& model,
                             const Mat3& dz_dC, const EffectiveTangent& tangent);
/// Full-length (2n) vector, entry p = <dz_dC, dC_eff/du_p> with lambda and E held fixed.
Vector dCeff_du_contracted(const MicroState& state, const Vector& rho, const RveModel& model,
                           const Mat3& dz_dC, const EffectiveTangent& tangent);
/// Entry r = <dz_dC, dC_eff/dlambda_r> with u and E held fixed.
Vector dCeff_dlambda(const MicroState& state, const RveModel& model, const Mat3& dz_dC);
/// Entry r = <dz_dC, dC_eff/dE_r> with u and lambda held fixed.
Vec3 dCeff_dE(const MicroState& state, const RveModel& model, const Mat3& dz_dC,
              const EffectiveTangent& tangent);

struct AdjointSolution {
  Vector chi;            // over [u_free; lambda]
  Vector partial_z_rho;  // explicit part per element
};

struct GradientVector {
  Vector d_rho;  // per element
  Vector d_phi;  // per design variable, filled by the optimizer
};

struct AdjointResult {
  double z = 0.0;
  Mat3 C_eff = Mat3::Zero();
  AdjointSolution adjoint;
  GradientVector gradient;
};

/// Total derivative of any criterion whose partial in C_eff is dz_dC.
/// The factorization must be of Upsilon at the given converged state.
AdjointResult criterion_gradient(const MicroState& state, const Vector& rho, const RveModel& model,
                                 const Mat3& dz_dC, const SaddleFactorization& factorization);

/// Gradient of the tangent-matching objective.
AdjointResult adjoint_gradient(const MicroState& state, const Vector& rho, const RveModel& model,
                               const Mat3& C_target, const SaddleFactorization& factorization);

/// Everything needed to re-evaluate the objective from scratch.
struct FdProblem {
  const RveModel* model = nullptr;
  VoigtStrain E_applied = VoigtStrain::Zero();
  Mat3 C_target = Mat3::Zero();
  SolveSettings settings;
  int n_steps = 10;
  /// Converged state at E_applied for the unperturbed design. Perturbed solves
  /// start here, and fall back to a full path when that fails.
  std::optional<MicroState> warm_start;
};

/// Objective and C_eff after a fresh forward solve.
struct ForwardEvaluation {
  double z = 0.0;
  Mat3 C_eff = Mat3::Zero();
  MicroState state;
};
ForwardEvaluation evaluate_objective(const FdProblem& problem, const Vector& rho);

struct FdOutcome {
  double value = 0.0;
  bool ok = false;
  std::string message;
};

/// Central difference of z in rho_e with a full re-solve on each side;
/// one-sided at the bounds of [0, 1]. Solver failures are reported in the
/// outcome, never thrown.
FdOutcome fd_oracle(const Vector& rho, int e, double h, const FdProblem& problem);
/// fd_oracle for several elements, evaluated in parallel.
std::vector<FdOutcome> fd_oracle_many(const Vector& rho, const std::vector<int>& elements, double h,
                                      const FdProblem& problem);

}  // namespace microtopt
