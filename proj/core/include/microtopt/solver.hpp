#pragma once

#include <optional>
#include <vector>

#include "microtopt/error.hpp"
#include "microtopt/homogenization.hpp"

namespace microtopt {

struct SolveSettings {
  double residual_tol = 1e-10;
  double residual_floor = 1e-14;
  int max_newton_iters = 25;
  int initial_steps = 20;
  int max_step_cuts = 8;
  bool arc_length_enabled = false;
  /// Keep the previous factorization while the relative Newton update stays
  /// below this threshold. Zero disables reuse.
  double reuse_update_threshold = 1e-2;
  /// Extra full Newton iterations after convergence.
  int polish_iterations = 0;

  void validate() const;
};

struct NewtonReport {
  int iterations = 0;
  int factorizations = 0;
  double reference_norm = 0.0;
  double equilibrium_norm = 0.0;
  double constraint_norm = 0.0;
};

/// Residual norms of a state (blocks 1 and 2 over the free DOFs).
struct ResidualNorms {
  double equilibrium = 0.0;
  double constraint = 0.0;
};
ResidualNorms residual_norms(const MicroState& state, const Vector& rho, const RveModel& model);

/// Newton iteration on (u_free, lambda) with the macro strain held at
/// E_target. Throws StepFailure when it does not converge, and
/// StructuralSingularity when Upsilon cannot be factorized.
MicroState newton_solve_at_strain(const MicroState& state0, const VoigtStrain& E_target,
                                  const Vector& rho, const RveModel& model,
                                  const SolveSettings& settings, NewtonReport* report = nullptr);

struct PathSample {
  double load_factor = 0.0;
  VoigtStrain E = VoigtStrain::Zero();
  VoigtStress S_int = VoigtStress::Zero();
  std::optional<Mat3> C_eff;
  int newton_iterations = 0;
  double reference_norm = 0.0;
  double equilibrium_norm = 0.0;
  double constraint_norm = 0.0;
};

struct SolvePath {
  std::vector<PathSample> samples;
  MicroState final_state;
  int step_cuts = 0;
};

/// Raised when the path cannot be completed; carries the converged part.
class PathFailureError : public Error {
 public:
  PathFailureError(const std::string& what, SolvePath partial)
      : Error(ErrorKind::PathFailure, what), partial_(std::move(partial)) {}
  const SolvePath& partial() const noexcept { return partial_; }

 private:
  SolvePath partial_;
};

/// Ramps E = t E_final for t in [0, 1], recording a sample at t = k / n_samples.
/// A zero target gives a single sample. Failed increments are bisected up to
/// settings.max_step_cuts times.
SolvePath solve_path(const Vector& rho, const VoigtStrain& E_final, int n_samples,
                     const RveModel& model, const SolveSettings& settings,
                     bool with_tangent = false);

}  // namespace microtopt
