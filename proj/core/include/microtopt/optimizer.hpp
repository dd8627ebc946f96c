#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "microtopt/homogenization.hpp"
#include "microtopt/mma.hpp"
#include "microtopt/regularization.hpp"
#include "microtopt/seeds.hpp"
#include "microtopt/sensitivity.hpp"
#include "microtopt/solver.hpp"

namespace microtopt {

/// beta starts at `initial`, is multiplied by `factor` every `interval`
/// iterations or when the objective stagnates, and is capped at `max`.
struct BetaSchedule {
  double initial = 2.0;
  double factor = 1.5;
  double max = 100.0;
  int interval = 40;
  /// Stagnation: relative objective change below stagnation_tol for
  /// stagnation_window consecutive iterations since the last update.
  double stagnation_tol = 1e-3;
  int stagnation_window = 5;

  void validate() const;
  double next(double beta) const;
};

struct ProblemConfig {
  Mat3 C_target = Mat3::Zero();
  VoigtStrain E_applied = VoigtStrain(0.0, 0.2, 0.0);
  double v_max = 0.305;
  double r_min = 0.0875;
  bool periodic_filter = false;
  double eta = 0.5;
  BetaSchedule beta;
  bool enforce_symmetry = true;
  SolveSettings solver;
  int path_steps = 20;
  MmaSettings mma;
  int max_iterations = 600;
  double objective_tol = 1e-6;
  double volume_tol = 1e-6;
  /// Attempts with halved move limit after a failed forward solve.
  int max_move_retries = 3;

  void validate() const;
};

struct DesignState {
  Vector phi;
  Vector mu;
  Vector rho;
  double beta = 2.0;
  int iteration = 0;
};

struct HistoryRecord {
  int iteration = 0;
  double z = 0.0;
  double g = 0.0;
  double beta = 0.0;
  double non_discreteness = 0.0;
  double max_change = 0.0;
  int newton_iterations = 0;
  bool beta_updated = false;
};

/// Everything computed for one design: regularized field, forward state,
/// objective, constraint and both gradients in phi.
struct DesignEvaluation {
  RegularizedField field;
  MicroState state;
  Mat3 C_eff = Mat3::Zero();
  double z = 0.0;
  Vector d_rho;
  Vector d_phi;
  VolumeConstraint volume;
  Vector dg_phi;
  int newton_iterations = 0;
};

/// Fixed data of one optimization problem.
class DesignProblem {
 public:
  DesignProblem(const RveModel& model, ProblemConfig config);

  const RveModel& model() const { return *model_; }
  const ProblemConfig& config() const { return config_; }
  const FilterOperator& filter() const { return filter_; }
  const SymmetryMap& symmetry() const { return symmetry_; }
  int num_variables() const { return filter_.num_variables(); }

  /// Forward solve from warm (when given, falling back to a full path) plus
  /// the adjoint gradient. Throws PathFailureError or Error on solver failure.
  DesignEvaluation evaluate(const Vector& phi, double beta, const MicroState* warm = nullptr) const;

 private:
  const RveModel* model_;
  ProblemConfig config_;
  FilterOperator filter_;
  SymmetryMap symmetry_;
};

/// Target tangent homogenized from a regularized circular-hole geometry on
/// the problem's own mesh and filter, so the target lies in the design space.
struct SeedTarget {
  HoleSeed seed;
  Mat3 C_target = Mat3::Zero();
  SolvePath path;
};
SeedTarget make_seed_target(const DesignProblem& problem, double volume_fraction, double beta);

enum class OptimizationStatus { Converged, AlreadyOptimal, IterationLimit, Aborted };
const char* to_string(OptimizationStatus status) noexcept;

struct OptimizationResult {
  OptimizationStatus status = OptimizationStatus::IterationLimit;
  std::string message;
  DesignState design;
  std::vector<HistoryRecord> history;
  Mat3 C_eff = Mat3::Zero();
  double z = 0.0;
  double g = 0.0;
  MicroState state;
  /// Design whose forward solve failed, when aborted.
  std::optional<Vector> failed_phi;
};

using IterationCallback = std::function<void(const HistoryRecord&, const DesignState&)>;

OptimizationResult run_optimization(const RveModel& model, const ProblemConfig& config,
                                    const Vector& phi0, const IterationCallback& callback = {});

}  // namespace microtopt
