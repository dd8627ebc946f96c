#include "microtopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace microtopt {

void BetaSchedule::validate() const {
  require(initial > 0.0 && initial <= max, "beta schedule: need 0 < initial <= max");
  require(factor > 1.0, "beta schedule: factor must exceed 1");
  require(interval >= 1, "beta schedule: interval must be >= 1");
  require(stagnation_tol >= 0.0 && stagnation_window >= 1,
          "beta schedule: invalid stagnation settings");
}

double BetaSchedule::next(double beta) const { return std::min(max, beta * factor); }

void ProblemConfig::validate() const {
  require(v_max > 0.0 && v_max <= 1.0, "problem: V_max must lie in (0, 1]");
  require(r_min > 0.0, "problem: r_min must be positive");
  require(eta > 0.0 && eta < 1.0, "problem: eta must lie in (0, 1)");
  require(path_steps >= 1, "problem: path_steps must be >= 1");
  require(max_iterations >= 0, "problem: max_iterations must be >= 0");
  require(objective_tol > 0.0 && volume_tol >= 0.0, "problem: invalid tolerances");
  require(max_move_retries >= 0, "problem: max_move_retries must be >= 0");
  require(C_target.allFinite(), "problem: C_target must be finite");
  strain_to_symmetric_gradient(E_applied);
  beta.validate();
  solver.validate();
  mma.validate();
}

const char* to_string(OptimizationStatus status) noexcept {
  switch (status) {
    case OptimizationStatus::Converged: return "converged";
    case OptimizationStatus::AlreadyOptimal: return "already-optimal";
    case OptimizationStatus::IterationLimit: return "iteration-limit";
    case OptimizationStatus::Aborted: return "aborted";
  }
  return "unknown";
}

DesignProblem::DesignProblem(const RveModel& model, ProblemConfig config)
    : model_(&model),
      config_(std::move(config)),
      filter_(model.mesh(), config_.r_min, config_.periodic_filter),
      symmetry_(config_.enforce_symmetry ? build_symmetry_map(model.mesh())
                                         : SymmetryMap::identity(model.mesh().num_elements())) {
  config_.validate();
}

DesignEvaluation DesignProblem::evaluate(const Vector& phi, double beta, const MicroState* warm) const {
  require(phi.size() == num_variables(), "evaluate: design vector size mismatch");
  const RveModel& model = *model_;
  DesignEvaluation ev;
  ev.field = regularize(phi, filter_, symmetry_, beta, config_.eta);
  const Vector& rho = ev.field.rho;

  bool solved = false;
  if (warm) {
    try {
      NewtonReport rep;
      ev.state = newton_solve_at_strain(*warm, config_.E_applied, rho, model, config_.solver, &rep);
      ev.newton_iterations = rep.iterations;
      solved = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StepFailure && e.kind() != ErrorKind::StructuralSingularity)
        throw;
      spdlog::debug("warm-started Newton failed ({}), solving the full path", e.what());
    }
  }
  if (!solved) {
    SolvePath path = solve_path(rho, config_.E_applied, config_.path_steps, model, config_.solver);
    ev.state = std::move(path.final_state);
    for (const auto& s : path.samples) ev.newton_iterations += s.newton_iterations;
  }

  const SaddleFactorization fac = factorize_at(ev.state, rho, model);
  AdjointResult adj = adjoint_gradient(ev.state, rho, model, config_.C_target, fac);
  ev.C_eff = adj.C_eff;
  ev.z = adj.z;
  ev.d_rho = std::move(adj.gradient.d_rho);
  ev.d_phi = chain_rule_back(ev.d_rho, ev.field.drho_dmu, filter_, symmetry_);
  ev.volume = volume_constraint(rho, model.mesh(), config_.v_max);
  ev.dg_phi = chain_rule_back(ev.volume.dg_drho, ev.field.drho_dmu, filter_, symmetry_);
  return ev;
}

SeedTarget make_seed_target(const DesignProblem& problem, double volume_fraction, double beta) {
  const ProblemConfig& cfg = problem.config();
  SeedTarget t;
  t.seed = regularized_hole_seed(problem.model().mesh(), problem.filter(), problem.symmetry(), beta,
                                 cfg.eta, volume_fraction);
  t.path = solve_path(t.seed.rho, cfg.E_applied, cfg.path_steps, problem.model(), cfg.solver, true);
  t.C_target = *t.path.samples.back().C_eff;
  return t;
}

OptimizationResult run_optimization(const RveModel& model, const ProblemConfig& config,
                                    const Vector& phi0, const IterationCallback& callback) {
  const DesignProblem problem(model, config);
  require(phi0.size() == problem.num_variables(), "run_optimization: initial design size mismatch");
  require((phi0.array() >= 0.0).all() && (phi0.array() <= 1.0).all(),
          "run_optimization: initial design outside [0, 1]");

  const double scale = config.C_target.squaredNorm() > 0.0 ? config.C_target.squaredNorm() : 1.0;
  const int n = problem.num_variables();
  const Vector lower = Vector::Zero(n);
  const Vector upper = Vector::Ones(n);

  OptimizationResult result;
  double beta = config.beta.initial;
  Vector phi = phi0;
  DesignEvaluation ev;
  try {
    ev = problem.evaluate(phi, beta);
  } catch (const Error& e) {
    result.status = OptimizationStatus::Aborted;
    result.message = std::string("forward solve failed for the initial design: ") + e.what();
    result.failed_phi = phi;
    return result;
  }

  MmaState mma;
  double z_prev = std::numeric_limits<double>::quiet_NaN();
  int stagnant = 0;
  int since_update = 0;
  bool beta_updated = false;
  double max_change = 0.0;

  for (int k = 0;; ++k) {
    HistoryRecord rec;
    rec.iteration = k;
    rec.z = ev.z;
    rec.g = ev.volume.g;
    rec.beta = beta;
    rec.non_discreteness = non_discreteness(ev.field.rho);
    rec.max_change = max_change;
    rec.newton_iterations = ev.newton_iterations;
    rec.beta_updated = beta_updated;
    result.history.push_back(rec);
    result.design = {phi, ev.field.mu, ev.field.rho, beta, k};
    result.C_eff = ev.C_eff;
    result.z = ev.z;
    result.g = ev.volume.g;
    result.state = ev.state;
    spdlog::info("iter {:4d}  z = {:.6e}  g = {:+.3e}  beta = {:.3g}  grey = {:.4f}", k, ev.z,
                 ev.volume.g, beta, rec.non_discreteness);
    if (callback) callback(rec, result.design);

    const bool feasible = ev.volume.g <= config.volume_tol;
    if (k == 0 && ev.z <= 1e-12 * scale && feasible) {
      result.status = OptimizationStatus::AlreadyOptimal;
      break;
    }
    const double rel = (k > 0) ? std::abs(ev.z - z_prev) / std::max(std::abs(z_prev), 1e-300)
                               : std::numeric_limits<double>::infinity();
    if (k > 0 && !beta_updated && beta >= config.beta.max && feasible &&
        (rel < config.objective_tol || ev.z <= 1e-14 * scale)) {
      result.status = OptimizationStatus::Converged;
      break;
    }
    if (k >= config.max_iterations) {
      result.status = OptimizationStatus::IterationLimit;
      break;
    }
    if (k > 0 && !beta_updated) stagnant = (rel < config.beta.stagnation_tol) ? stagnant + 1 : 0;

    double move = config.mma.move;
    bool ok = false;
    Vector phi_new;
    DesignEvaluation next;
    std::string last_error;
    Vector g(1);
    g << ev.volume.g;
    const Matrix dg = ev.dg_phi.transpose();
    for (int attempt = 0; attempt <= config.max_move_retries && !ok; ++attempt) {
      MmaState trial = mma;
      const MmaResult up =
          mma_update(phi, ev.d_phi / scale, g, dg, lower, upper, trial, config.mma, move);
      if (up.max_relaxation > 1e-6)
        spdlog::warn("MMA subproblem relaxed the volume constraint by {:.3e}", up.max_relaxation);
      try {
        next = problem.evaluate(up.x, beta, &ev.state);
        mma = std::move(trial);
        phi_new = up.x;
        ok = true;
      } catch (const Error& e) {
        last_error = e.what();
        result.failed_phi = up.x;
        move *= 0.5;
        spdlog::warn("forward solve failed at iteration {} ({}); retrying with move {:.3g}", k + 1,
                     e.what(), move);
      }
    }
    if (!ok) {
      result.status = OptimizationStatus::Aborted;
      result.message = "forward solve failed after halving the move limit " +
                       std::to_string(config.max_move_retries) + " times: " + last_error;
      break;
    }
    result.failed_phi.reset();

    max_change = (phi_new - phi).cwiseAbs().maxCoeff();
    ++since_update;
    beta_updated = false;
    if (beta < config.beta.max &&
        (since_update >= config.beta.interval || stagnant >= config.beta.stagnation_window)) {
      beta = config.beta.next(beta);
      since_update = 0;
      stagnant = 0;
      beta_updated = true;
      try {
        const MicroState warm = next.state;
        next = problem.evaluate(phi_new, beta, &warm);
      } catch (const Error& e) {
        result.status = OptimizationStatus::Aborted;
        result.message = std::string("forward solve failed after a beta update: ") + e.what();
        result.failed_phi = phi_new;
        break;
      }
    }
    z_prev = ev.z;
    ev = std::move(next);
    phi = std::move(phi_new);
  }
  return result;
}

}  // namespace microtopt
