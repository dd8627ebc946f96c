#include "microtopt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

namespace microtopt {

void SolveSettings::validate() const {
  require(residual_tol > 0.0, "solver: residual_tol must be positive");
  require(residual_floor >= 0.0, "solver: residual_floor must be non-negative");
  require(max_newton_iters >= 1, "solver: max_newton_iters must be >= 1");
  require(initial_steps >= 1, "solver: initial_steps must be >= 1");
  require(max_step_cuts >= 0, "solver: max_step_cuts must be >= 0");
  require(reuse_update_threshold >= 0.0, "solver: reuse_update_threshold must be >= 0");
  require(polish_iterations >= 0, "solver: polish_iterations must be >= 0");
}

namespace {

// Stacked residual over [u_free; lambda] in strain-driven mode.
Vector reduced_residual(const MicroState& s, const Vector& f_int, const RveModel& model) {
  const PbcOperators& ops = model.ops();
  const int nf = model.num_free_dofs();
  const int nm = model.num_multipliers();
  Vector full_eq = f_int / model.volume() - ops.alpha * (ops.T_p.transpose() * s.lambda_hat);
  Vector r(nf + nm);
  r.head(nf) = model.reduce(full_eq);
  r.tail(nm) = -ops.alpha * (ops.T_p * s.u_hat) + ops.alpha * (ops.T_pXs * s.kin.G_sym);
  return r;
}

void apply_update(MicroState& s, const Vector& dx, const RveModel& model) {
  const int nf = model.num_free_dofs();
  s.u_hat += model.expand(dx.head(nf));
  s.lambda_hat += dx.tail(model.num_multipliers());
}

// d r / d t for E(t) = t E_final: only the constraint block depends on t.
Vector load_derivative(const MacroKinematics& kin, const VoigtStrain& E_final, const RveModel& model) {
  Vector v = Vector::Zero(model.num_unknowns());
  v.tail(model.num_multipliers()) = model.ops().alpha * (kin.Z * E_final);
  return v;
}

PathSample make_sample(double t, const MicroState& s, const NewtonReport& rep, const Vector& rho,
                       const RveModel& model, bool with_tangent) {
  PathSample p;
  p.load_factor = t;
  p.E = s.kin.E_hat;
  p.S_int = s.S_int;
  p.newton_iterations = rep.iterations;
  p.reference_norm = rep.reference_norm;
  p.equilibrium_norm = rep.equilibrium_norm;
  p.constraint_norm = rep.constraint_norm;
  if (with_tangent) {
    const SaddleFactorization fac = factorize_at(s, rho, model);
    p.C_eff = effective_tangent(s, model, fac).C_eff;
  }
  return p;
}

VoigtStrain strain_at(double t, const VoigtStrain& E_final) {
  return t >= 1.0 ? E_final : VoigtStrain(t * E_final);
}

}  // namespace

ResidualNorms residual_norms(const MicroState& state, const Vector& rho, const RveModel& model) {
  const Vector r = reduced_residual(state, model.internal_force(state.u_hat, rho), model);
  return {r.head(model.num_free_dofs()).norm(), r.tail(model.num_multipliers()).norm()};
}

MicroState newton_solve_at_strain(const MicroState& state0, const VoigtStrain& E_target,
                                  const Vector& rho, const RveModel& model,
                                  const SolveSettings& settings, NewtonReport* report) {
  settings.validate();
  require(state0.u_hat.size() == model.num_dofs() &&
              state0.lambda_hat.size() == model.num_multipliers(),
          "newton_solve_at_strain: state dimensions do not match the model");
  model.check_density(rho);

  MicroState s = state0;
  s.kin = make_kinematics(E_target, model.ops());
  s.converged = false;
  const int nf = model.num_free_dofs();
  const int nm = model.num_multipliers();

  NewtonReport rep;
  SaddleFactorization fac;
  bool reuse = false;
  double ref = -1.0;
  double prev_norm = 0.0;
  int polish_left = settings.polish_iterations;
  bool converged_once = false;

  for (;;) {
    Vector f_int;
    const SparseMatrix U = model.saddle_matrix(s.u_hat, rho, &f_int);
    const Vector r = reduced_residual(s, f_int, model);
    const double eq = r.head(nf).norm();
    const double cn = r.tail(nm).norm();
    const double total = r.norm();
    if (!std::isfinite(total))
      throw_error(ErrorKind::StepFailure, "Newton residual is not finite");
    if (ref < 0.0) ref = total;
    const double tol = std::max(settings.residual_tol * ref, settings.residual_floor);
    rep.reference_norm = ref;
    rep.equilibrium_norm = eq;
    rep.constraint_norm = cn;

    if (eq <= tol && cn <= tol) {
      converged_once = true;
      if (polish_left == 0) break;
      --polish_left;
      reuse = false;
    } else if (converged_once) {
      // Polishing may sit at round-off level; the earlier iterate already met the tolerance.
      break;
    }
    if (rep.iterations >= settings.max_newton_iters + settings.polish_iterations)
      throw_error(ErrorKind::StepFailure,
                  "Newton did not converge in " + std::to_string(rep.iterations) +
                      " iterations (residual " + std::to_string(total / std::max(ref, 1e-300)) +
                      " relative)");
    if (total > 1e12 * std::max(ref, settings.residual_floor))
      throw_error(ErrorKind::StepFailure, "Newton iteration diverged");

    if (reuse && fac.ready() && total > 0.1 * prev_norm) reuse = false;
    if (!(reuse && fac.ready())) {
      fac.factorize(U);
      ++rep.factorizations;
    }
    const Vector dx = fac.solve(Vector(-r));
    if (!dx.allFinite()) throw_error(ErrorKind::StepFailure, "Newton update is not finite");
    Vector x(nf + nm);
    x << model.reduce(s.u_hat), s.lambda_hat;
    reuse = settings.reuse_update_threshold > 0.0 && !converged_once &&
            dx.norm() < settings.reuse_update_threshold * std::max(x.norm(), 1e-300);
    apply_update(s, dx, model);
    prev_norm = total;
    ++rep.iterations;
  }

  s.S_int = internal_macro_stress(s.lambda_hat, s.kin, model.ops());
  s.converged = true;
  s.newton_iterations = rep.iterations;
  if (report) *report = rep;
  return s;
}

namespace {

SolvePath load_controlled_path(const Vector& rho, const VoigtStrain& E_final, int n_samples,
                               const RveModel& model, const SolveSettings& settings,
                               bool with_tangent, SolvePath path) {
  MicroState s = path.final_state;
  double t = 0.0;
  for (int k = 1; k <= n_samples; ++k) {
    const double t_target = (k == n_samples) ? 1.0 : static_cast<double>(k) / n_samples;
    double dt = t_target - t;
    int cuts = 0;
    NewtonReport rep;
    while (t < t_target) {
      const double t_try = (t + dt >= t_target - 1e-15) ? t_target : t + dt;
      try {
        s = newton_solve_at_strain(s, strain_at(t_try, E_final), rho, model, settings, &rep);
        t = t_try;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::StepFailure && e.kind() != ErrorKind::StructuralSingularity)
          throw;
        if (++cuts > settings.max_step_cuts) {
          path.final_state = s;
          throw PathFailureError("load step at t = " + std::to_string(t_try) +
                                     " failed after " + std::to_string(settings.max_step_cuts) +
                                     " cut-backs: " + e.what(),
                                 std::move(path));
        }
        ++path.step_cuts;
        dt *= 0.5;
        spdlog::debug("solve_path: cutting step to dt = {:.3e} at t = {:.6f}", dt, t);
      }
    }
    path.samples.push_back(make_sample(t, s, rep, rho, model, with_tangent));
    path.final_state = s;
  }
  return path;
}

SolvePath arc_length_path(const Vector& rho, const VoigtStrain& E_final, int n_samples,
                          const RveModel& model, const SolveSettings& settings,
                          bool with_tangent, SolvePath path) {
  const int nf = model.num_free_dofs();
  MicroState s = path.final_state;
  double t = 0.0;

  SaddleFactorization fac = factorize_at(s, rho, model);
  Vector xt = fac.solve(Vector(-load_derivative(s.kin, E_final, model)));
  const double psi2 = std::max(xt.head(nf).squaredNorm(), 1e-300);
  double ds = std::sqrt(xt.head(nf).squaredNorm() + psi2) / n_samples;
  Vector prev_du = xt.head(nf);
  int consecutive_cuts = 0;
  const int max_steps = 20 * n_samples + 100;

  for (int step = 0; step < max_steps; ++step) {
    if (step > 0) {
      fac = factorize_at(s, rho, model);
      xt = fac.solve(Vector(-load_derivative(s.kin, E_final, model)));
    }
    const double denom = std::sqrt(xt.head(nf).squaredNorm() + psi2);
    double dt = ds / denom;
    if (xt.head(nf).dot(prev_du) < 0.0) dt = -dt;
    if (t + dt >= 1.0) break;

    MicroState trial = s;
    apply_update(trial, dt * xt, model);
    double Dt = dt;
    Vector Du = dt * xt.head(nf);
    bool ok = false;
    double ref = -1.0;
    NewtonReport rep;
    try {
      for (int it = 0; it <= settings.max_newton_iters; ++it) {
        trial.kin = make_kinematics(strain_at(t + Dt, E_final), model.ops());
        Vector f_int;
        const SparseMatrix U = model.saddle_matrix(trial.u_hat, rho, &f_int);
        const Vector r = reduced_residual(trial, f_int, model);
        if (!r.allFinite()) break;
        if (ref < 0.0) ref = std::max(r.norm(), ds);
        const double tol = std::max(settings.residual_tol * ref, settings.residual_floor);
        rep.reference_norm = ref;
        rep.equilibrium_norm = r.head(nf).norm();
        rep.constraint_norm = r.tail(model.num_multipliers()).norm();
        rep.iterations = it;
        if (rep.equilibrium_norm <= tol && rep.constraint_norm <= tol) {
          ok = true;
          break;
        }
        fac.factorize(U);
        const Vector dR = fac.solve(Vector(-r));
        const Vector dT = fac.solve(Vector(-load_derivative(trial.kin, E_final, model)));
        const Vector w = Du + dR.head(nf);
        const double a1 = dT.head(nf).squaredNorm() + psi2;
        const double a2 = 2.0 * w.dot(dT.head(nf)) + 2.0 * psi2 * Dt;
        const double a3 = w.squaredNorm() + psi2 * Dt * Dt - ds * ds;
        const double disc = a2 * a2 - 4.0 * a1 * a3;
        if (disc < 0.0) break;
        const double sq = std::sqrt(disc);
        const double l1 = (-a2 + sq) / (2.0 * a1);
        const double l2 = (-a2 - sq) / (2.0 * a1);
        const double c1 = (w + l1 * dT.head(nf)).dot(Du);
        const double c2 = (w + l2 * dT.head(nf)).dot(Du);
        const double dl = (c1 >= c2) ? l1 : l2;
        const Vector dx = dR + dl * dT;
        apply_update(trial, dx, model);
        Du += dx.head(nf);
        Dt += dl;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StructuralSingularity &&
          e.kind() != ErrorKind::InadmissibleStrain && e.kind() != ErrorKind::InadmissibleKinematics)
        throw;
      ok = false;
    }
    if (!ok || t + Dt > 1.0 || Dt <= 0.0) {
      if (ok && t + Dt > 1.0) break;
      if (++consecutive_cuts > settings.max_step_cuts) {
        path.final_state = s;
        throw PathFailureError("arc-length step failed at t = " + std::to_string(t), std::move(path));
      }
      ++path.step_cuts;
      ds *= 0.5;
      continue;
    }
    consecutive_cuts = 0;
    trial.S_int = internal_macro_stress(trial.lambda_hat, trial.kin, model.ops());
    trial.converged = true;
    trial.newton_iterations = rep.iterations;
    s = trial;
    t += Dt;
    prev_du = Du;
    path.samples.push_back(make_sample(t, s, rep, rho, model, with_tangent));
    path.final_state = s;
  }

  // Finish on the exact target under load control.
  path.final_state = s;
  SolvePath tail = load_controlled_path(rho, E_final, 1, model, settings, with_tangent,
                                        SolvePath{{}, s, 0});
  path.samples.push_back(tail.samples.back());
  path.final_state = tail.final_state;
  path.step_cuts += tail.step_cuts;
  return path;
}

}  // namespace

SolvePath solve_path(const Vector& rho, const VoigtStrain& E_final, int n_samples,
                     const RveModel& model, const SolveSettings& settings, bool with_tangent) {
  settings.validate();
  require(n_samples >= 1, "solve_path: n_samples must be >= 1");
  model.check_density(rho);
  strain_to_symmetric_gradient(E_final);  // admissibility of the endpoint implies the whole ray

  SolvePath path;
  path.final_state = zero_state(model);
  path.samples.push_back(make_sample(0.0, path.final_state, NewtonReport{}, rho, model, with_tangent));
  if (E_final.isZero(0.0)) return path;

  if (settings.arc_length_enabled)
    return arc_length_path(rho, E_final, n_samples, model, settings, with_tangent, std::move(path));
  return load_controlled_path(rho, E_final, n_samples, model, settings, with_tangent,
                              std::move(path));
}

}  // namespace microtopt
