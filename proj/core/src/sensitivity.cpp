#include "microtopt/sensitivity.hpp"

#include <algorithm>
#include <cmath>

namespace microtopt {

namespace {

void require_converged(const MicroState& state, const RveModel& model) {
  if (!state.converged)
    throw_error(ErrorKind::StaleState, "sensitivity requested for an unconverged state");
  require(state.u_hat.size() == model.num_dofs() &&
              state.lambda_hat.size() == model.num_multipliers(),
          "sensitivity: state dimensions do not match the model");
}

Eigen::Matrix<double, 8, 3> gather_columns(const Matrix& V, const RveModel& model, int e) {
  Eigen::Matrix<double, 8, 3> Ve;
  const auto& dofs = model.element_dofs(e);
  for (int a = 0; a < 8; ++a) Ve.row(a) = V.row(dofs[a]);
  return Ve;
}

double simp_ratio(double rho, const RveModel& model) {
  const SimpModulus sm = simp_modulus(rho, model.material(), model.simp());
  return sm.derivative / sm.modulus;
}

}  // namespace

ObjectiveValue objective_and_partial(const Mat3& C_eff, const Mat3& C_target) {
  const Mat3 d = C_eff - C_target;
  return {d.squaredNorm(), 2.0 * d};
}

Mat3 effective_tangent_at(const MicroState& state, const Vector& rho, const RveModel& model) {
  const SaddleFactorization fac = factorize_at(state, rho, model);
  return effective_tangent(state, model, fac).C_eff;
}

Vector dCeff_drho_contracted(const MicroState& state, const Vector& rho, const RveModel& model,
                             const Mat3& dz_dC, const EffectiveTangent& tangent) {
  require_converged(state, model);
  model.check_density(rho);
  const int ne = model.mesh().num_elements();
  Vector g(ne);
  const double vol = model.volume();
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    const ElementMatrix K = model.element(e).tangent(model.gather(state.u_hat, e), rho[e],
                                                     model.material(), model.simp());
    const Eigen::Matrix<double, 8, 3> Ve = gather_columns(tangent.V, model, e);
    const Mat3 VKV = Ve.transpose() * K * Ve;
    g[e] = vol * simp_ratio(rho[e], model) * dz_dC.cwiseProduct(VKV).sum();
  }
  return g;
}

Vector dCeff_du_contracted(const MicroState& state, const Vector& rho, const RveModel& model,
                           const Mat3& dz_dC, const EffectiveTangent& tangent) {
  require_converged(state, model);
  model.check_density(rho);
  const int ne = model.mesh().num_elements();
  const Mat3 Dsym = 0.5 * (dz_dC + dz_dC.transpose());
  std::vector<ElementVector> ge(static_cast<std::size_t>(ne));
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    ge[e].setZero();
    if (QuadElement::frozen(rho[e], model.simp())) continue;
    const ElementVector ue = model.gather(state.u_hat, e);
    const Eigen::Matrix<double, 8, 3> Ve = gather_columns(tangent.V, model, e);
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        const double w = (a == b) ? Dsym(a, a) : 2.0 * Dsym(a, b);
        if (w == 0.0) continue;
        ge[e] += w * model.element(e).tangent_directional(ue, Ve.col(a), Ve.col(b), rho[e],
                                                          model.material(), model.simp());
      }
  }
  Vector g = Vector::Zero(model.num_dofs());
  for (int e = 0; e < ne; ++e) {
    const auto& dofs = model.element_dofs(e);
    for (int a = 0; a < 8; ++a) g[dofs[a]] += ge[e][a];
  }
  return model.volume() * g;
}

Vector dCeff_dlambda(const MicroState& state, const RveModel& model, const Mat3& dz_dC) {
  require(state.kin.Z.rows() == model.num_multipliers(), "dCeff_dlambda: kinematics mismatch");
  const Mat3 Q = -state.kin.Mbar_inv * dz_dC * state.kin.Mbar_inv;
  Vec3 h;
  for (int k = 0; k < 3; ++k) h[k] = Q.cwiseProduct(gradient_matrix_basis(k)).sum();
  return model.ops().alpha * (state.kin.Z * h);
}

Vec3 dCeff_dE(const MicroState& state, const RveModel& model, const Mat3& dz_dC,
              const EffectiveTangent& tangent) {
  const MacroKinematics& kin = state.kin;
  const PbcOperators& ops = model.ops();
  const Mat3& Minv = kin.Mbar_inv;
  const VoigtStress S = internal_macro_stress(state.lambda_hat, kin, ops);
  const Mat3 Sbar = geometric_stress_matrix(S);
  const Vec3 Tl = ops.T_pXs.transpose() * state.lambda_hat;
  const Mat3 W = ops.T_pXs.transpose() * tangent.psi_inv_z;

  Vec3 out;
  for (int r = 0; r < 3; ++r) {
    Mat3 dM = Mat3::Zero();
    for (int k = 0; k < 3; ++k) dM += gradient_matrix_basis(k) * Minv(k, r);
    const Mat3 dMinv = -Minv * dM * Minv;
    const Vec3 dS = ops.alpha * (dMinv.transpose() * Tl);
    const Mat3 dSbar = geometric_stress_matrix(dS);
    const Mat3 dCs = -dMinv * Sbar * Minv - Minv * dSbar * Minv - Minv * Sbar * dMinv;
    const Mat3 dZPZ = dMinv.transpose() * W + W.transpose() * dMinv;
    out[r] = dz_dC.cwiseProduct(dCs - dZPZ).sum();
  }
  return out;
}

AdjointResult criterion_gradient(const MicroState& state, const Vector& rho, const RveModel& model,
                                 const Mat3& dz_dC, const SaddleFactorization& factorization) {
  require_converged(state, model);
  require(factorization.ready(), "criterion_gradient: factorization is not ready");
  const int nf = model.num_free_dofs();
  const int nm = model.num_multipliers();
  const int ne = model.mesh().num_elements();

  const EffectiveTangent tan = effective_tangent(state, model, factorization);
  AdjointResult res;
  res.C_eff = tan.C_eff;
  res.adjoint.partial_z_rho = dCeff_drho_contracted(state, rho, model, dz_dC, tan);

  Vector rhs(nf + nm);
  rhs.head(nf) = model.reduce(dCeff_du_contracted(state, rho, model, dz_dC, tan));
  rhs.tail(nm) = dCeff_dlambda(state, model, dz_dC);
  // Upsilon is symmetric, so its factorization also solves the transposed system.
  res.adjoint.chi = factorization.solve(Vector(-rhs));

  const Vector chi_u = model.expand(res.adjoint.chi.head(nf));
  Vector g(ne);
  const double inv_vol = 1.0 / model.volume();
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    const ElementVector fe = model.element(e).internal_force(model.gather(state.u_hat, e), rho[e],
                                                             model.material(), model.simp());
    g[e] = res.adjoint.partial_z_rho[e] +
           simp_ratio(rho[e], model) * inv_vol * model.gather(chi_u, e).dot(fe);
  }
  res.gradient.d_rho = std::move(g);
  return res;
}

AdjointResult adjoint_gradient(const MicroState& state, const Vector& rho, const RveModel& model,
                               const Mat3& C_target, const SaddleFactorization& factorization) {
  require_converged(state, model);
  const EffectiveTangent tan = effective_tangent(state, model, factorization);
  const ObjectiveValue obj = objective_and_partial(tan.C_eff, C_target);
  AdjointResult res = criterion_gradient(state, rho, model, obj.dz_dC, factorization);
  res.z = obj.z;
  return res;
}

ForwardEvaluation evaluate_objective(const FdProblem& problem, const Vector& rho) {
  require(problem.model != nullptr, "evaluate_objective: no model");
  const RveModel& model = *problem.model;
  ForwardEvaluation out;
  bool solved = false;
  if (problem.warm_start) {
    try {
      out.state = newton_solve_at_strain(*problem.warm_start, problem.E_applied, rho, model,
                                         problem.settings);
      solved = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StepFailure && e.kind() != ErrorKind::StructuralSingularity)
        throw;
    }
  }
  if (!solved)
    out.state = solve_path(rho, problem.E_applied, problem.n_steps, model, problem.settings)
                    .final_state;
  out.C_eff = effective_tangent_at(out.state, rho, model);
  out.z = objective_and_partial(out.C_eff, problem.C_target).z;
  return out;
}

FdOutcome fd_oracle(const Vector& rho, int e, double h, const FdProblem& problem) {
  FdOutcome out;
  try {
    require(problem.model != nullptr, "fd_oracle: no model");
    require(h > 0.0, "fd_oracle: step must be positive");
    require(e >= 0 && e < rho.size(), "fd_oracle: element index out of range");
    Vector plus = rho;
    Vector minus = rho;
    plus[e] = std::min(1.0, rho[e] + h);
    minus[e] = std::max(0.0, rho[e] - h);
    const double zp = evaluate_objective(problem, plus).z;
    const double zm = evaluate_objective(problem, minus).z;
    out.value = (zp - zm) / (plus[e] - minus[e]);
    out.ok = std::isfinite(out.value);
    if (!out.ok) out.message = "non-finite difference quotient";
  } catch (const std::exception& ex) {
    out.ok = false;
    out.message = ex.what();
  }
  return out;
}

std::vector<FdOutcome> fd_oracle_many(const Vector& rho, const std::vector<int>& elements, double h,
                                      const FdProblem& problem) {
  std::vector<FdOutcome> out(elements.size());
  const int n = static_cast<int>(elements.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) out[i] = fd_oracle(rho, elements[i], h, problem);
  return out;
}

}  // namespace microtopt
