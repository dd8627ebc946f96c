#include <doctest.h>

#include "microtopt/error.hpp"
#include "microtopt/sensitivity.hpp"
#include "test_support.hpp"

using namespace microtopt;
using microtopt::testing::rel_diff;
using microtopt::testing::random_density;
using microtopt::testing::unit_model;

namespace {

struct Fixture {
  RveModel model = unit_model(5);
  Vector rho = random_density(25, 0.2, 1.0, 21);
  VoigtStrain E = VoigtStrain(0.02, 0.1, 0.01);
  MicroState state;
  Mat3 D;
  EffectiveTangent tangent;

  Fixture() {
    state = newton_solve_at_strain(zero_state(model), E, rho, model, SolveSettings{});
    D << 0.3, -0.2, 0.1, -0.2, 0.7, 0.05, 0.1, 0.05, -0.4;
    tangent = effective_tangent(state, model, factorize_at(state, rho, model));
  }
  double contract(const MicroState& s, const Vector& r) const {
    return (D.cwiseProduct(effective_tangent_at(s, r, model))).sum();
  }
};

double scale_of(const Vector& v) { return std::max(v.cwiseAbs().maxCoeff(), 1e-300); }

}  // namespace

TEST_CASE("objective and partial") {
  Mat3 C = Mat3::Identity();
  Mat3 T = Mat3::Zero();
  T(0, 1) = 0.5;
  const ObjectiveValue v = objective_and_partial(C, T);
  CHECK(v.z == doctest::Approx(3.25));
  CHECK(v.dz_dC == 2.0 * (C - T));
  CHECK(objective_and_partial(C, C).z == 0.0);
}

TEST_CASE("dC/du by finite differences") {
  Fixture f;
  const Vector g = dCeff_du_contracted(f.state, f.rho, f.model, f.D, f.tangent);
  REQUIRE(g.size() == f.model.num_dofs());
  const double h = 1e-6;
  double worst = 0.0;
  for (int dof = 0; dof < f.model.num_dofs(); dof += 3) {
    if (f.model.free_index(dof) < 0) continue;
    MicroState p = f.state, m = f.state;
    p.u_hat[dof] += h;
    m.u_hat[dof] -= h;
    const double fd = (f.contract(p, f.rho) - f.contract(m, f.rho)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[dof]));
  }
  CHECK(worst / scale_of(g) < 1e-5);
}

TEST_CASE("dC/dlambda by finite differences") {
  Fixture f;
  const Vector g = dCeff_dlambda(f.state, f.model, f.D);
  REQUIRE(g.size() == f.model.num_multipliers());
  const double h = 1e-6;
  double worst = 0.0;
  for (int r = 0; r < g.size(); ++r) {
    MicroState p = f.state, m = f.state;
    p.lambda_hat[r] += h;
    m.lambda_hat[r] -= h;
    const double fd = (f.contract(p, f.rho) - f.contract(m, f.rho)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[r]));
  }
  CHECK(worst / scale_of(g) < 1e-6);
}

TEST_CASE("dC/dE by finite differences") {
  Fixture f;
  const Vec3 g = dCeff_dE(f.state, f.model, f.D, f.tangent);
  const double h = 1e-6;
  for (int r = 0; r < 3; ++r) {
    MicroState p = f.state, m = f.state;
    p.kin = make_kinematics(f.E + h * Vec3::Unit(r), f.model.ops());
    m.kin = make_kinematics(f.E - h * Vec3::Unit(r), f.model.ops());
    const double fd = (f.contract(p, f.rho) - f.contract(m, f.rho)) / (2 * h);
    CHECK(std::abs(fd - g[r]) / scale_of(g) < 1e-5);
  }
}

TEST_CASE("dC/drho explicit by finite differences") {
  Fixture f;
  const Vector g = dCeff_drho_contracted(f.state, f.rho, f.model, f.D, f.tangent);
  const double h = 1e-6;
  double worst = 0.0;
  for (int e = 0; e < 25; ++e) {
    Vector rp = f.rho, rm = f.rho;
    rp[e] += h;
    rm[e] -= h;
    const double fd = (f.contract(f.state, rp) - f.contract(f.state, rm)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[e]));
  }
  CHECK(worst / scale_of(g) < 1e-5);
}

TEST_CASE("adjoint gradient matches the finite-difference oracle") {
  Fixture f;
  const Mat3 target = 0.5 * f.model.material().plane_stress_matrix();
  const SaddleFactorization fac = factorize_at(f.state, f.rho, f.model);
  const AdjointResult a = adjoint_gradient(f.state, f.rho, f.model, target, fac);
  CHECK(a.z == doctest::Approx(objective_and_partial(f.tangent.C_eff, target).z));

  SolveSettings tight;
  tight.polish_iterations = 2;
  FdProblem prob{&f.model, f.E, target, tight, 10, f.state};
  std::vector<int> elems;
  for (int e = 0; e < 25; ++e) elems.push_back(e);
  const std::vector<FdOutcome> fd = fd_oracle_many(f.rho, elems, 1e-6, prob);
  double scale = 0.0, worst = 0.0;
  for (int e = 0; e < 25; ++e) {
    REQUIRE(fd[e].ok);
    scale = std::max(scale, std::abs(fd[e].value));
    worst = std::max(worst, std::abs(fd[e].value - a.gradient.d_rho[e]));
  }
  CHECK(worst / scale < 1e-4);
}

TEST_CASE("criterion gradient is linear in dz/dC") {
  Fixture f;
  const SaddleFactorization fac = factorize_at(f.state, f.rho, f.model);
  const Mat3 D2 = Mat3::Identity();
  const Vector g1 = criterion_gradient(f.state, f.rho, f.model, f.D, fac).gradient.d_rho;
  const Vector g2 = criterion_gradient(f.state, f.rho, f.model, D2, fac).gradient.d_rho;
  const Vector g3 = criterion_gradient(f.state, f.rho, f.model, 2.0 * f.D - D2, fac).gradient.d_rho;
  CHECK(rel_diff(g3, 2.0 * g1 - g2) < 1e-10);
}

TEST_CASE("one-sided differences at the bounds") {
  const RveModel model = unit_model(3);
  Vector rho = random_density(9, 0.3, 0.9, 9);
  rho[0] = 1.0;
  rho[1] = 0.0;
  FdProblem prob{&model, VoigtStrain(0, 0.05, 0), Mat3::Zero(), SolveSettings{}, 4, std::nullopt};
  const MicroState s = evaluate_objective(prob, rho).state;
  const AdjointResult a = adjoint_gradient(s, rho, model, Mat3::Zero(), factorize_at(s, rho, model));
  for (int e : {0, 1}) {
    const FdOutcome o = fd_oracle(rho, e, 1e-6, prob);
    REQUIRE(o.ok);
    CHECK(std::abs(o.value - a.gradient.d_rho[e]) / std::abs(a.gradient.d_rho.cwiseAbs().maxCoeff()) <
          1e-3);
  }
  FdProblem bad = prob;
  bad.model = nullptr;
  CHECK_FALSE(fd_oracle(rho, 0, 1e-6, bad).ok);
}

TEST_CASE("stale state is rejected") {
  Fixture f;
  MicroState s = f.state;
  s.converged = false;
  CHECK_THROWS_AS(dCeff_drho_contracted(s, f.rho, f.model, f.D, f.tangent), Error);
  try {
    adjoint_gradient(s, f.rho, f.model, Mat3::Zero(), factorize_at(f.state, f.rho, f.model));
    FAIL("expected StaleState");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StaleState);
  }
}
