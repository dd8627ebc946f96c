#include <doctest.h>

#include "microtopt/error.hpp"
#include "microtopt/solver.hpp"
#include "test_support.hpp"

using namespace microtopt;
using microtopt::testing::rel_diff;
using microtopt::testing::random_density;
using microtopt::testing::unit_model;

TEST_CASE("settings validation") {
  SolveSettings s;
  CHECK_NOTHROW(s.validate());
  s.residual_tol = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = SolveSettings{};
  s.max_step_cuts = -1;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("zero strain needs no iterations") {
  const RveModel model = unit_model(4);
  const Vector rho = random_density(16, 0.2, 1.0, 1);
  NewtonReport rep;
  const MicroState s =
      newton_solve_at_strain(zero_state(model), VoigtStrain::Zero(), rho, model, SolveSettings{}, &rep);
  CHECK(rep.iterations == 0);
  CHECK(s.converged);
  CHECK(s.u_hat.isZero());
  CHECK(s.S_int.isZero());

  const SolvePath p = solve_path(rho, VoigtStrain::Zero(), 5, model, SolveSettings{});
  CHECK(p.samples.size() == 1);
}

TEST_CASE("single element at small strain") {
  const RveModel model = unit_model(1);
  const Vector rho = Vector::Ones(1);
  NewtonReport rep;
  SolveSettings one;
  one.max_newton_iters = 1;
  // After the first linear solve the constraint block is satisfied exactly;
  // the remaining equilibrium residual is the O(E^2) material nonlinearity.
  try {
    newton_solve_at_strain(zero_state(model), VoigtStrain(0, 1e-6, 0), rho, model, one, &rep);
  } catch (const Error&) {
  }
  const MicroState s =
      newton_solve_at_strain(zero_state(model), VoigtStrain(0, 1e-6, 0), rho, model, SolveSettings{}, &rep);
  CHECK(rep.iterations <= 2);
  CHECK(rep.constraint_norm < 1e-12);
  CHECK(rep.equilibrium_norm <= 1e-10 * rep.reference_norm + 1e-14);
  CHECK(s.converged);
}

TEST_CASE("path samples and endpoint") {
  const RveModel model = unit_model(4);
  const Vector rho = random_density(16, 0.3, 1.0, 2);
  const SolvePath p = solve_path(rho, VoigtStrain(0, 0.1, 0), 5, model, SolveSettings{}, true);
  REQUIRE(p.samples.size() == 6);
  for (int k = 0; k <= 5; ++k) {
    CHECK(p.samples[k].load_factor == doctest::Approx(k / 5.0));
    CHECK(p.samples[k].E[1] == doctest::Approx(0.1 * k / 5.0));
    CHECK(p.samples[k].C_eff.has_value());
  }
  CHECK(p.final_state.converged);
  CHECK(p.samples.back().S_int[1] > 0.0);
  const ResidualNorms n = residual_norms(p.final_state, rho, model);
  CHECK(n.equilibrium < 1e-9);
  CHECK(n.constraint < 1e-9);
}

TEST_CASE("converged state does not depend on the step count") {
  const RveModel model = unit_model(8);
  const Vector rho = random_density(64, 0.2, 1.0, 7);
  const VoigtStrain E(0, 0.2, 0);
  const SolvePath a = solve_path(rho, E, 10, model, SolveSettings{});
  const SolvePath b = solve_path(rho, E, 40, model, SolveSettings{});
  CHECK(rel_diff(a.final_state.S_int, b.final_state.S_int) < 1e-8);
  CHECK(rel_diff(a.final_state.u_hat, b.final_state.u_hat) < 1e-8);
}

TEST_CASE("arc-length path reaches the same endpoint") {
  const RveModel model = unit_model(6);
  const Vector rho = random_density(36, 0.3, 1.0, 4);
  const VoigtStrain E(0, 0.15, 0);
  SolveSettings arc;
  arc.arc_length_enabled = true;
  const SolvePath a = solve_path(rho, E, 8, model, SolveSettings{});
  const SolvePath b = solve_path(rho, E, 8, model, arc);
  CHECK(b.samples.back().load_factor == doctest::Approx(1.0));
  CHECK(rel_diff(a.final_state.S_int, b.final_state.S_int) < 1e-8);
  for (std::size_t k = 1; k < b.samples.size(); ++k)
    CHECK(b.samples[k].load_factor > b.samples[k - 1].load_factor);
}

TEST_CASE("failures") {
  const RveModel model = unit_model(3);
  const Vector rho = Vector::Ones(9);
  CHECK_THROWS_AS(solve_path(rho, VoigtStrain(-0.6, 0, 0), 4, model, SolveSettings{}), Error);
  CHECK_THROWS_AS(solve_path(Vector::Ones(4), VoigtStrain(0, 0.1, 0), 4, model, SolveSettings{}),
                  Error);
  CHECK_THROWS_AS(solve_path(rho, VoigtStrain(0, 0.1, 0), 0, model, SolveSettings{}), Error);

  SolveSettings tight;
  tight.max_newton_iters = 1;
  tight.max_step_cuts = 0;
  tight.reuse_update_threshold = 0.0;
  try {
    solve_path(random_density(9, 0.2, 1.0, 3), VoigtStrain(0, 0.3, 0), 1, model, tight);
    FAIL("expected PathFailureError");
  } catch (const PathFailureError& e) {
    CHECK(e.kind() == ErrorKind::PathFailure);
    CHECK(e.partial().samples.size() == 1);
    CHECK(e.partial().final_state.converged);
  }
}
