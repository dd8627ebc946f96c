#include <doctest.h>

#include "microtopt/error.hpp"
#include "microtopt/optimizer.hpp"
#include "test_support.hpp"

using namespace microtopt;
using microtopt::testing::rel_diff;
using microtopt::testing::random_density;
using microtopt::testing::unit_model;

namespace {

ProblemConfig small_config() {
  ProblemConfig c;
  c.E_applied = VoigtStrain(0, 0.05, 0);
  c.r_min = 0.3;
  c.path_steps = 4;
  c.v_max = 0.5;
  c.beta.initial = 2.0;
  return c;
}

}  // namespace

TEST_CASE("beta schedule") {
  BetaSchedule b;
  CHECK(b.next(2.0) == doctest::Approx(3.0));
  CHECK(b.next(90.0) == 100.0);
  CHECK(b.next(100.0) == 100.0);
  double beta = b.initial;
  for (int k = 0; k < 30; ++k) {
    const double nb = b.next(beta);
    CHECK(nb >= beta);
    beta = nb;
  }
  CHECK(beta == b.max);
  b.factor = 0.9;
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("problem config validation") {
  ProblemConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.v_max == 0.305);
  CHECK(c.r_min == 0.0875);
  CHECK(c.mma.move == 0.1);
  c.v_max = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ProblemConfig{};
  c.eta = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("design gradient matches finite differences through the whole chain") {
  const RveModel model = unit_model(6);
  ProblemConfig c = small_config();
  c.enforce_symmetry = false;
  c.C_target = 0.3 * model.material().plane_stress_matrix();
  c.solver.polish_iterations = 2;
  const DesignProblem p(model, c);
  const Vector phi = random_density(p.num_variables(), 0.2, 0.9, 17);
  const DesignEvaluation ev = p.evaluate(phi, 3.0);
  CHECK(ev.field.rho.size() == 36);
  CHECK(ev.z == doctest::Approx(objective_and_partial(ev.C_eff, c.C_target).z));

  const double h = 1e-6;
  double worst = 0.0, worst_g = 0.0;
  for (int k = 0; k < p.num_variables(); k += 4) {
    Vector pp = phi, pm = phi;
    pp[k] += h;
    pm[k] -= h;
    const DesignEvaluation ep = p.evaluate(pp, 3.0, &ev.state);
    const DesignEvaluation em = p.evaluate(pm, 3.0, &ev.state);
    worst = std::max(worst, std::abs((ep.z - em.z) / (2 * h) - ev.d_phi[k]));
    worst_g = std::max(worst_g, std::abs((ep.volume.g - em.volume.g) / (2 * h) - ev.dg_phi[k]));
  }
  CHECK(worst / ev.d_phi.cwiseAbs().maxCoeff() < 1e-4);
  CHECK(worst_g / ev.dg_phi.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("symmetric designs stay symmetric") {
  const RveModel model = unit_model(6);
  const DesignProblem p(model, small_config());
  const Vector phi = random_density(p.num_variables(), 0.2, 0.9, 3);
  const DesignEvaluation ev = p.evaluate(phi, 2.0);
  CHECK((p.symmetry().symmetrize(ev.field.rho) - ev.field.rho).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(ev.C_eff(0, 0) - ev.C_eff(1, 1)) > 0.0);  // loading breaks the 1-2 symmetry
}

TEST_CASE("seed target") {
  const RveModel model = unit_model(10);
  ProblemConfig c = small_config();
  c.r_min = 0.15;
  const DesignProblem p(model, c);
  const SeedTarget t = make_seed_target(p, 0.5, 50.0);
  CHECK(t.seed.rho.mean() == doctest::Approx(0.5).epsilon(0.05));
  CHECK(rel_diff(t.C_target, t.C_target.transpose()) < 1e-8);
  CHECK(t.path.samples.back().E[1] == doctest::Approx(0.05));
  CHECK(t.C_target(1, 1) > 0.0);
}

TEST_CASE("already optimal design stops at once") {
  const RveModel model = unit_model(6);
  ProblemConfig c = small_config();
  const Vector phi0 = nodal_seed(model.mesh(), SeedKind::Uniform, 0.4);
  c.C_target = DesignProblem(model, c).evaluate(phi0, c.beta.initial).C_eff;
  const OptimizationResult r = run_optimization(model, c, phi0);
  CHECK(r.status == OptimizationStatus::AlreadyOptimal);
  CHECK(r.history.size() == 1);
  CHECK(std::string(to_string(r.status)) == "already-optimal");
}

TEST_CASE("short run decreases the objective") {
  const RveModel model = unit_model(8);
  ProblemConfig c = small_config();
  c.max_iterations = 12;
  c.beta.interval = 5;
  const DesignProblem p(model, c);
  c.C_target = make_seed_target(p, 0.5, 8.0).C_target;
  const Vector phi0 = nodal_seed(model.mesh(), SeedKind::Cross, 0.5);
  int calls = 0;
  const OptimizationResult r =
      run_optimization(model, c, phi0, [&](const HistoryRecord&, const DesignState&) { ++calls; });
  CHECK(r.status == OptimizationStatus::IterationLimit);
  CHECK(r.history.size() == 13);
  CHECK(calls == 13);
  CHECK(r.history.back().z < 0.5 * r.history.front().z);
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    CHECK(r.history[k].beta >= r.history[k - 1].beta);
    CHECK(r.history[k].max_change <= c.mma.move + 1e-12);
  }
  CHECK(r.history[5].beta_updated);
  CHECK(r.history[5].beta == doctest::Approx(3.0));
  CHECK(r.design.phi.minCoeff() >= 0.0);
  CHECK(r.design.phi.maxCoeff() <= 1.0);
}

TEST_CASE("solver failure aborts with the failing design") {
  const RveModel model = unit_model(4);
  ProblemConfig c = small_config();
  c.r_min = 0.3;
  c.E_applied = VoigtStrain(0, 0.4, 0);
  c.path_steps = 1;
  c.solver.max_newton_iters = 1;
  c.solver.max_step_cuts = 0;
  const Vector phi0 = nodal_seed(model.mesh(), SeedKind::Uniform, 0.4);
  const OptimizationResult r = run_optimization(model, c, phi0);
  CHECK(r.status == OptimizationStatus::Aborted);
  CHECK(r.failed_phi.has_value());
  CHECK_FALSE(r.message.empty());
  CHECK_THROWS_AS(run_optimization(model, c, Vector::Constant(3, 0.5)), Error);
}

TEST_CASE("repeated runs give identical histories") {
  const RveModel model = unit_model(8);
  ProblemConfig c = small_config();
  c.max_iterations = 6;
  const DesignProblem p(model, c);
  c.C_target = make_seed_target(p, 0.5, 8.0).C_target;
  const Vector phi0 = nodal_seed(model.mesh(), SeedKind::Cross, 0.5);
  const OptimizationResult a = run_optimization(model, c, phi0, {});
  const OptimizationResult b = run_optimization(model, c, phi0, {});
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].z == b.history[k].z);
    CHECK(a.history[k].g == b.history[k].g);
    CHECK(a.history[k].max_change == b.history[k].max_change);
    CHECK(a.history[k].newton_iterations == b.history[k].newton_iterations);
  }
  CHECK(a.design.phi == b.design.phi);
}
