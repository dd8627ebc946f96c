#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "microtopt/optimizer.hpp"
#include "microtopt/regularization.hpp"
#include "microtopt/sensitivity.hpp"
#include "test_support.hpp"

using namespace microtopt;
using microtopt::testing::rel_diff;
using microtopt::testing::random_density;

namespace {

constexpr int kN = 6;

RveModel model6() { return RveModel(build_mesh(kN, kN, 1, 1, 1), MaterialParams{}, SimpParams{}); }

Mat3 tangent_of(const RveModel& m, const Vector& rho, const VoigtStrain& E) {
  const MicroState s = solve_path(rho, E, 5, m, SolveSettings{}).final_state;
  return effective_tangent(s, m, factorize_at(s, rho, m)).C_eff;
}

// rho'(i, j) = rho(map(i, j)).
template <class F>
Vector remap(const Vector& rho, F map) {
  Vector out(rho.size());
  for (int j = 0; j < kN; ++j)
    for (int i = 0; i < kN; ++i) {
      const auto [si, sj] = map(i, j);
      out[j * kN + i] = rho[sj * kN + si];
    }
  return out;
}

}  // namespace

TEST_CASE("periodic shifts leave C_eff unchanged") {
  const RveModel m = model6();
  const VoigtStrain E(0.02, 0.12, 0.01);
  for (unsigned seed = 1; seed <= 3; ++seed) {
    const Vector rho = random_density(kN * kN, 0.2, 1.0, seed);
    const Mat3 C = tangent_of(m, rho, E);
    for (const auto& [di, dj] : {std::pair{1, 0}, std::pair{0, 2}, std::pair{3, 5}}) {
      const Vector shifted = remap(rho, [&](int i, int j) {
        return std::pair{(i + di) % kN, (j + dj) % kN};
      });
      CHECK(rel_diff(tangent_of(m, shifted, E), C) < 1e-8);
    }
  }
}

TEST_CASE("mirror and transpose transform C_eff") {
  const RveModel m = model6();
  Mat3 P = Mat3::Identity();
  P(2, 2) = -1.0;
  Mat3 Q = Mat3::Zero();
  Q(0, 1) = Q(1, 0) = Q(2, 2) = 1.0;
  for (unsigned seed = 4; seed <= 6; ++seed) {
    const Vector rho = random_density(kN * kN, 0.2, 1.0, seed);
    const Mat3 C = tangent_of(m, rho, VoigtStrain(0, 0.1, 0));
    const Vector mirrored = remap(rho, [](int i, int j) { return std::pair{kN - 1 - i, j}; });
    CHECK(rel_diff(tangent_of(m, mirrored, VoigtStrain(0, 0.1, 0)), P * C * P) < 1e-8);
    const Vector transposed = remap(rho, [](int i, int j) { return std::pair{j, i}; });
    CHECK(rel_diff(tangent_of(m, transposed, VoigtStrain(0.1, 0, 0)), Q * C * Q) < 1e-8);
  }
}

TEST_CASE("C_eff is symmetric and positive definite at moderate strain") {
  const RveModel m = model6();
  std::mt19937 gen(9);
  std::uniform_real_distribution<double> u(-0.05, 0.1);
  for (unsigned seed = 10; seed < 14; ++seed) {
    const Vector rho = random_density(kN * kN, 0.3, 1.0, seed);
    const Mat3 C = tangent_of(m, rho, VoigtStrain(u(gen), u(gen), u(gen)));
    CHECK(rel_diff(C, C.transpose()) < 1e-8);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat3>(0.5 * (C + C.transpose())).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("void-free stiffening increases the tangent") {
  const RveModel m = model6();
  const Vector rho = random_density(kN * kN, 0.2, 0.8, 15);
  const Mat3 C0 = tangent_of(m, rho, VoigtStrain(0, 1e-6, 0));
  const Mat3 C1 = tangent_of(m, (rho.array() + 0.1).matrix(), VoigtStrain(0, 1e-6, 0));
  const Eigen::SelfAdjointEigenSolver<Mat3> es(C1 - C0);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("repeated evaluation is deterministic across thread counts") {
  const RveModel m = model6();
  ProblemConfig c;
  c.E_applied = VoigtStrain(0, 0.1, 0);
  c.r_min = 0.3;
  c.path_steps = 4;
  c.C_target = 0.2 * m.material().plane_stress_matrix();
  const DesignProblem p(m, c);
  const Vector phi = random_density(p.num_variables(), 0.1, 0.9, 16);
  const DesignEvaluation a = p.evaluate(phi, 4.0);
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
  omp_set_num_threads(threads > 1 ? 1 : 2);
#endif
  const DesignEvaluation b = p.evaluate(phi, 4.0);
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  CHECK(a.z == b.z);
  CHECK(a.C_eff == b.C_eff);
  CHECK(a.d_phi == b.d_phi);
}

TEST_CASE("regularization keeps densities in bounds") {
  const RveMesh mesh = build_mesh(8, 8, 1, 1, 1);
  const SymmetryMap sym = build_symmetry_map(mesh);
  for (bool periodic : {false, true}) {
    const FilterOperator f(mesh, 0.2, periodic);
    for (unsigned seed = 0; seed < 5; ++seed) {
      const Vector phi = random_density(81, 0, 1, seed);
      for (double beta : {1.0, 8.0, 100.0}) {
        const RegularizedField r = regularize(phi, f, sym, beta, 0.5);
        CHECK(r.rho.minCoeff() >= 0.0);
        CHECK(r.rho.maxCoeff() <= 1.0);
        CHECK(r.drho_dmu.minCoeff() >= 0.0);
        CHECK(r.mu.minCoeff() >= phi.minCoeff() - 1e-15);
        CHECK(r.mu.maxCoeff() <= phi.maxCoeff() + 1e-15);
      }
    }
  }
}

TEST_CASE("objective is a squared distance") {
  std::mt19937 gen(3);
  std::normal_distribution<double> n;
  for (int k = 0; k < 20; ++k) {
    Mat3 A, B;
    for (int i = 0; i < 9; ++i) {
      A.data()[i] = n(gen);
      B.data()[i] = n(gen);
    }
    const ObjectiveValue ab = objective_and_partial(A, B);
    CHECK(ab.z >= 0.0);
    CHECK(ab.z == doctest::Approx(objective_and_partial(B, A).z));
    CHECK(objective_and_partial(A, A).z == 0.0);
  }
}
