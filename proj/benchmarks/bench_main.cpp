#include <random>

#include <benchmark/benchmark.h>

#include "microtopt/sensitivity.hpp"

using namespace microtopt;

namespace {

Vector random_rho(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vector rho(n);
  for (int i = 0; i < n; ++i) rho[i] = u(gen);
  return rho;
}

struct Setup {
  RveModel model;
  Vector rho;
  MicroState state;

  explicit Setup(int n)
      : model(build_mesh(n, n, 1, 1, 0.3), MaterialParams{}, SimpParams{}),
        rho(random_rho(n * n, 1)),
        state(solve_path(rho, VoigtStrain(0, 0.1, 0), 5, model, SolveSettings{}).final_state) {}
};

void BM_SaddleAssembly(benchmark::State& st) {
  const Setup s(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    Vector f;
    benchmark::DoNotOptimize(s.model.saddle_matrix(s.state.u_hat, s.rho, &f));
  }
}

void BM_Factorization(benchmark::State& st) {
  const Setup s(static_cast<int>(st.range(0)));
  const SparseMatrix U = s.model.saddle_matrix(s.state.u_hat, s.rho);
  SaddleFactorization fac;
  fac.factorize(U);
  for (auto _ : st) fac.factorize(U);
}

void BM_EffectiveTangent(benchmark::State& st) {
  const Setup s(static_cast<int>(st.range(0)));
  const SaddleFactorization fac = factorize_at(s.state, s.rho, s.model);
  for (auto _ : st) benchmark::DoNotOptimize(effective_tangent(s.state, s.model, fac));
}

void BM_AdjointGradient(benchmark::State& st) {
  const Setup s(static_cast<int>(st.range(0)));
  const SaddleFactorization fac = factorize_at(s.state, s.rho, s.model);
  const Mat3 target = 0.5 * s.model.material().plane_stress_matrix();
  for (auto _ : st) benchmark::DoNotOptimize(adjoint_gradient(s.state, s.rho, s.model, target, fac));
}

}  // namespace

BENCHMARK(BM_SaddleAssembly)->Arg(20)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Factorization)->Arg(20)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EffectiveTangent)->Arg(20)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdjointGradient)->Arg(20)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
