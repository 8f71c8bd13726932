#include "mfg/chaos.hpp"
#include "mfg/fbsde.hpp"
#include "mfg/measure.hpp"
#include "mfg/mkv.hpp"
#include "mfg/random.hpp"
#include "mfg/riccati.hpp"

#include <benchmark/benchmark.h>

using namespace mfg;

namespace {

LQParams default_lq() {
  LQParams p;
  p.Sigma = Mat::Constant(1, 1, 0.5);
  p.Sigma0 = Mat::Constant(1, 1, 0.2);
  p.q = p.f_cost = p.rho = p.g_cost = 1.0;
  p.mu0 = Vec::Constant(1, 2.0);
  p.Lambda0 = Mat::Constant(1, 1, 0.25);
  return p;
}

Eigen::MatrixXd cloud(NormalStream& s, int n, int N) {
  Eigen::MatrixXd a(n, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = s.next();
  return a;
}

void BM_Philox(benchmark::State& state) {
  NormalStream s = NoiseStreams(1).auxiliary(0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(s.next());
}
BENCHMARK(BM_Philox);

void BM_W2(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  NormalStream s = NoiseStreams(2).auxiliary(0, 0);
  const EmpiricalMeasure a(cloud(s, n, N)), b(cloud(s, n, N));
  for (auto _ : state) benchmark::DoNotOptimize(w2(a, b));
}
BENCHMARK(BM_W2)->Args({256, 1})->Args({64, 2})->Args({256, 2});

void BM_Riccati(benchmark::State& state) {
  const LQParams p = default_lq();
  for (auto _ : state) benchmark::DoNotOptimize(solve_riccati_mfe(p).p_at(0));
}
BENCHMARK(BM_Riccati)->Unit(benchmark::kMillisecond);

void BM_BackwardPass(benchmark::State& state) {
  const GameSpec spec = make_lq(default_lq());
  const FbsdeCoefficients c = mkv_coefficients(spec);
  PathEnsemble e = PathEnsemble::sample(spec.dims, {1.0, 100}, {16, static_cast<int>(state.range(0))},
                                        NoiseStreams(1), spec.m0);
  for (auto _ : state) backward_pass(c, e, nullptr);
}
BENCHMARK(BM_BackwardPass)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SolveMkv(benchmark::State& state) {
  const GameSpec spec = make_lq(default_lq());
  for (auto _ : state) {
    const MfeSolution sol = solve_mkv(spec, {1.0, 20}, {16, 64}, SolverConfig{});
    benchmark::DoNotOptimize(sol.outer_iterations);
  }
}
BENCHMARK(BM_SolveMkv)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
