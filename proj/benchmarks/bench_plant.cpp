#include <benchmark/benchmark.h>

#include "bench_common.hpp"

namespace dhgmpc {
namespace {

void BM_EulerStep(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  const SteadyState& ss = cs.steady[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(cs.discrete().step(ss.x, ss.u, ss.d));
  }
}
BENCHMARK(BM_EulerStep);

void BM_Jacobians(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  const SteadyState& ss = cs.steady[0];
  Eigen::MatrixXd a, b;
  for (auto _ : state) {
    cs.discrete().linearize(ss.x, ss.u, ss.d, &a, &b);
    benchmark::DoNotOptimize(a.data());
  }
}
BENCHMARK(BM_Jacobians);

void BM_SteadyState(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_steady_state(cs.plant(), cs.scenario.setpoints[1]).residual);
  }
}
BENCHMARK(BM_SteadyState)->Unit(benchmark::kMicrosecond);

void BM_BuildCaseStudy(benchmark::State& state) {
  const Scenario sc = load_scenario(DHGMPC_CANONICAL);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_case_study(sc).steady[0].residual);
  }
}
BENCHMARK(BM_BuildCaseStudy)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dhgmpc
