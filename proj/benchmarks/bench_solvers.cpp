#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "dhgmpc/controller.hpp"

namespace dhgmpc {
namespace {

void BM_Dare(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  const LinearizedModel lin = linearize(cs.plant(), cs.steady[0], cs.scenario.mpc.dt);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_dare(lin.a, lin.b, cs.weights.q, cs.weights.r).residual);
  }
}
BENCHMARK(BM_Dare)->Unit(benchmark::kMicrosecond);

void BM_TerminalSynthesis(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_case_terminal(cs, 1).alpha);
  }
}
BENCHMARK(BM_TerminalSynthesis)->Unit(benchmark::kMillisecond);

// Cold-started OCP from the initial state, horizon given by the argument.
void BM_OcpColdStart(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  const int horizon = static_cast<int>(state.range(0));
  std::vector<StageReference> tuples;
  for (const SteadyState& ss : cs.steady) tuples.push_back({ss.x, ss.u, ss.d});
  const auto& t = bench::terminals();
  const OcpProblem ocp = build_ocp(
      cs.discrete(), initial_state(cs),
      reference_schedule(Variant::kMpc1, 0, horizon, horizon + 1), tuples,
      {&t[0], &t[1]}, cs.weights.q, cs.weights.r, cs.constraints);
  SqpOptions opt;
  default_scaling(cs.plant().layout(), &opt);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_ocp(ocp, nullptr, opt).objective);
  }
}
BENCHMARK(BM_OcpColdStart)->Arg(10)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

// One warm-started receding-horizon step during the transition.
void BM_MpcStepWarm(benchmark::State& state) {
  const CaseStudy& cs = bench::canonical();
  std::vector<StageReference> tuples;
  for (const SteadyState& ss : cs.steady) tuples.push_back({ss.x, ss.u, ss.d});
  SqpOptions opt;
  default_scaling(cs.plant().layout(), &opt);
  const auto& t = bench::terminals();
  const Variant v = state.range(0) == 1 ? Variant::kMpc1 : Variant::kMpc2;
  const int k0 = 40;
  for (auto _ : state) {
    state.PauseTiming();
    MpcController c(cs.discrete(), tuples, {t[0], t[1]}, cs.weights.q,
                    cs.weights.r, cs.constraints, cs.scenario.mpc.horizon,
                    cs.scenario.mpc.k_step, v, opt);
    Eigen::VectorXd x = cs.steady[0].x;
    const Eigen::VectorXd u = c.step(x, k0);
    x = cs.discrete().step(x, u, cs.steady[0].d);
    state.ResumeTiming();
    benchmark::DoNotOptimize(c.step(x, k0 + 1));
  }
}
BENCHMARK(BM_MpcStepWarm)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dhgmpc
